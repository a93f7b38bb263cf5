"""Small-graph combinatorics.

Graphs are tiny (order <= 8), so adjacency is stored as one integer bitmask per
node.  Canonical forms come from colour refinement followed by exhaustive
minimisation over the permutations that respect the refined cells; that is
still an exact canonical labelling, just with far fewer candidates than m!.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations, product

from .config import CapacityError, check_order


@dataclass(frozen=True)
class SmallGraph:
    order: int
    adj: tuple  # adj[i] is a bitmask of the neighbours of node i

    def __post_init__(self):
        if self.order < 0 or len(self.adj) != self.order:
            raise ValueError("adjacency length must equal order")
        full = (1 << self.order) - 1
        for i, row in enumerate(self.adj):
            if row & ~full or row >> i & 1:
                raise ValueError("adjacency must be irreflexive and within range")
            for j in _bits(row):
                if not self.adj[j] >> i & 1:
                    raise ValueError("adjacency must be symmetric")

    @classmethod
    def from_edges(cls, m, edges):
        rows = [0] * m
        for i, j in edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            rows[i] |= 1 << j
            rows[j] |= 1 << i
        return cls(m, tuple(rows))

    @classmethod
    def from_matrix(cls, matrix):
        m = len(matrix)
        edges = [(i, j) for i in range(m) for j in range(i + 1, m) if matrix[i][j]]
        return cls.from_edges(m, edges)

    def has_edge(self, i, j):
        return bool(self.adj[i] >> j & 1)

    def neighbors(self, i):
        return list(_bits(self.adj[i]))

    def degree(self, i):
        return bin(self.adj[i]).count("1")

    def edges(self):
        return [(i, j) for i in range(self.order) for j in _bits(self.adj[i]) if i < j]

    @property
    def n_edges(self):
        return sum(bin(r).count("1") for r in self.adj) // 2

    def matrix(self):
        return [[int(self.adj[i] >> j & 1) for j in range(self.order)] for i in range(self.order)]

    def induced(self, nodes):
        """Induced subgraph on `nodes`; node t of the result is nodes[t]."""
        nodes = list(nodes)
        pos = {v: t for t, v in enumerate(nodes)}
        rows = []
        for v in nodes:
            r = 0
            for u in _bits(self.adj[v]):
                if u in pos:
                    r |= 1 << pos[u]
            rows.append(r)
        return SmallGraph(len(nodes), tuple(rows))

    def permuted(self, order):
        """Relabel so that new node t is old node order[t]."""
        return self.induced(order)

    def is_connected(self):
        if self.order == 0:
            return True
        return _reach(self.adj, 1, (1 << self.order) - 1) == (1 << self.order) - 1

    def components(self, nodes=None):
        """Connected components of the subgraph induced by `nodes` (default: all)."""
        mask = (1 << self.order) - 1 if nodes is None else _mask(nodes)
        out = []
        rest = mask
        while rest:
            start = rest & -rest
            comp = _reach(self.adj, start, mask)
            out.append(tuple(_bits(comp)))
            rest &= ~comp
        return out

    def distances(self):
        """All-pairs shortest-path lengths (None where unreachable)."""
        return [list(_bfs(self.adj, s, self.order)) for s in range(self.order)]

    def diameter(self):
        if self.order == 0:
            return 0
        dist = self.distances()
        if any(d is None for row in dist for d in row):
            return float("inf")
        return max(max(row) for row in dist)


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _mask(nodes):
    m = 0
    for v in nodes:
        m |= 1 << v
    return m


def _reach(adj, start_mask, allowed):
    seen = start_mask & allowed
    frontier = seen
    while frontier:
        nxt = 0
        for v in _bits(frontier):
            nxt |= adj[v]
        nxt &= allowed & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def _bfs(adj, s, m):
    dist = [None] * m
    dist[s] = 0
    frontier, seen, level = 1 << s, 1 << s, 0
    while frontier:
        level += 1
        nxt = 0
        for v in _bits(frontier):
            nxt |= adj[v]
        nxt &= ~seen
        for v in _bits(nxt):
            dist[v] = level
        seen |= nxt
        frontier = nxt
    return dist


# ---------------------------------------------------------------- canonical


@dataclass(frozen=True)
class CanonicalForm:
    graph: SmallGraph
    labels: tuple
    perm: tuple  # canonical position t holds original node perm[t]
    automorphism_count: int


def _refine(adj, m, labels):
    colours = [(labels[v], bin(adj[v]).count("1")) for v in range(m)]
    colours = _rank(colours)
    while True:
        sig = [(colours[v], tuple(sorted(colours[u] for u in _bits(adj[v])))) for v in range(m)]
        new = _rank(sig)
        if len(set(new)) == len(set(colours)):
            return new
        colours = new


def _rank(keys):
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _encode(adj, order):
    pos = [0] * len(order)
    for t, v in enumerate(order):
        pos[v] = t
    code = []
    for t, v in enumerate(order):
        r = 0
        for u in _bits(adj[v]):
            if pos[u] < t:
                r |= 1 << pos[u]
        code.append(r)
    return tuple(code)


@lru_cache(maxsize=200_000)
def _canonical(adj, labels):
    m = len(adj)
    colours = _refine(adj, m, labels)
    cells = {}
    for v in range(m):
        cells.setdefault(colours[v], []).append(v)
    cell_list = [cells[c] for c in sorted(cells)]
    best, best_order, ties = None, None, 0
    for choice in product(*(permutations(c) for c in cell_list)):
        order = [v for part in choice for v in part]
        code = _encode(adj, order)
        if best is None or code < best:
            best, best_order, ties = code, order, 1
        elif code == best:
            ties += 1
    rows = [0] * m
    for t, r in enumerate(best):
        for s in _bits(r):
            rows[t] |= 1 << s
            rows[s] |= 1 << t
    canon_labels = tuple(labels[v] for v in best_order)
    return tuple(rows), canon_labels, tuple(best_order), ties


def canonical_form(g, labels=None):
    """Canonical representative of (g, labels) with its automorphism count.

    Isomorphic inputs give identical results; the count is the number of
    label-preserving automorphisms.
    """
    check_order(g.order)
    if labels is None:
        labels = (0,) * g.order
    labels = tuple(int(x) for x in labels)
    if len(labels) != g.order:
        raise ValueError("label vector length must equal graph order")
    rows, canon_labels, perm, aut = _canonical(g.adj, labels)
    return CanonicalForm(SmallGraph(g.order, rows), canon_labels, perm, aut)


def automorphism_count_bruteforce(g, labels=None):
    labels = tuple(labels) if labels is not None else (0,) * g.order
    count = 0
    for p in permutations(range(g.order)):
        if all(labels[p[v]] == labels[v] for v in range(g.order)) and all(
            g.has_edge(p[i], p[j]) == g.has_edge(i, j)
            for i in range(g.order)
            for j in range(i + 1, g.order)
        ):
            count += 1
    return count


def graph_key(g):
    """Deterministic sort key for canonical graphs."""
    return (g.order, g.n_edges, g.adj)


@lru_cache(maxsize=None)
def _connected_graphs(m):
    if m == 1:
        return (SmallGraph(1, (0,)),)
    found = {}
    for base in _connected_graphs(m - 1):
        for nb in range(1, 1 << (m - 1)):
            rows = list(base.adj) + [nb]
            for u in _bits(nb):
                rows[u] |= 1 << (m - 1)
            cf = canonical_form(SmallGraph(m, tuple(rows)))
            found[cf.graph.adj] = cf.graph
    return tuple(sorted(found.values(), key=graph_key))


def enumerate_connected_graphs(m):
    """Connected graphs of order m, one canonical representative per class."""
    if m < 1:
        raise ValueError("order must be >= 1")
    check_order(m)
    return list(_connected_graphs(m))


# ---------------------------------------------------------------- distances


def power_graph(g, d):
    if d < 0:
        raise ValueError("d must be >= 0")
    dist = g.distances()
    edges = [
        (i, j)
        for i in range(g.order)
        for j in range(i + 1, g.order)
        if dist[i][j] is not None and 0 < dist[i][j] <= d
    ]
    return SmallGraph.from_edges(g.order, edges)


def is_chordal(g):
    """Maximum cardinality search followed by a perfect-elimination check."""
    m = g.order
    if m <= 3:
        return True
    weight = [0] * m
    numbered = [False] * m
    order = []
    for _ in range(m):
        v = max((u for u in range(m) if not numbered[u]), key=lambda u: (weight[u], -u))
        numbered[v] = True
        order.append(v)
        for u in g.neighbors(v):
            if not numbered[u]:
                weight[u] += 1
    # order reversed is a perfect elimination ordering iff g is chordal
    position = {v: i for i, v in enumerate(order)}
    for v in order:
        earlier = [u for u in g.neighbors(v) if position[u] < position[v]]
        if not earlier:
            continue
        parent = max(earlier, key=lambda u: position[u])
        for u in earlier:
            if u != parent and not g.has_edge(u, parent):
                return False
    return True


def _with_edges(g, extra):
    return SmallGraph.from_edges(g.order, g.edges() + list(extra))


def minimal_triangulations(g):
    """All chordal supergraphs with the minimum number of added edges.

    Results are ordered lexicographically by their added-edge sets.
    """
    check_order(g.order)
    if is_chordal(g):
        return [g]
    non_edges = [(i, j) for i in range(g.order) for j in range(i + 1, g.order) if not g.has_edge(i, j)]
    for size in range(1, len(non_edges) + 1):
        hits = [_with_edges(g, extra) for extra in combinations(non_edges, size) if is_chordal(_with_edges(g, extra))]
        if hits:
            return hits
    raise AssertionError("complete graph is chordal")  # pragma: no cover


def minimal_triangulation(g):
    return minimal_triangulations(g)[0]


def _bron_kerbosch(adj, r, p, x, out):
    if not p and not x:
        out.append(r)
        return
    pivot = next(_bits(p | x))
    for v in list(_bits(p & ~adj[pivot])):
        _bron_kerbosch(adj, r | 1 << v, p & adj[v], x & adj[v], out)
        p &= ~(1 << v)
        x |= 1 << v


def maximal_cliques(g):
    if g.order == 0:
        return []
    out = []
    _bron_kerbosch(g.adj, 0, (1 << g.order) - 1, 0, out)
    return sorted(tuple(_bits(c)) for c in out)


def maximal_d_cliques(g, d):
    return maximal_cliques(power_graph(g, d))


# ---------------------------------------------------------------- junctions


@dataclass(frozen=True)
class CliqueSet:
    cliques: tuple
    links: tuple
    separators: tuple

    @property
    def is_tree(self):
        if len(self.links) != len(self.cliques) - 1:
            return False
        return _linked(len(self.cliques), self.links)

    @property
    def is_forest(self):
        """Acyclic link structure; components are independent (empty separators)."""
        parent = list(range(len(self.cliques)))

        def find(a):
            while parent[a] != a:
                a = parent[a]
            return a

        for i, j in self.links:
            ri, rj = find(i), find(j)
            if ri == rj:
                return False
            parent[ri] = rj
        return True

    def has_running_intersection(self, order):
        for v in range(order):
            holding = [i for i, c in enumerate(self.cliques) if v in c]
            sub = [(i, j) for i, j in self.links if i in holding and j in holding]
            idx = {c: t for t, c in enumerate(holding)}
            if not _linked(len(holding), [(idx[i], idx[j]) for i, j in sub]):
                return False
        return True


def _linked(n, links):
    if n <= 1:
        return True
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in links:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(n)}) == 1


def _redundant(cliques, links, link):
    i, j = link
    sep = set(cliques[i]) & set(cliques[j])
    others = [lk for lk in links if lk != link]
    allowed = {t for t, c in enumerate(cliques) if sep <= set(c)}
    seen, stack = {i}, [i]
    while stack:
        a = stack.pop()
        for u, v in others:
            for s, t in ((u, v), (v, u)):
                if s == a and t in allowed and t not in seen:
                    if t == j:
                        return True
                    seen.add(t)
                    stack.append(t)
    return False


def _clique_set(cliques, links):
    links = tuple(sorted(links))
    seps = tuple(tuple(sorted(set(cliques[i]) & set(cliques[j]))) for i, j in links)
    return CliqueSet(tuple(cliques), links, seps)


def junction_from_cliques(cliques, all_variants=False):
    cliques = [tuple(c) for c in cliques]
    links = [
        (i, j) for i, j in combinations(range(len(cliques)), 2) if set(cliques[i]) & set(cliques[j])
    ]
    if not all_variants:
        while True:
            red = [lk for lk in sorted(links) if _redundant(cliques, links, lk)]
            if not red:
                return _clique_set(cliques, links)
            links.remove(red[0])
    results, seen = {}, set()

    def explore(current):
        key = tuple(sorted(current))
        if key in seen:
            return
        seen.add(key)
        red = [lk for lk in key if _redundant(cliques, list(key), lk)]
        if not red:
            results[key] = _clique_set(cliques, key)
            return
        for lk in red:
            explore([x for x in key if x != lk])

    explore(links)
    return [results[k] for k in sorted(results)]


def junction_graph(g, d, all_variants=False):
    """Clique graph of maximal d-cliques with redundant links removed.

    With all_variants=True, every distinct result over all removal orders is
    returned (sorted); otherwise the lexicographic-removal representative.
    """
    cs = junction_from_cliques(maximal_d_cliques(g, d), all_variants)
    pg = power_graph(g, d)
    if is_chordal(pg):
        connected = pg.is_connected()
        for item in cs if all_variants else [cs]:
            if not (item.is_tree if connected else item.is_forest):
                raise AssertionError("junction graph of a chordal power graph must be a tree")
    return cs


__all__ = [
    "SmallGraph",
    "CanonicalForm",
    "CliqueSet",
    "CapacityError",
    "canonical_form",
    "automorphism_count_bruteforce",
    "enumerate_connected_graphs",
    "power_graph",
    "is_chordal",
    "minimal_triangulation",
    "minimal_triangulations",
    "maximal_cliques",
    "maximal_d_cliques",
    "junction_graph",
    "junction_from_cliques",
    "graph_key",
]
