"""Labelled motifs: canonical classes, relabelling and extension operators, counting."""

from collections import Counter
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product

from .config import check_order
from .graph_core import SmallGraph, canonical_form, enumerate_connected_graphs, graph_key


@dataclass(frozen=True)
class Motif:
    """A connected graph with one species index per node, in canonical indexing.

    Build instances with :func:`make_motif`; the raw constructor trusts its input.
    """

    graph: SmallGraph
    labels: tuple

    @property
    def order(self):
        return self.graph.order

    @cached_property
    def automorphisms(self):
        return canonical_form(self.graph, self.labels).automorphism_count

    @property
    def key(self):
        return (self.order, graph_key(self.graph), self.labels)

    def __lt__(self, other):
        return self.key < other.key

    @property
    def ident(self):
        """Stable string id, e.g. ``m3:e01.12:l001``."""
        edges = ".".join(f"{i}{j}" for i, j in self.graph.edges())
        return f"m{self.order}:e{edges}:l" + "".join(str(x) for x in self.labels)

    def name(self, species="SI"):
        return motif_name(self, species)


DISCONNECTED = None


def make_motif(graph, labels):
    if not graph.is_connected():
        raise ValueError("motif graph must be connected")
    cf = canonical_form(graph, labels)
    return Motif(cf.graph, cf.labels)


def motif_from_edges(m, edges, labels):
    return make_motif(SmallGraph.from_edges(m, edges), labels)


def path_motif(labels):
    m = len(labels)
    return motif_from_edges(m, [(i, i + 1) for i in range(m - 1)], labels)


def cycle_motif(labels):
    m = len(labels)
    return motif_from_edges(m, [(i, (i + 1) % m) for i in range(m)], labels)


def complete_motif(labels):
    m = len(labels)
    return motif_from_edges(m, [(i, j) for i in range(m) for j in range(i + 1, m)], labels)


def parse_motif(text, species="SI"):
    """Parse ``"S-I-S"`` (path) or ``"SIS:01,12,20"`` (explicit edges)."""
    index = {s: i for i, s in enumerate(species)}
    if ":" in text:
        labels_text, edge_text = text.split(":", 1)
        labels = [index[ch] for ch in labels_text]
        edges = [(int(e[0]), int(e[1])) for e in edge_text.split(",") if e]
        return motif_from_edges(len(labels), edges, labels)
    labels = [index[ch] for ch in text.replace("-", "")]
    return path_motif(labels)


def motif_from_ident(ident):
    order_part, edge_part, label_part = ident.split(":")
    m = int(order_part[1:])
    edges = [(int(e[0]), int(e[1])) for e in edge_part[1:].split(".") if e]
    labels = tuple(int(ch) for ch in label_part[1:])
    return motif_from_edges(m, edges, labels)


def _path_order(g):
    if g.order == 1:
        return [0]
    if g.n_edges != g.order - 1 or any(g.degree(v) > 2 for v in range(g.order)):
        return None
    start = next(v for v in range(g.order) if g.degree(v) == 1)
    order, prev = [start], None
    while len(order) < g.order:
        nxt = [u for u in g.neighbors(order[-1]) if u != prev]
        prev = order[-1]
        order.append(nxt[0])
    return order


def motif_name(motif, species="SI"):
    """Readable name: paths read along the path, other graphs carry a tag."""
    sym = [species[x] if x < len(species) else str(x) for x in motif.labels]
    path = _path_order(motif.graph)
    if path is not None:
        fwd = [motif.labels[v] for v in path]
        use = path if fwd <= fwd[::-1] else path[::-1]
        return "".join(sym[v] for v in use)
    g = motif.graph
    if g.order == 3:
        return "".join(sorted(sym, key=species.index if all(s in species for s in sym) else str)) + "tr"
    edges = "".join(f"{i}{j}" for i, j in g.edges())
    return "".join(sym) + "#" + edges


@lru_cache(maxsize=None)
def _motifs(m, n, restrict):
    graphs = enumerate_connected_graphs(m)
    if restrict is not None:
        graphs = [g for g in graphs if g.adj in restrict]
    out = []
    for g in graphs:
        seen = set()
        for labels in product(range(n), repeat=m):
            cf = canonical_form(g, labels)
            if (cf.graph.adj, cf.labels) not in seen:
                seen.add((cf.graph.adj, cf.labels))
                out.append(Motif(cf.graph, cf.labels))
    return tuple(sorted(out))


def enumerate_motifs(m, n, restrict_to=None):
    """One representative per class of (connected order-m graph, labelling)."""
    if m < 1:
        raise ValueError("order must be >= 1")
    check_order(m)
    restrict = None if restrict_to is None else frozenset(canonical_form(g).graph.adj for g in restrict_to if g.order == m)
    return list(_motifs(m, n, restrict))


def relabel(motif, p, k):
    labels = list(motif.labels)
    labels[p] = k
    cf = canonical_form(motif.graph, labels)
    return Motif(cf.graph, cf.labels)


def delete_node(motif, p):
    """Motif with node p removed, or DISCONNECTED (None) if the rest falls apart."""
    keep = [v for v in range(motif.order) if v != p]
    sub = motif.graph.induced(keep)
    if not sub.is_connected():
        return DISCONNECTED
    cf = canonical_form(sub, [motif.labels[v] for v in keep])
    return Motif(cf.graph, cf.labels)


def induced_motif(motif, nodes):
    nodes = sorted(nodes)
    sub = motif.graph.induced(nodes)
    if not sub.is_connected():
        return DISCONNECTED
    cf = canonical_form(sub, [motif.labels[v] for v in nodes])
    return Motif(cf.graph, cf.labels)


@lru_cache(maxsize=None)
def extension_multiset(motif, p, c):
    """Counter of order-(m+1) classes from attaching a c-node to p.

    Each subset of extra links to the other nodes contributes once, so the
    multiplicities are what the moment equation needs.
    """
    m = motif.order
    check_order(m + 1)
    others = [v for v in range(m) if v != p]
    out = Counter()
    for bits in range(1 << len(others)):
        rows = list(motif.graph.adj) + [1 << p]
        for t, v in enumerate(others):
            if bits >> t & 1:
                rows[m] |= 1 << v
        for v in range(m):
            if rows[m] >> v & 1:
                rows[v] |= 1 << m
        cf = canonical_form(SmallGraph(m + 1, tuple(rows)), motif.labels + (c,))
        out[Motif(cf.graph, cf.labels)] += 1
    return out


def neighborhood_extensions(motif, p, c):
    return set(extension_multiset(motif, p, c))


def c_degree(motif, p, c):
    return sum(1 for u in motif.graph.neighbors(p) if motif.labels[u] == c)


def _bfs_order(g):
    order, seen = [0], {0}
    i = 0
    while i < len(order):
        for u in g.neighbors(order[i]):
            if u not in seen:
                seen.add(u)
                order.append(u)
        i += 1
    return order


def iter_tuples(neighbor_sets, graph):
    """Yield ordered host tuples inducing exactly `graph` (position t -> node)."""
    m = graph.order
    order = _bfs_order(graph)
    anchor = {}
    for t in range(1, m):
        v = order[t]
        anchor[v] = next(order[s] for s in range(t) if graph.has_edge(v, order[s]))
    assign = [None] * m
    used = set()
    n_nodes = len(neighbor_sets)

    def rec(t):
        if t == m:
            yield tuple(assign)
            return
        v = order[t]
        cands = range(n_nodes) if t == 0 else neighbor_sets[assign[anchor[v]]]
        for h in cands:
            if h in used:
                continue
            ok = True
            for s in range(t):
                u = order[s]
                if (assign[u] in neighbor_sets[h]) != graph.has_edge(u, v):
                    ok = False
                    break
            if ok:
                assign[v] = h
                used.add(h)
                yield from rec(t + 1)
                used.discard(h)
        assign[v] = None

    yield from rec(0)


def _neighbor_sets(network):
    if hasattr(network, "neighbor_sets"):
        return network.neighbor_sets
    return [set(x) for x in network]


def count_motif(network, motif, states):
    """Raw tuple-semantics count [x^a] of `motif` in a labelled host network."""
    nb = _neighbor_sets(network)
    lab = motif.labels
    return sum(1 for t in iter_tuples(nb, motif.graph) if all(states[t[v]] == lab[v] for v in range(motif.order)))


def count_placements(network, motif, states):
    """Unordered placements (node sets with a matching assignment); independent check."""
    nb = _neighbor_sets(network)
    lab = motif.labels
    sets = {frozenset(t) for t in iter_tuples(nb, motif.graph) if all(states[t[v]] == lab[v] for v in range(motif.order))}
    return len(sets)


def labelling_orbits(graph, n):
    """Counter mapping each labelled class of `graph` to the number of labellings in it."""
    out = Counter()
    for labels in product(range(n), repeat=graph.order):
        cf = canonical_form(graph, labels)
        out[Motif(cf.graph, cf.labels)] += 1
    return out
