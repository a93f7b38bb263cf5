"""Host networks and their subgraph census.

Census counts use ordered-tuple semantics throughout: a class with |Aut| = a is
counted a times per placement, so on the square lattice [edge] = 4N and
[3-chain] = 12N.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .config import ValidationError, check_order
from .graph_core import SmallGraph, canonical_form, enumerate_connected_graphs, graph_key


@dataclass(frozen=True)
class NetworkSpec:
    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("lattice", "random_regular", "erdos_renyi", "explicit", "complete")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown network kind {self.kind!r}")
        p = self.params
        if self.kind == "lattice":
            dim, side = int(p.get("dimension", 2)), int(p.get("side", 0))
            if dim < 1 or side < 2:
                raise ValidationError("lattice needs dimension >= 1 and side >= 2")
            if p.get("periodic", True) and side < 3:
                raise ValidationError("periodic lattice needs side >= 3")
        elif self.kind in ("random_regular", "erdos_renyi"):
            n, k = int(p.get("N", 0)), p.get("kappa", 0)
            if n < 2 or not 0 < k < n:
                raise ValidationError("need 0 < kappa < N")
            if self.kind == "random_regular" and (n * int(k)) % 2:
                raise ValidationError("random regular network needs N*kappa even")
        elif self.kind == "complete":
            if int(p.get("N", 0)) < 2:
                raise ValidationError("complete graph needs N >= 2")
        elif self.kind == "explicit":
            if "edges" not in p:
                raise ValidationError("explicit network needs an edge list")

    @property
    def kappa(self):
        if self.kind == "lattice":
            return 2 * int(self.params.get("dimension", 2))
        if self.kind == "complete":
            return int(self.params["N"]) - 1
        return self.params.get("kappa")

    def to_json(self):
        return json.dumps({"kind": self.kind, **self.params}, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kind = data.pop("kind")
        return cls(kind, data)

    @classmethod
    def parse(cls, text):
        """Shorthand: ``lattice:2:32``, ``lattice:2:32:open``, ``rr:4000:10``,
        ``er:1000:6``, ``complete:50``, ``file:path.txt``, or a JSON file path."""
        parts = text.split(":")
        head = parts[0]
        if head == "lattice":
            periodic = not (len(parts) > 3 and parts[3] == "open")
            return cls("lattice", {"dimension": int(parts[1]), "side": int(parts[2]), "periodic": periodic})
        if head in ("rr", "random_regular"):
            return cls("random_regular", {"N": int(parts[1]), "kappa": int(parts[2])})
        if head in ("er", "erdos_renyi"):
            return cls("erdos_renyi", {"N": int(parts[1]), "kappa": float(parts[2])})
        if head == "complete":
            return cls("complete", {"N": int(parts[1])})
        if head == "file":
            return cls("explicit", {"edges": read_edge_list(":".join(parts[1:]))})
        with open(text) as fh:
            return cls.from_dict(json.load(fh))


def read_edge_list(path):
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                u, v = line.split()[:2]
                edges.append((int(u), int(v)))
    return edges


class Network:
    """Undirected simple graph on nodes 0..N-1."""

    def __init__(self, n_nodes, edges):
        self.N = int(n_nodes)
        clean = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v or not (0 <= u < self.N and 0 <= v < self.N):
                raise ValidationError(f"invalid edge ({u}, {v})")
            clean.add((min(u, v), max(u, v)))
        self.edges = np.array(sorted(clean), dtype=np.int64).reshape(-1, 2)
        nb = [[] for _ in range(self.N)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        self.neighbors = [np.array(sorted(x), dtype=np.int64) for x in nb]

    @cached_property
    def neighbor_sets(self):
        return [frozenset(int(u) for u in x) for x in self.neighbors]

    @cached_property
    def csr(self):
        indptr = np.zeros(self.N + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(x) for x in self.neighbors])
        indices = np.concatenate(self.neighbors) if self.N else np.zeros(0, dtype=np.int64)
        return indptr, indices.astype(np.int64)

    @property
    def degrees(self):
        return np.array([len(x) for x in self.neighbors])

    def is_connected(self):
        seen = np.zeros(self.N, bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in self.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return bool(seen.all())

    def distances_from(self, source):
        dist = np.full(self.N, -1, dtype=np.int64)
        dist[source] = 0
        frontier = [source]
        level = 0
        while frontier:
            level += 1
            nxt = []
            for u in frontier:
                for v in self.neighbors[u]:
                    if dist[v] < 0:
                        dist[v] = level
                        nxt.append(v)
            frontier = nxt
        return dist


def _lattice(dim, side, periodic):
    n = side**dim
    idx = np.arange(n).reshape((side,) * dim)
    edges = []
    for axis in range(dim):
        if periodic:
            shifted = np.roll(idx, -1, axis=axis)
            edges.append(np.stack([idx.ravel(), shifted.ravel()], 1))
        else:
            a = np.take(idx, range(side - 1), axis=axis)
            b = np.take(idx, range(1, side), axis=axis)
            edges.append(np.stack([a.ravel(), b.ravel()], 1))
    return Network(n, np.concatenate(edges))


def _random_regular(n, k, rng, max_restarts=1000):
    for _ in range(max_restarts):
        stubs = list(np.repeat(np.arange(n), k))
        edges = set()
        ok = True
        while stubs:
            # pair stubs at random, rejecting loops and duplicate edges
            for _attempt in range(100):
                i, j = rng.choice(len(stubs), size=2, replace=False)
                u, v = stubs[i], stubs[j]
                e = (min(u, v), max(u, v))
                if u != v and e not in edges:
                    break
            else:
                ok = False
                break
            edges.add(e)
            for t in sorted((i, j), reverse=True):
                stubs[t] = stubs[-1]
                stubs.pop()
        if ok:
            return Network(n, sorted(edges))
    raise ValidationError("random regular pairing failed; try another seed")


def _erdos_renyi(n, kappa, rng):
    total = n * (n - 1) // 2
    p = kappa / (n - 1)
    m = rng.binomial(total, p)
    chosen = set()
    while len(chosen) < m:
        need = m - len(chosen)
        u = rng.integers(0, n, size=2 * need)
        v = rng.integers(0, n, size=2 * need)
        for a, b in zip(u, v):
            if a != b:
                chosen.add((min(a, b), max(a, b)))
                if len(chosen) == m:
                    break
    return Network(n, sorted(chosen))


def generate(spec, seed=0):
    """Build a network from a spec; deterministic given the seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    p = spec.params
    if spec.kind == "lattice":
        return _lattice(int(p.get("dimension", 2)), int(p["side"]), bool(p.get("periodic", True)))
    if spec.kind == "random_regular":
        return _random_regular(int(p["N"]), int(p["kappa"]), rng)
    if spec.kind == "erdos_renyi":
        return _erdos_renyi(int(p["N"]), float(p["kappa"]), rng)
    if spec.kind == "complete":
        n = int(p["N"])
        return Network(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    edges = [tuple(e) for e in p["edges"]]
    n = int(p.get("N", 1 + max(max(e) for e in edges)))
    return Network(n, edges)


# ------------------------------------------------------------------- census


class SubgraphCensus:
    """Map from unlabelled connected graph class to tuple-semantics count [a]."""

    def __init__(self, counts, kmax, n_nodes=None):
        self.counts = {}
        for g, c in counts.items():
            cg = canonical_form(g).graph
            self.counts[cg] = self.counts.get(cg, 0) + Fraction(c)
        self.kmax = int(kmax)
        single = SmallGraph(1, (0,))
        if n_nodes is not None:
            self.counts[single] = Fraction(n_nodes)

    @property
    def N(self):
        return self.counts.get(SmallGraph(1, (0,)), Fraction(0))

    def __getitem__(self, graph):
        if graph.order > self.kmax:
            raise KeyError(f"census covers orders <= {self.kmax}, asked for order {graph.order}")
        return self.counts.get(canonical_form(graph).graph, Fraction(0))

    def get(self, graph, default=0):
        try:
            return self[graph]
        except KeyError:
            return default

    def classes(self, order=None, nonzero=True):
        out = [g for g, c in self.counts.items() if (c != 0 or not nonzero) and (order is None or g.order == order)]
        return sorted(out, key=graph_key)

    def scaled(self, factor):
        return SubgraphCensus({g: c * Fraction(factor) for g, c in self.counts.items()}, self.kmax)

    def per_node(self):
        return self.scaled(Fraction(1) / self.N)

    def as_rows(self):
        return [(g, self.counts[g]) for g in self.classes(nonzero=False)]

    def __repr__(self):
        body = ", ".join(f"{g.order}:{g.edges()}={c}" for g, c in self.as_rows())
        return f"SubgraphCensus(kmax={self.kmax}, {body})"


def _esu(neighbor_sets, kmax, record):
    n = len(neighbor_sets)
    for v in range(n):
        ext = {u for u in neighbor_sets[v] if u > v}
        _esu_extend([v], neighbor_sets[v] | {v}, ext, v, kmax, neighbor_sets, record)


def _esu_extend(sub, closed_nb, ext, root, kmax, nb, record):
    record(sub)
    if len(sub) == kmax:
        return
    ext = set(ext)
    while ext:
        w = ext.pop()
        new_ext = ext | {u for u in nb[w] if u > root and u not in closed_nb}
        _esu_extend(sub + [w], closed_nb | nb[w], new_ext, root, kmax, nb, record)


def census_exhaustive(network, kmax):
    """Exact tuple-semantics counts of every connected induced subgraph class up to kmax."""
    check_order(kmax)
    nb = network.neighbor_sets
    placements = {}
    cache = {}

    def record(sub):
        key = []
        for v in sub:
            r = 0
            for t, u in enumerate(sub):
                if u in nb[v]:
                    r |= 1 << t
            key.append(r)
        key = tuple(key)
        cls = cache.get(key)
        if cls is None:
            cls = canonical_form(SmallGraph(len(sub), key)).graph
            cache[key] = cls
        placements[cls] = placements.get(cls, 0) + 1

    _esu(nb, kmax, record)
    counts = {g: c * canonical_form(g).automorphism_count for g, c in placements.items()}
    for m in range(1, kmax + 1):
        for g in enumerate_connected_graphs(m):
            counts.setdefault(g, 0)
    return SubgraphCensus(counts, kmax)


def node_graph():
    return SmallGraph(1, (0,))


def edge_graph():
    return SmallGraph.from_edges(2, [(0, 1)])


def chain_graph(m):
    return SmallGraph.from_edges(m, [(i, i + 1) for i in range(m - 1)])


def triangle_graph():
    return SmallGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


def census_analytic(kind, kappa, n_nodes=1, phi=0, kmax=3):
    """Closed-form census for orders <= 3.

    kind: "regular" (fixed degree kappa, clustering phi; lattices are regular
    with phi = 0) or "er" (large Erdos-Renyi, triangles negligible).
    """
    if kmax > 3:
        raise ValidationError("analytic census only covers orders <= 3")
    k = Fraction(kappa)
    n = Fraction(n_nodes)
    counts = {node_graph(): n}
    if kmax >= 2:
        counts[edge_graph()] = k * n
    if kmax >= 3:
        if kind == "regular":
            phi = Fraction(phi)
            counts[chain_graph(3)] = (1 - phi) * k * (k - 1) * n
            counts[triangle_graph()] = phi * k * (k - 1) * n
        elif kind == "er":
            counts[chain_graph(3)] = k * k * n
            counts[triangle_graph()] = Fraction(0)
        else:
            raise ValidationError(f"no analytic census for kind {kind!r}")
    return SubgraphCensus(counts, kmax)


def census_for_spec(spec, kmax, seed=0, analytic=True):
    """Per-node census suited to a spec: analytic where available, else exhaustive.

    Lattices are counted exactly on a periodic lattice large enough to avoid
    wrap-around artefacts, then divided by N.
    """
    if spec.kind == "lattice":
        dim = int(spec.params.get("dimension", 2))
        if analytic and kmax <= 3:
            return census_analytic("regular", 2 * dim, 1, 0, kmax)
        side = max(2 * kmax + 1, 5)
        return census_exhaustive(_lattice(dim, side, True), kmax).per_node()
    if analytic and kmax <= 3 and spec.kind == "random_regular":
        return census_analytic("regular", spec.params["kappa"], 1, 0, kmax)
    if analytic and kmax <= 3 and spec.kind == "erdos_renyi":
        return census_analytic("er", spec.params["kappa"], 1, 0, kmax)
    return census_exhaustive(generate(spec, seed), kmax).per_node()


def lattice_graph_classes(dimension, kmax):
    """Connected graph classes that occur as induced subgraphs of the hypercubic lattice."""
    side = max(2 * kmax + 1, 5)
    census = census_exhaustive(_lattice(dimension, side, True), kmax)
    return census.classes()
