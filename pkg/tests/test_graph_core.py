import random
from itertools import combinations, permutations

import pytest

from momentforge.config import CapacityError
from momentforge.graph_core import (
    SmallGraph,
    automorphism_count_bruteforce,
    canonical_form,
    enumerate_connected_graphs,
    is_chordal,
    junction_graph,
    maximal_cliques,
    maximal_d_cliques,
    minimal_triangulation,
    minimal_triangulations,
    power_graph,
)


def cycle(m):
    return SmallGraph.from_edges(m, [(i, (i + 1) % m) for i in range(m)])


def path(m):
    return SmallGraph.from_edges(m, [(i, i + 1) for i in range(m - 1)])


def complete(m):
    return SmallGraph.from_edges(m, list(combinations(range(m), 2)))


def random_graph(rng, m, p=0.5):
    return SmallGraph.from_edges(m, [e for e in combinations(range(m), 2) if rng.random() < p])


def chordal_bruteforce(g):
    """Every cycle of length >= 4 has a chord, checked over all induced subgraphs."""
    for k in range(4, g.order + 1):
        for nodes in combinations(range(g.order), k):
            sub = g.induced(list(nodes))
            if sub.n_edges == k and all(sub.degree(v) == 2 for v in range(k)) and sub.is_connected():
                return False
    return True


def test_triangle_automorphisms():
    assert canonical_form(complete(3)).automorphism_count == 6


@pytest.mark.parametrize("seed", range(40))
def test_automorphisms_match_bruteforce(seed):
    rng = random.Random(seed)
    m = rng.randint(1, 6)
    g = random_graph(rng, m)
    labels = tuple(rng.randint(0, 1) for _ in range(m))
    assert canonical_form(g, labels).automorphism_count == automorphism_count_bruteforce(g, labels)


@pytest.mark.parametrize("seed", range(30))
def test_canonical_form_is_invariant(seed):
    rng = random.Random(100 + seed)
    m = rng.randint(2, 7)
    g = random_graph(rng, m)
    labels = tuple(rng.randint(0, 2) for _ in range(m))
    perm = list(range(m))
    rng.shuffle(perm)
    h = SmallGraph.from_edges(m, [(perm[i], perm[j]) for i, j in g.edges()])
    hl = [0] * m
    for v in range(m):
        hl[perm[v]] = labels[v]
    a, b = canonical_form(g, labels), canonical_form(h, hl)
    assert (a.graph, a.labels) == (b.graph, b.labels)


def test_non_isomorphic_graphs_differ():
    assert canonical_form(path(4)).graph != canonical_form(SmallGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])).graph


def test_connected_graph_counts():
    assert [len(enumerate_connected_graphs(m)) for m in range(1, 7)] == [1, 1, 2, 6, 21, 112]
    assert sum(len(enumerate_connected_graphs(m)) for m in range(1, 4)) == 4


def test_connected_graph_counts_bruteforce():
    for m in range(1, 5):
        seen = set()
        pairs = list(combinations(range(m), 2))
        for mask in range(1 << len(pairs)):
            g = SmallGraph.from_edges(m, [e for t, e in enumerate(pairs) if mask >> t & 1])
            if g.is_connected():
                seen.add(canonical_form(g).graph)
        assert len(seen) == len(enumerate_connected_graphs(m))


def test_capacity_limit(monkeypatch):
    monkeypatch.setenv("MOMENTFORGE_MAX_ORDER", "4")
    with pytest.raises(CapacityError):
        canonical_form(path(5))


def test_power_graph():
    assert power_graph(path(4), 1) == path(4)
    assert power_graph(path(4), 3) == complete(4)
    assert power_graph(cycle(4), 2) == complete(4)
    assert power_graph(path(3), 0).n_edges == 0
    with pytest.raises(ValueError):
        power_graph(path(3), -1)


def test_chordality_examples():
    assert not is_chordal(cycle(4))
    assert is_chordal(complete(4))
    assert is_chordal(path(6))
    assert not is_chordal(cycle(5))


@pytest.mark.parametrize("seed", range(60))
def test_chordality_matches_bruteforce(seed):
    rng = random.Random(seed)
    g = random_graph(rng, rng.randint(1, 7), rng.uniform(0.3, 0.8))
    assert is_chordal(g) == chordal_bruteforce(g)


def test_minimal_triangulation_examples():
    assert minimal_triangulation(path(5)) == path(5)
    t = minimal_triangulation(cycle(5))
    assert t.n_edges == 7 and is_chordal(t)
    assert len(minimal_triangulations(cycle(4))) == 2


@pytest.mark.parametrize("seed", range(40))
def test_triangulation_is_chordal_and_minimum(seed):
    rng = random.Random(seed)
    g = random_graph(rng, rng.randint(3, 7), 0.4)
    t = minimal_triangulation(g)
    assert is_chordal(t)
    assert set(g.edges()) <= set(t.edges())
    added = t.n_edges - g.n_edges
    non_edges = [e for e in combinations(range(g.order), 2) if not g.has_edge(*e)]
    for k in range(added):
        for extra in combinations(non_edges, k):
            assert not is_chordal(SmallGraph.from_edges(g.order, g.edges() + list(extra)))


def test_maximal_cliques():
    assert maximal_cliques(complete(3)) == [(0, 1, 2)]
    assert maximal_d_cliques(path(4), 1) == [(0, 1), (1, 2), (2, 3)]
    assert maximal_d_cliques(path(4), 0) == [(0,), (1,), (2,), (3,)]


def test_junction_examples():
    tri = junction_graph(complete(3), 1)
    assert tri.cliques == ((0, 1, 2),) and tri.links == ()
    chain = junction_graph(path(3), 1)
    assert chain.separators == ((1,),)
    star = junction_graph(SmallGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)]), 1)
    assert star.is_tree and sorted(star.separators) == [(0,), (0,)]
    # star: three pairwise-overlapping cliques admit three spanning trees
    assert len(junction_graph(SmallGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)]), 1, all_variants=True)) == 3


def _all_small_graphs(max_m):
    for m in range(2, max_m + 1):
        yield from enumerate_connected_graphs(m)


def test_junction_tree_property_on_chordal_plans():
    checked = 0
    for g in _all_small_graphs(6):
        for d in range(0, int(g.diameter()) + 1):
            if not is_chordal(power_graph(g, d)):
                continue
            for tree in junction_graph(g, d, all_variants=True):
                assert tree.is_forest
                if d > 0:
                    assert tree.is_tree
                    assert len(tree.links) == len(tree.cliques) - 1
                assert tree.has_running_intersection(g.order)
                assert set().union(*map(set, tree.cliques)) == set(range(g.order))
                checked += 1
    assert checked > 100
