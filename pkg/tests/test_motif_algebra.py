import random
from itertools import permutations, product

import pytest
from conftest import glyph

from momentforge.graph_core import SmallGraph, canonical_form, enumerate_connected_graphs
from momentforge.motif_algebra import (
    count_motif,
    count_placements,
    delete_node,
    enumerate_motifs,
    extension_multiset,
    labelling_orbits,
    make_motif,
    motif_from_ident,
    neighborhood_extensions,
    parse_motif,
    path_motif,
    relabel,
)
from momentforge.network_models import Network, census_exhaustive, generate, lattice_graph_classes, NetworkSpec


def random_network(rng, N, p):
    edges = [(i, j) for i in range(N) for j in range(i + 1, N) if rng.random() < p]
    return Network(N, edges)


def count_bruteforce(net, motif, states):
    """Ordered tuples of distinct nodes inducing the motif graph with matching labels."""
    m = motif.order
    nb = net.neighbor_sets
    total = 0
    for t in permutations(range(net.N), m):
        if any(states[t[v]] != motif.labels[v] for v in range(m)):
            continue
        if all((t[j] in nb[t[i]]) == motif.graph.has_edge(i, j) for i in range(m) for j in range(i + 1, m)):
            total += 1
    return total


def test_motif_class_counts():
    assert [len(enumerate_motifs(m, 2)) for m in range(1, 6)] == [2, 3, 10, 50, 354]


def test_lattice_restricted_counts():
    classes = lattice_graph_classes(2, 5)
    assert [len(enumerate_motifs(m, 2, classes)) for m in range(1, 6)] == [2, 3, 6, 24, 78]


def test_labelled_classes_bruteforce():
    for m in range(1, 5):
        for g in enumerate_connected_graphs(m):
            seen = {
                (canonical_form(g, lab).graph, canonical_form(g, lab).labels) for lab in product(range(2), repeat=m)
            }
            assert len(seen) == sum(1 for x in enumerate_motifs(m, 2) if canonical_form(x.graph).graph == g)


def test_relabel_and_delete():
    sis = glyph("SIS")
    centre = [p for p in range(3) if sis.labels[p] == 1][0]
    assert relabel(sis, centre, 0) == glyph("SSS")
    assert delete_node(sis, centre) is None
    end = [p for p in range(3) if sis.labels[p] == 0][0]
    assert delete_node(sis, end) == glyph("IS")
    tri = glyph("SSItr")
    assert {delete_node(tri, p) for p in range(3)} == {glyph("SS"), glyph("IS")}


def test_edge_extensions():
    IS = glyph("IS")
    p = IS.labels.index(1)
    ext = extension_multiset(IS, p, 1)
    assert ext == {glyph("SII"): 1, glyph("SIItr"): 1}
    assert neighborhood_extensions(IS, p, 1) == {glyph("SII"), glyph("SIItr")}


def test_chain_centre_extension_classes():
    sss = glyph("SSS")
    ext = extension_multiset(sss, 1, 0)
    assert sum(ext.values()) == 4
    assert {m.graph.n_edges for m in ext} == {3, 4, 5}


def test_parse_and_ident_roundtrip():
    for text in ["S-I-S", "SIS:01,12,20", "IISI", "SSII:01,12,23,30"]:
        m = parse_motif(text)
        assert motif_from_ident(m.ident) == m
    assert parse_motif("SIS:01,12,20") == glyph("SSItr")
    assert parse_motif("I-S-S") == glyph("SSI")


def test_count_simple():
    net = Network(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    states = [1, 1, 0, 1, 0]
    assert count_motif(net, glyph("I"), states) == 3
    assert count_motif(net, glyph("IS"), states) == 3
    tri = Network(3, [(0, 1), (1, 2), (0, 2)])
    iis = glyph("SIItr")
    assert count_placements(tri, iis, [1, 1, 0]) == 1
    assert count_motif(tri, iis, [1, 1, 0]) == 2
    assert count_motif(tri, glyph("SSStr"), [0, 0, 0]) == 6


@pytest.mark.parametrize("seed", range(15))
def test_count_matches_bruteforce(seed):
    rng = random.Random(seed)
    net = random_network(rng, rng.randint(4, 7), 0.5)
    states = [rng.randint(0, 1) for _ in range(net.N)]
    for m in range(1, 5):
        for motif in enumerate_motifs(m, 2):
            assert count_motif(net, motif, states) == count_bruteforce(net, motif, states)


@pytest.mark.parametrize("seed", range(10))
def test_sum_over_labellings_gives_census(seed):
    rng = random.Random(50 + seed)
    net = random_network(rng, rng.randint(6, 12), 0.35)
    states = [rng.randint(0, 1) for _ in range(net.N)]
    census = census_exhaustive(net, 4)
    for m in range(1, 5):
        for g in enumerate_connected_graphs(m):
            total = sum(mult * count_motif(net, x, states) for x, mult in labelling_orbits(g, 2).items())
            assert total == census.get(g)
