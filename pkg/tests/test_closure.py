from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from conftest import glyph

from momentforge.closure import (
    ClosureOptions,
    adhoc_closure,
    chordal_closure,
    closure_alternatives,
    decomposition_plan,
    denormalize,
    gamma_exponents,
    triangulated_closures,
)
from momentforge.config import ValidationError
from momentforge.derivation import build_hierarchy, sis_rates
from momentforge.graph_core import enumerate_connected_graphs
from momentforge.motif_algebra import Motif, make_motif, motif_from_edges, path_motif
from momentforge.network_models import NetworkSpec, census_exhaustive, census_for_spec, generate
from momentforge.pipeline import derive_system, er_census, mean_field_model, regular_census


def P(*labels):
    return path_motif(list(labels))


def node(a):
    return path_motif([a])


def classes(formula):
    return Counter(dict(formula.class_exponents()))


# Distinct labels make every factor identifiable regardless of canonical order.
A, B, C, D = 0, 1, 2, 3


def test_chain_chordal():
    plan = decomposition_plan(P(A, B, C))
    assert plan.route == "chordal" and plan.d == 1
    (f,) = closure_alternatives(P(A, B, C))
    assert classes(f) == Counter({P(A, B): 1, P(B, C): 1, node(B): -1})
    assert set(f.gamma) == {0}


@pytest.mark.parametrize("kappa", [3, 4, 6, 10])
def test_chain_denormalised_prefactor(kappa):
    (f,) = closure_alternatives(P(A, B, C))
    assert denormalize(f, regular_census(kappa)).prefactor == Fraction(kappa - 1, kappa)


def test_chain_prefactor_on_er_is_one():
    (f,) = closure_alternatives(glyph("SSI"))
    assert denormalize(f, er_census(6)).prefactor == 1


def test_triangle_default_is_singletons():
    tri = motif_from_edges(3, [(0, 1), (1, 2), (0, 2)], [A, B, C])
    plan = decomposition_plan(tri)
    assert plan.d == 0 and plan.route == "chordal"
    (f,) = closure_alternatives(tri)
    assert classes(f) == Counter({node(A): 1, node(B): 1, node(C): 1})


def test_kirkwood_triangle():
    tri = motif_from_edges(3, [(0, 1), (1, 2), (0, 2)], [A, B, C])
    f = adhoc_closure(decomposition_plan(tri), subsets=[(0, 1), (1, 2), (0, 2)])
    assert classes(f) == Counter(
        {P(A, B): 1, P(B, C): 1, P(A, C): 1, node(A): -1, node(B): -1, node(C): -1}
    )
    assert f.gamma == (0, 0, 0)


def _star():
    return motif_from_edges(4, [(1, 0), (1, 2), (1, 3)], [A, B, C, D])


def test_star_chordal():
    (f,) = closure_alternatives(_star())
    assert classes(f) == Counter({P(A, B): 1, P(B, C): 1, P(B, D): 1, node(B): -2})


def test_star_adhoc_has_centre_correction():
    star = _star()
    f = adhoc_closure(decomposition_plan(star))
    assert classes(f) == Counter(
        {P(A, B, C): 1, P(A, B, D): 1, P(C, B, D): 1, P(A, B): -1, P(B, C): -1, P(B, D): -1, node(B): 1}
    )
    centre = [p for p in range(4) if star.labels[p] == B][0]
    assert [g for p, g in enumerate(f.gamma) if p != centre] == [0, 0, 0]
    assert f.gamma[centre] == 1


def test_gamma_exponents_examples():
    assert gamma_exponents([(0, 1), (1, 2), (0, 2)], [(0,), (1,), (2,)], 3) == (0, 0, 0)
    assert gamma_exponents([(0, 1, 2), (0, 1, 3), (2, 1, 3)], [(0, 1), (1, 2), (1, 3)], 4) == (0, 1, 0, 0)
    assert gamma_exponents([(0, 1, 2)], [], 3) == (0, 0, 0)


def test_order_two_is_itself():
    (f,) = closure_alternatives(P(A, B), d=1)
    assert classes(f) == Counter({P(A, B): 1})


def test_four_cycle_is_nonchordal_with_alternatives():
    sq = glyph("SSIIsqo")
    plan = decomposition_plan(sq)
    assert plan.route == "nonchordal" and plan.d == 1
    assert triangulated_closures(plan)
    with pytest.raises(ValidationError):
        chordal_closure(plan)
    assert len(closure_alternatives(sq, "average")) >= 2


def test_unknown_route():
    with pytest.raises(ValidationError):
        closure_alternatives(P(A, B, C), route="magic")


# -------------------------------------------------------- paper MF3 closures


MF3_CLOSURES = {
    "ISSI": {"SSI": 2, "SS": -1},
    "IISI": {"SII": 1, "ISI": 1, "IS": -1},
    "ISIItre": {"IS": 3, "S": -2},
    "SSIIsqo": {"SII": 2, "SSI": 2, "IS": -2, "SS": -1, "II": -1},
    "SIIIsqo": {"SII": 2, "III": 1, "ISI": 1, "IS": -2, "II": -2},
}


@pytest.mark.parametrize("name", sorted(MF3_CLOSURES))
def test_square_lattice_mf3_closures(name):
    alts = closure_alternatives(glyph(name), route="adhoc")
    assert len(alts) == 1
    want = Counter({glyph(k): v for k, v in MF3_CLOSURES[name].items()})
    assert classes(alts[0]) == want


# ---------------------------------------------------------------- Fig. 1


@pytest.fixture(scope="module")
def lattice_census():
    return census_exhaustive(generate(NetworkSpec.parse("lattice:2:8")), 3)


def test_lattice_census_values(lattice_census):
    N = 64
    assert lattice_census[node(0).graph] == N
    assert lattice_census[P(0, 0).graph] == 4 * N
    assert lattice_census[P(0, 0, 0).graph] == 12 * N
    assert lattice_census.get(glyph("SSItr").graph) == 0


def test_mf2_lattice_closed_system(lattice_census):
    system = derive_system(2, sis_rates(), lattice_census)
    I, IS = glyph("I"), glyph("IS")
    assert system.variables == (I, IS)
    rows = {r: {c: str(v) for c, v in system.rows[r].items()} for r in system.variables}
    assert rows[I] == {I: "-gamma", IS: "beta"}
    assert rows[IS] == {I: "4*gamma", IS: "-beta - 2*gamma", glyph("SSI"): "beta", glyph("ISI"): "-beta"}
    closed = mean_field_model(2, sis_rates(), lattice_census)
    for b in (glyph("SSI"), glyph("ISI")):
        (f,) = closed.closures[b]
        assert denormalize(f, lattice_census).prefactor == Fraction(3, 4)
    assert classes(closed.closures[glyph("SSI")][0]) == Counter({glyph("SS"): 1, IS: 1, glyph("S"): -1})
    assert classes(closed.closures[glyph("ISI")][0]) == Counter({IS: 2, glyph("S"): -1})


def test_mf2_lattice_rhs_matches_hand_formula(lattice_census):
    closed = mean_field_model(2, sis_rates(), lattice_census)
    params = {"beta": 0.8, "gamma": 1.1}
    b, g = params["beta"], params["gamma"]
    for i, s_is in [(0.3, 0.05), (0.6, 0.1), (0.1, 0.02)]:
        # raw counts per node
        I, IS = i, 4 * s_is
        S = 1 - I
        SS = 4 * S - IS
        dI = -g * I + b * IS
        dIS = 4 * g * I - (b + 2 * g) * IS + b * 0.75 * SS * IS / S - b * 0.75 * IS**2 / S
        got = closed.rhs(np.array([i, s_is]), params)
        assert got == pytest.approx([dI, dIS / 4], rel=1e-12)


def test_census_missing_order_rejected():
    census = regular_census(4, kmax=2)
    system = derive_system(2, sis_rates(), regular_census(4))
    from momentforge.closure import close_system

    with pytest.raises(ValidationError):
        close_system(system, census)


# ------------------------------------------------------------- invariants


def _all_formulas(max_order):
    for m in range(2, max_order + 1):
        for g in enumerate_connected_graphs(m):
            motif = make_motif(g, tuple(range(m)))
            for route in ("auto", "adhoc", "average"):
                yield from closure_alternatives(motif, route)


def test_net_exponent_invariant_up_to_order_five():
    count = 0
    for f in _all_formulas(5):
        assert f.net_exponents() == [1] * f.target.order
        assert f.mf1_reduction() == Counter({p: 1 for p in range(f.target.order)})
        count += 1
    assert count > 30


def test_tree_consistency_adhoc_equals_chordal_on_chains():
    for m in range(3, 6):
        motif = path_motif(list(range(m)))
        plan = decomposition_plan(motif)
        (chordal,) = closure_alternatives(motif)
        adhoc = adhoc_closure(plan, subsets="maximal")
        assert classes(chordal) == classes(adhoc)


def test_closure_exact_on_independent_tree_state():
    """Recovery-only dynamics keep an i.i.d. start independent; the chain closure is then exact."""
    from momentforge.exact_oracle import expected_motif_counts, initial_distribution
    from momentforge.network_models import Network

    tree = Network(7, [(0, 1), (1, 2), (1, 3), (3, 4), (4, 5), (4, 6)])
    census = census_exhaustive(tree, 3)
    P0 = initial_distribution(2, 7, probs=[0.35, 0.65])
    motifs = [glyph(x) for x in ("S", "SS", "IS", "SSI")]
    times = [0.0, 0.4, 1.3]
    exp = expected_motif_counts(tree, sis_rates(), P0, times, motifs, {"beta": 0.0, "gamma": 0.9})
    (f,) = closure_alternatives(glyph("SSI"))
    pre = float(denormalize(f, census).prefactor)
    S, SS, IS, SSI = (exp[m] for m in motifs)
    assert pre * SS * IS / S == pytest.approx(SSI, rel=1e-10)
