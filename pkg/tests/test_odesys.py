import numpy as np
import pytest

from momentforge.config import ValidationError
from momentforge.derivation import sis_rates
from momentforge.odesys import (
    analytic_reference,
    bifurcation_scan,
    integrate,
    leading_eigenvalue_trivial,
    locate_threshold,
    mf_distance_correlation,
    pair_correlations,
    steady_states,
)
from momentforge.pipeline import er_census, mean_field_model, regular_census, sis_model

MODELS = {
    "MF1": lambda k: mean_field_model(1, sis_rates(), regular_census(k, 2)),
    "MF2-hom": lambda k: mean_field_model(2, sis_rates(), regular_census(k)),
    "MF2-het": lambda k: mean_field_model(2, sis_rates(), er_census(k), degree_homogeneous=False),
}


def endemic(system, beta, gamma, kappa):
    pts = [f for f in steady_states(system, {"beta": beta, "gamma": gamma}, kappa=kappa) if f.stable and not f.trivial]
    assert len(pts) == 1
    return pts[0]


@pytest.mark.parametrize("name", sorted(MODELS))
@pytest.mark.parametrize("kappa", [4, 10])
@pytest.mark.parametrize("beta", [0.5, 2.0])
def test_endemic_state_matches_closed_form(name, kappa, beta):
    system = MODELS[name](kappa)
    ref = analytic_reference(name, kappa, beta)
    fp = endemic(system, beta, 1.0, kappa)
    assert fp.state[0] == pytest.approx(ref["I"], abs=1e-10)
    C = pair_correlations(system, fp.state)
    assert C[1, 1] == pytest.approx(ref["C_II"], abs=1e-9)
    assert C[0, 1] == pytest.approx(ref["C_SI"], abs=1e-9)
    assert C[0, 0] == pytest.approx(ref["C_SS"], abs=1e-9)


def test_general_gamma_pair_state():
    system = MODELS["MF2-hom"](6)
    ref = analytic_reference("MF2-hom", 6, 1.4, gamma=0.7)
    fp = endemic(system, 1.4, 0.7, 6)
    assert fp.state[0] == pytest.approx(ref["I"], abs=1e-10)
    assert fp.state[1] == pytest.approx(ref["IS"], abs=1e-10)
    # the literal closed form only holds for unit recovery rate
    assert ref["IS_printed"] != pytest.approx(ref["IS"], abs=1e-6)


@pytest.mark.parametrize("name,kappa,want", [("MF1", 4, 0.25), ("MF2-hom", 4, 1 / 3), ("MF2-het", 4, 0.25), ("MF2-hom", 10, 1 / 9)])
def test_threshold(name, kappa, want):
    thr = locate_threshold(MODELS[name](kappa), {"gamma": 1.0}, 0.01, 2.0)
    assert thr == pytest.approx(want, abs=1e-8)


def test_trivial_state_stability_flips():
    system = MODELS["MF2-hom"](4)
    assert leading_eigenvalue_trivial(system, {"beta": 0.3, "gamma": 1.0}) < 0
    assert leading_eigenvalue_trivial(system, {"beta": 0.4, "gamma": 1.0}) > 0


def test_below_threshold_only_trivial_state_is_stable():
    system = MODELS["MF2-hom"](4)
    stable = [f for f in steady_states(system, {"beta": 0.2, "gamma": 1.0}) if f.stable and f.admissible]
    assert len(stable) == 1 and stable[0].trivial


def test_integration_relaxes_to_fixed_point():
    system = MODELS["MF2-hom"](4)
    ref = analytic_reference("MF2-hom", 4, 1.0)
    traj = integrate(system, [0.01, 0.01], {"beta": 1.0, "gamma": 1.0}, 60.0)
    assert not traj.left_unit_box
    assert traj.y[-1, 0] == pytest.approx(ref["I"], abs=1e-6)
    with pytest.raises(ValidationError):
        integrate(system, [0.1, 0.1], {"beta": 1.0, "gamma": 1.0}, 1.0, rtol=0)


class _Drift:
    def rhs(self, u, params):
        return np.ones_like(u)


def test_integration_flags_leaving_the_box():
    traj = integrate(_Drift(), [0.5], {}, 5.0)
    assert traj.left_unit_box
    assert traj.event_time == pytest.approx(0.5, abs=1e-6)
    assert traj.t[-1] <= 0.5 + 1e-6
    with pytest.raises(ValidationError):
        integrate(MODELS["MF1"](4), [1.2], {"beta": 1.0, "gamma": 1.0}, 5.0)


def test_jacobian_matches_mf1_derivative():
    system = MODELS["MF1"](4)
    # d/dt I = -g I + b k I (1 - I) -> J = -g + b k (1 - 2 I)
    J = system.jacobian(np.array([0.3]), {"beta": 0.5, "gamma": 1.0})
    assert J[0, 0] == pytest.approx(-1 + 0.5 * 4 * 0.4, abs=1e-7)


def test_bifurcation_scan_finds_threshold():
    rows, thr = bifurcation_scan(MODELS["MF2-hom"](4), {"gamma": 1.0}, (0.1, 1.0), 10, kappa=4)
    assert thr == pytest.approx(1 / 3, abs=1e-8)
    above = [r for r in rows if r.beta_over_gamma > 0.4 and r.stable and r.branch_id > 0]
    assert above and all(r.C_II > 1 and r.C_SI < 1 for r in above)
    with pytest.raises(ValidationError):
        bifurcation_scan(MODELS["MF1"](4), {"gamma": 1.0}, (1.0, 0.5), 3)


def test_distance_correlations():
    single = np.array([0.6, 0.4])
    independent = np.outer(single, single)
    assert mf_distance_correlation(single, independent, 1, 1, 3) == pytest.approx(1.0)
    pair = np.array([[0.40, 0.20], [0.20, 0.20]])
    assert mf_distance_correlation(single, pair, 1, 1, 1) == pytest.approx(0.2 / 0.16)
    # correlations decay towards 1 with distance
    c = [mf_distance_correlation(single, pair, 1, 1, D) for D in range(1, 8)]
    assert all(abs(c[i + 1] - 1) < abs(c[i] - 1) for i in range(6))
    with pytest.raises(ValidationError):
        mf_distance_correlation(single, pair, 0, 1, 0)


def test_mf3_lattice_threshold_and_state():
    system = sis_model(3, "lattice:2:32", route="adhoc", targets=["II", "SIS", "SSI", "SII"])
    thr = locate_threshold(system, {"gamma": 1.0}, 0.3, 0.5)
    assert thr == pytest.approx(0.342804, abs=1e-5)
    assert thr > 1 / 3
    fp = endemic(system, 1.0, 1.0, 4)
    assert 0 < fp.state[0] < analytic_reference("MF2-hom", 4, 1.0)["I"]


def test_unknown_analytic_model():
    with pytest.raises(ValidationError):
        analytic_reference("MF9", 4, 1.0)
