import random

import numpy as np
import pytest
from conftest import glyph

from momentforge.config import CapacityError, ValidationError
from momentforge.derivation import RateModel, build_hierarchy, sis_rates
from momentforge.exact_oracle import (
    build_generator,
    exact_column_sums,
    exact_generator,
    expected_motif_counts,
    initial_distribution,
    propagate,
    state_table,
)
from momentforge.network_models import Network

PARAMS = {"beta": 1.2, "gamma": 0.8}


def path_net(N):
    return Network(N, [(i, i + 1) for i in range(N - 1)])


def test_state_table_and_capacity():
    s = state_table(2, 3)
    assert s.shape == (8, 3)
    assert s[5].tolist() == [1, 0, 1]
    with pytest.raises(CapacityError):
        state_table(2, 20)


def test_generator_columns_sum_to_zero_exactly():
    net = Network(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    assert all(s == 0 for s in exact_column_sums(net, sis_rates(), {"beta": "3/2", "gamma": "1/3"}))


def test_float_generator_matches_rational():
    net = path_net(4)
    W = build_generator(net, sis_rates(), PARAMS).dense()
    Wq = exact_generator(net, sis_rates(), PARAMS)
    dense = np.zeros_like(W)
    for (i, j), v in Wq.items():
        dense[i, j] = float(v)
    assert np.allclose(W, dense, atol=1e-14)


def test_two_node_transition_rates():
    net = path_net(2)
    W = build_generator(net, sis_rates(), PARAMS).dense()
    # state index = x0 + 2 x1; from (I, S) = 1 the S node is infected at beta
    assert W[3, 1] == pytest.approx(PARAMS["beta"])
    assert W[0, 1] == pytest.approx(PARAMS["gamma"])
    assert W[2, 0] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_probability_conserved(seed):
    rng = random.Random(seed)
    N = rng.randint(3, 7)
    net = Network(N, [(i, j) for i in range(N) for j in range(i + 1, N) if rng.random() < 0.5])
    gen = build_generator(net, sis_rates(), PARAMS)
    P = propagate(gen, initial_distribution(2, N, seed=seed), [0.0, 0.5, 2.0, 10.0])
    assert np.max(np.abs(P.sum(axis=1) - 1)) < 1e-12
    assert P.min() > -1e-12


def test_pure_recovery_is_exponential():
    net = path_net(5)
    P0 = initial_distribution(2, 5, state=[1] * 5)
    t = np.array([0.0, 0.3, 1.0, 2.5])
    exp = expected_motif_counts(net, sis_rates(), P0, t, [glyph("I"), glyph("II")], {"beta": 0.0, "gamma": 1.0})
    assert np.allclose(exp[glyph("I")], 5 * np.exp(-t), atol=1e-12)
    # 4 links, two orientations each, both ends must survive
    assert np.allclose(exp[glyph("II")], 8 * np.exp(-2 * t), atol=1e-12)


def test_sparse_path_matches_dense():
    N = 13
    net = path_net(N)
    gen = build_generator(net, sis_rates(), PARAMS)
    P0 = initial_distribution(2, N, probs=[0.5, 0.5])
    P = propagate(gen, P0, [0.4])
    assert gen.dimension > 4096
    assert abs(P.sum() - 1) < 1e-10
    small = path_net(3)
    dense = propagate(build_generator(small, sis_rates(), PARAMS), initial_distribution(2, 3, probs=[0.5, 0.5]), [0.4])
    assert dense.shape == (1, 8)


def test_initial_distribution_forms():
    P = initial_distribution(2, 3, probs=[0.25, 0.75])
    assert P.sum() == pytest.approx(1.0)
    assert P[7] == pytest.approx(0.75**3)
    Q = initial_distribution(3, 2, state=[2, 1])
    assert Q[2 + 3 * 1] == 1.0


def test_unsorted_times_rejected():
    gen = build_generator(path_net(2), sis_rates(), PARAMS)
    with pytest.raises(ValidationError):
        propagate(gen, initial_distribution(2, 2, state=[1, 0]), [1.0, 0.5])


def test_spontaneous_three_species_counts():
    # S -> I at rate a, I -> R at rate b, no interactions: closed-form marginals
    rates = RateModel(3, {(0, 1): "a", (1, 2): "b"}, species=("S", "I", "R"))
    net = path_net(3)
    P0 = initial_distribution(3, 3, state=[0, 0, 0])
    t = np.array([0.0, 0.7])
    S = glyph("S")
    exp = expected_motif_counts(net, rates, P0, t, [S], {"a": 0.5, "b": 1.0})
    assert np.allclose(exp[S], 3 * np.exp(-0.5 * t), atol=1e-12)
