"""Exact expectations of motif counts from the full master equation.

States are integers in base n: node i carries digit i.  The generator W acts
on probability column vectors, dP/dt = W P, so columns sum to zero.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .config import ORACLE_DENSE_STATES, ORACLE_MAX_STATES, CapacityError, ValidationError
from .motif_algebra import iter_tuples


@dataclass
class GeneratorMatrix:
    W: sparse.csc_matrix
    n_species: int
    n_nodes: int
    states: np.ndarray  # (n**N, N) digits

    @property
    def dimension(self):
        return self.W.shape[0]

    def dense(self):
        return self.W.toarray()


def state_table(n, N):
    dim = n**N
    if dim > ORACLE_MAX_STATES:
        raise CapacityError(f"{n}^{N} = {dim} states exceeds the oracle cap {ORACLE_MAX_STATES}")
    idx = np.arange(dim)
    return (idx[:, None] // n ** np.arange(N)[None, :]) % n


def _transitions(network, n, states):
    """Yield (node, target species, source index array, dest index array, neighbour-count array)."""
    N = network.N
    A = np.zeros((N, N), dtype=np.int64)
    for u, v in network.edges:
        A[u, v] = A[v, u] = 1
    onehot = (states[:, :, None] == np.arange(n)[None, None, :]).astype(np.int64)
    nbc = np.einsum("ij,sjc->sic", A, onehot)  # (states, node, species) neighbour counts
    return nbc


def build_generator(network, rates, params=None):
    """Sparse generator with single-node flips only."""
    n, N = rates.n, network.N
    states = state_table(n, N)
    r0, r1 = rates.numeric(params)
    nbc = _transitions(network, n, states)
    dim = len(states)
    src = np.arange(dim)
    rows, cols, vals = [], [], []
    out = np.zeros(dim)
    for i in range(N):
        a = states[:, i]
        for b in range(n):
            rate = r0[a, b] + np.einsum("sc,sc->s", r1[a, b, :], nbc[:, i, :])
            rate = np.where(a == b, 0.0, rate)
            dest = src + (b - a) * n**i
            keep = rate > 0
            rows.append(dest[keep])
            cols.append(src[keep])
            vals.append(rate[keep])
            out += rate
    rows.append(src)
    cols.append(src)
    vals.append(-out)
    W = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return GeneratorMatrix(W, n, N, states)


def exact_generator(network, rates, params=None):
    """Generator as {(row, col): Fraction}; parameters must be exact numbers."""
    n, N = rates.n, network.N
    states = state_table(n, N)
    nb = network.neighbors
    params = {k: Fraction(v) for k, v in (params or {}).items()}

    def ev(comb):
        return sum((w * (Fraction(1) if name == "1" else params[name]) for name, w in comb.terms), Fraction(0))

    r0 = {k: ev(v) for k, v in rates.R0.items()}
    r1 = {k: ev(v) for k, v in rates.R1.items()}
    W = {}
    for src, X in enumerate(states):
        for i in range(N):
            a = int(X[i])
            for b in range(n):
                if b == a:
                    continue
                rate = r0.get((a, b), Fraction(0)) + sum((r1.get((a, b, int(X[j])), Fraction(0)) for j in nb[i]), Fraction(0))
                if rate:
                    dest = src + (b - a) * n**i
                    W[dest, src] = W.get((dest, src), Fraction(0)) + rate
                    W[src, src] = W.get((src, src), Fraction(0)) - rate
    return W


def exact_column_sums(network, rates, params=None):
    W = exact_generator(network, rates, params)
    sums = [Fraction(0)] * (rates.n**network.N)
    for (_, col), v in W.items():
        sums[col] += v
    return sums


def initial_distribution(n, N, state=None, probs=None, seed=None):
    """Point mass on `state` (sequence of species) or product of per-node `probs`."""
    dim = n**N
    if state is not None:
        idx = int(sum(int(s) * n**i for i, s in enumerate(state)))
        P = np.zeros(dim)
        P[idx] = 1.0
        return P
    states = state_table(n, N)
    if probs is None:
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(n), size=N)
    probs = np.asarray(probs, float)
    if probs.ndim == 1:
        probs = np.tile(probs, (N, 1))
    return np.prod(probs[np.arange(N)[None, :], states], axis=1)


def propagate(gen, P0, times):
    """P(t) for each t, one row per time."""
    times = np.asarray(times, float)
    if np.any(np.diff(times) < 0):
        raise ValidationError("times must be sorted")
    P0 = np.asarray(P0, float)
    if gen.dimension <= ORACLE_DENSE_STATES:
        dense = gen.dense()
        return np.array([expm(dense * t) @ P0 for t in times])
    return np.array([expm_multiply(gen.W * t, P0) if t else P0.copy() for t in times])


def motif_count_vectors(network, motifs, states):
    """Per-state raw count [x] for each motif (tuple semantics)."""
    nb = network.neighbor_sets
    cache = {}
    out = {}
    for m in motifs:
        key = m.graph.adj
        if key not in cache:
            tup = list(iter_tuples(nb, m.graph))
            cache[key] = np.array(tup, dtype=np.int64).reshape(-1, m.order)
        tup = cache[key]
        if not len(tup):
            out[m] = np.zeros(len(states))
            continue
        lab = np.array(m.labels)
        out[m] = np.all(states[:, tup] == lab[None, None, :], axis=2).sum(axis=1).astype(float)
    return out


def expected_motif_counts(network, rates, P0, times, motifs, params=None, gen=None):
    """{motif: array over times} of exact expectations."""
    gen = gen or build_generator(network, rates, params)
    P = propagate(gen, P0, times)
    vecs = motif_count_vectors(network, motifs, gen.states)
    return {m: P @ v for m, v in vecs.items()}


def derivative_check(system, network, params, P0, times, dt=1e-4):
    """Max relative residual between the unclosed RHS and d/dt of exact expectations."""
    rates = system.rates
    gen = build_generator(network, rates, params)
    motifs = list(dict.fromkeys(list(system.variables) + list(system.boundary)))
    vecs = motif_count_vectors(network, motifs, gen.states)
    worst = 0.0
    for t in times:
        P = propagate(gen, P0, [t - dt, t, t + dt])
        values = {m: float(P[1] @ v) for m, v in vecs.items()}
        rhs = system.rhs(values, params)
        fd = {m: float((P[2] - P[0]) @ vecs[m]) / (2 * dt) for m in system.variables}
        scale = max(1.0, max(abs(v) for v in fd.values()))
        worst = max(worst, max(abs(rhs[m] - fd[m]) for m in system.variables) / scale)
    return worst
