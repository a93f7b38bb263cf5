"""Stochastic simulation of nearest-neighbour dynamics on networks.

Two engines: a Gillespie sampler for arbitrary (R0, R1) rate models and the
conserved SIS contact process, where every recovery is paired with an
infection so the number of infected nodes never changes.  Random numbers come
from a numpy Philox generator and are fed to the compiled kernels in blocks,
so a seed fixes every output bit regardless of thread count.
"""

import json
from dataclasses import asdict, dataclass, field

import numba as nb
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .config import ValidationError

_BLOCK = 1 << 16
_RUNNING, _DONE, _ABSORBED, _STUCK = 0, 1, 2, 3


def make_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


# ----------------------------------------------------------------- Fenwick


@nb.njit(cache=True)
def _fw_add(tree, i, delta):
    i += 1
    n = tree.shape[0] - 1
    while i <= n:
        tree[i] += delta
        i += i & -i


@nb.njit(cache=True)
def _fw_find(tree, target):
    """Smallest index whose prefix sum exceeds target."""
    n = tree.shape[0] - 1
    pos = 0
    mask = 1
    while mask * 2 <= n:
        mask *= 2
    while mask:
        nxt = pos + mask
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        mask >>= 1
    return pos


@nb.njit(cache=True)
def _fw_build(tree, weights):
    tree[:] = 0
    for i in range(weights.shape[0]):
        _fw_add(tree, i, weights[i])


# ---------------------------------------------------------------- Gillespie


@nb.njit(cache=True)
def _node_rate(i, state, nbc, r0, r1):
    a = state[i]
    n = r0.shape[0]
    total = 0.0
    for b in range(n):
        if b == a:
            continue
        total += r0[a, b]
        for c in range(n):
            total += r1[a, b, c] * nbc[i, c]
    return total


@nb.njit(cache=True)
def _gillespie_kernel(indptr, indices, state, nbc, rate, tree, r0, r1, species, pairs, clock, grid, rec, out_sp, out_pairs, u, upos):
    """Advance until `grid` is filled, absorption, or the uniforms run out.

    clock[0] holds the current time; rec[0] the next grid slot; upos[0] the
    next unused uniform.  Returns a status code.
    """
    n = r0.shape[0]
    N = state.shape[0]
    events = 0
    while True:
        total = tree_total(tree)
        if total <= 1e-300:
            while rec[0] < grid.shape[0]:
                out_sp[rec[0]] = species
                out_pairs[rec[0]] = pairs
                rec[0] += 1
            return 2
        if upos[0] + 3 > u.shape[0]:
            return 0
        dt = -np.log(1.0 - u[upos[0]]) / total
        t_new = clock[0] + dt
        while rec[0] < grid.shape[0] and grid[rec[0]] < t_new:
            out_sp[rec[0]] = species
            out_pairs[rec[0]] = pairs
            rec[0] += 1
        if rec[0] >= grid.shape[0]:
            upos[0] += 1
            clock[0] = grid[grid.shape[0] - 1]
            return 1
        i = _fw_find(tree, u[upos[0] + 1] * total)
        if i >= N or rate[i] <= 0:
            # rounding drift in the tree: rebuild it and redraw
            upos[0] += 2
            _fw_build(tree, rate)
            continue
        a = state[i]
        target = u[upos[0] + 2] * rate[i]
        b = -1
        acc = 0.0
        for bb in range(n):
            if bb == a:
                continue
            r = r0[a, bb]
            for c in range(n):
                r += r1[a, bb, c] * nbc[i, c]
            acc += r
            if r > 0:
                b = bb
                if acc > target:
                    break
        upos[0] += 3
        clock[0] = t_new
        state[i] = b
        species[a] -= 1
        species[b] += 1
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            sj = state[j]
            pairs[a, sj] -= 1
            pairs[b, sj] += 1
            pairs[sj, a] -= 1
            pairs[sj, b] += 1
            nbc[j, a] -= 1
            nbc[j, b] += 1
        for p in range(indptr[i], indptr[i + 1] + 1):
            j = i if p == indptr[i + 1] else indices[p]
            new = _node_rate(j, state, nbc, r0, r1)
            _fw_add(tree, j, new - rate[j])
            rate[j] = new
        events += 1
        if events % 65536 == 0:
            _fw_build(tree, rate)


@nb.njit(cache=True)
def tree_total(tree):
    n = tree.shape[0] - 1
    total = 0.0
    i = n
    while i > 0:
        total += tree[i]
        i -= i & -i
    return total


def _neighbour_counts(network, state, n):
    nbc = np.zeros((network.N, n), dtype=np.int64)
    for u, v in network.edges:
        nbc[u, state[v]] += 1
        nbc[v, state[u]] += 1
    return nbc


def pair_counts(network, state, n):
    """Tuple-semantics pair counts: P[a, b] = #ordered adjacent (i, j) with s_i=a, s_j=b."""
    P = np.zeros((n, n), dtype=np.int64)
    e = network.edges
    np.add.at(P, (state[e[:, 0]], state[e[:, 1]]), 1)
    np.add.at(P, (state[e[:, 1]], state[e[:, 0]]), 1)
    return P


@dataclass
class Trajectory:
    times: np.ndarray
    species: np.ndarray  # (T, n) raw counts [a]
    pairs: np.ndarray  # (T, n, n) raw counts [ab]
    absorbed: bool
    seed: int
    final_state: np.ndarray = field(repr=False, default=None)

    def to_csv(self, path, species_names=None):
        n = self.species.shape[1]
        names = species_names or [str(i) for i in range(n)]
        head = ["t"] + [f"[{a}]" for a in names] + [f"[{a}{b}]" for a in names for b in names]
        with open(path, "w") as fh:
            fh.write(",".join(head) + "\n")
            for t, sp, pr in zip(self.times, self.species, self.pairs):
                vals = [t] + list(sp) + list(pr.ravel())
                fh.write(",".join(f"{v:.12g}" for v in vals) + "\n")


def gillespie(network, rates, params, initial, t_end, seed=0, n_points=101, grid=None):
    """Exact CTMC sample path; species and pair counts on a uniform grid."""
    r0, r1 = rates.numeric(params)
    n = rates.n
    state = np.asarray(initial, dtype=np.int64).copy()
    if state.shape != (network.N,) or state.min() < 0 or state.max() >= n:
        raise ValidationError("initial state must give one species index per node")
    grid = np.linspace(0.0, t_end, n_points) if grid is None else np.asarray(grid, float)
    indptr, indices = network.csr
    nbc = _neighbour_counts(network, state, n)
    rate = np.array([_node_rate(i, state, nbc, r0, r1) for i in range(network.N)])
    tree = np.zeros(network.N + 1)
    _fw_build(tree, rate)
    species = np.bincount(state, minlength=n).astype(np.int64)
    pairs = pair_counts(network, state, n)
    out_sp = np.zeros((len(grid), n), dtype=np.int64)
    out_pairs = np.zeros((len(grid), n, n), dtype=np.int64)
    clock, rec, upos = np.zeros(1), np.zeros(1, np.int64), np.zeros(1, np.int64)
    rng = make_rng(seed)
    status = _RUNNING
    while status == _RUNNING:
        u = rng.random(_BLOCK)
        upos[0] = 0
        status = _gillespie_kernel(indptr, indices, state, nbc, rate, tree, r0, r1, species, pairs, clock, grid, rec, out_sp, out_pairs, u, upos)
    return Trajectory(grid, out_sp, out_pairs, status == _ABSORBED, seed, state)


def time_average(traj, start):
    """Mean species and pair counts over grid points with t >= start."""
    keep = traj.times >= start
    return traj.species[keep].mean(axis=0), traj.pairs[keep].mean(axis=0)


# ------------------------------------------------------ conserved SIS process


@nb.njit(cache=True)
def _controlled_kernel(indptr, indices, state, n_inf, tree, infected, where, counts, gamma, clock, t_stop, u, upos, acc):
    """Paired recover/infect events until clock reaches t_stop.

    counts = [IS, II] (tuple semantics); acc accumulates their time integrals.
    """
    n_i = infected.shape[0]
    undone = 0
    while True:
        if upos[0] + 3 > u.shape[0]:
            return 0
        dt = -np.log(1.0 - u[upos[0]]) / (gamma * n_i)
        if clock[0] + dt >= t_stop:
            acc[0] += (t_stop - clock[0]) * counts[0]
            acc[1] += (t_stop - clock[0]) * counts[1]
            clock[0] = t_stop
            upos[0] += 1  # memoryless: the remainder is redrawn next call
            return 1
        if counts[0] == 0:
            return 3
        acc[0] += dt * counts[0]
        acc[1] += dt * counts[1]
        clock[0] += dt
        # recovery of a uniformly chosen infected node
        k = min(int(u[upos[0] + 1] * n_i), n_i - 1)
        i = infected[k]
        state[i] = 0
        counts[1] -= 2 * n_inf[i]
        counts[0] += n_inf[i]
        _fw_add(tree, i, n_inf[i])
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            n_inf[j] -= 1
            if state[j] == 0:
                _fw_add(tree, j, -1)
                counts[0] -= 1
        # infection of a susceptible node, weighted by infected neighbours
        if counts[0] <= 0:
            # fully segregated: undo the recovery and redraw
            _reinfect(indptr, indices, state, n_inf, tree, counts, i)
            upos[0] += 3
            undone += 1
            if undone > 10000:
                return 3
            continue
        undone = 0
        j = _fw_find(tree, u[upos[0] + 2] * counts[0])
        _reinfect(indptr, indices, state, n_inf, tree, counts, j)
        infected[k] = j
        where[j] = k
        where[i] = -1
        upos[0] += 3


@nb.njit(cache=True)
def _reinfect(indptr, indices, state, n_inf, tree, counts, j):
    state[j] = 1
    _fw_add(tree, j, -n_inf[j])
    counts[0] -= n_inf[j]
    counts[1] += 2 * n_inf[j]
    for p in range(indptr[j], indptr[j + 1]):
        v = indices[p]
        n_inf[v] += 1
        if state[v] == 0:
            _fw_add(tree, v, 1)
            counts[0] += 1


@dataclass
class EffectiveRateEstimate:
    n_infected: int
    n_nodes: int
    gamma: float
    t_equilibration: float
    window: float
    mean_IS: float
    mean_II: float
    beta_eff: float
    stderr: float
    batch_beta: list
    seed: int

    @property
    def density(self):
        return self.n_infected / self.n_nodes

    @property
    def beta_over_gamma(self):
        return self.beta_eff / self.gamma

    def correlations(self, n_edges_directed):
        """C_II and C_SI from time-averaged pair counts (tuple semantics)."""
        i = self.density
        s = 1 - i
        pII = self.mean_II / n_edges_directed
        pIS = self.mean_IS / n_edges_directed
        return pII / (i * i), pIS / (i * s)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class ControlledRun:
    estimate: EffectiveRateEstimate
    C_II: float
    C_SI: float
    final_state: np.ndarray = field(repr=False)
    snapshots: list = field(repr=False, default_factory=list)


class _ControlledSIS:
    def __init__(self, network, n_infected, gamma, seed):
        N = network.N
        if not 0 < n_infected < N:
            raise ValidationError("fixed infected count must lie strictly between 0 and N")
        self.network = network
        self.gamma = float(gamma)
        self.rng = make_rng(seed)
        self.indptr, self.indices = network.csr
        chosen = self.rng.choice(N, size=n_infected, replace=False)
        self.state = np.zeros(N, dtype=np.int64)
        self.state[chosen] = 1
        self.infected = np.sort(chosen).astype(np.int64)
        self.where = np.full(N, -1, dtype=np.int64)
        self.where[self.infected] = np.arange(n_infected)
        self.n_inf = _neighbour_counts(network, self.state, 2)[:, 1].copy()
        weights = np.where(self.state == 0, self.n_inf, 0).astype(np.float64)
        self.tree = np.zeros(N + 1)
        _fw_build(self.tree, weights)
        P = pair_counts(network, self.state, 2)
        self.counts = np.array([P[1, 0], P[1, 1]], dtype=np.int64)
        self.clock = np.zeros(1)
        self.upos = np.zeros(1, np.int64)
        self.u = np.zeros(0)

    def advance(self, duration):
        """Run for `duration`; returns the time integrals of ([IS], [II])."""
        acc = np.zeros(2)
        t_stop = self.clock[0] + duration
        while True:
            if self.upos[0] + 3 > self.u.shape[0]:
                self.u = self.rng.random(_BLOCK)
                self.upos[0] = 0
            st = _controlled_kernel(self.indptr, self.indices, self.state, self.n_inf, self.tree, self.infected, self.where, self.counts, self.gamma, self.clock, t_stop, self.u, self.upos, acc)
            if st == 1:
                return acc
            if st == _STUCK:
                raise RuntimeError("controlled SIS: no infected-susceptible link left")

    def check(self):
        """Full recount of the incremental bookkeeping."""
        P = pair_counts(self.network, self.state, 2)
        nbi = _neighbour_counts(self.network, self.state, 2)[:, 1]
        return (
            int(self.state.sum()) == len(self.infected)
            and bool(np.all(self.state[self.infected] == 1))
            and bool(np.all(nbi == self.n_inf))
            and self.counts[0] == P[1, 0]
            and self.counts[1] == P[1, 1]
        )


def controlled_sis(network, n_infected, gamma=1.0, window=None, seed=0, t_equilibration=None, batches=10, max_equilibration=None, n_snapshots=0, debug=False):
    """Conserved contact process at fixed [I]; returns the effective infection rate.

    Equilibration ends when the mean [IS] over consecutive windows of length
    window/2 changes by less than 1% (unless `t_equilibration` is given).
    """
    window = float(window if window is not None else 200.0 / gamma)
    if window <= 0:
        raise ValidationError("window must be positive")
    sim = _ControlledSIS(network, int(n_infected), gamma, seed)
    half = window / 2
    if t_equilibration is None:
        limit = max_equilibration if max_equilibration is not None else 50 * window
        prev = sim.advance(half)[0] / half
        t_e = half
        while t_e < limit:
            cur = sim.advance(half)[0] / half
            t_e += half
            if abs(cur - prev) <= 0.01 * max(abs(prev), 1e-300):
                break
            prev = cur
    else:
        t_e = float(t_equilibration)
        if t_e > 0:
            sim.advance(t_e)
    width = window / batches
    IS, II = [], []
    snaps = []
    snap_every = max(batches // n_snapshots, 1) if n_snapshots else 0
    for b in range(batches):
        acc = sim.advance(width)
        IS.append(acc[0] / width)
        II.append(acc[1] / width)
        if snap_every and b % snap_every == snap_every - 1:
            snaps.append(sim.state.copy())
        if debug and not sim.check():
            raise AssertionError("controlled SIS bookkeeping drifted")
    IS, II = np.array(IS), np.array(II)
    mean_IS = float(IS.mean())
    beta = gamma * n_infected / mean_IS
    se_IS = float(IS.std(ddof=1) / np.sqrt(batches)) if batches > 1 else float("nan")
    est = EffectiveRateEstimate(
        int(n_infected), network.N, float(gamma), float(t_e), window, mean_IS, float(II.mean()),
        float(beta), float(beta * se_IS / mean_IS), list(map(float, gamma * n_infected / IS)), seed,
    )
    n_dir = 2 * len(network.edges)
    cii, csi = est.correlations(n_dir)
    if int(sim.state.sum()) != n_infected:
        raise AssertionError("infected count changed")
    return ControlledRun(est, cii, csi, sim.state.copy(), snaps)


# ------------------------------------------------------ distance correlations


def distance_matrix(network):
    A = csr_matrix((np.ones(2 * len(network.edges)), (np.r_[network.edges[:, 0], network.edges[:, 1]], np.r_[network.edges[:, 1], network.edges[:, 0]])), shape=(network.N, network.N))
    D = shortest_path(A, unweighted=True, directed=False)
    D[np.isinf(D)] = -1
    return D.astype(np.int64)


def distance_correlation(states, network, a, b, D, distances=None):
    """C^D_ab averaged over an ensemble of node-state vectors."""
    if D < 1:
        raise ValidationError("D must be >= 1")
    dist = distance_matrix(network) if distances is None else distances
    mask = dist == D
    n_pairs = int(mask.sum())
    if n_pairs == 0:
        raise ValidationError(f"no node pairs at distance {D}")
    N = network.N
    vals = []
    for s in np.atleast_2d(states):
        xa = (s == a).astype(float)
        xb = (s == b).astype(float)
        na, nb_ = xa.sum(), xb.sum()
        if na == 0 or nb_ == 0:
            raise ValidationError("zero species marginal in distance correlation")
        joint = xa @ (mask @ xb) if not isinstance(mask, np.ndarray) else float(xa @ mask.astype(float) @ xb)
        vals.append(N * N / n_pairs * joint / (na * nb_))
    return float(np.mean(vals))


def ensemble_summary(runs):
    """JSON-ready summary of controlled runs."""
    return {
        "beta_eff": [r.estimate.beta_eff for r in runs],
        "stderr": [r.estimate.stderr for r in runs],
        "density": [r.estimate.density for r in runs],
        "C_II": [r.C_II for r in runs],
        "C_SI": [r.C_SI for r in runs],
        "seeds": [r.estimate.seed for r in runs],
    }
