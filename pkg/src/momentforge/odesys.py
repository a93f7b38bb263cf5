"""Closed mean-field systems: evaluation, integration, steady states and scans."""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp

from .config import DENOMINATOR_GUARD, ValidationError
from .derivation import ZERO
from .graph_core import canonical_form


def _census_of(census, motif):
    return Fraction(census[canonical_form(motif.graph).graph])


class ClosedSystem:
    """du/dt = A u + B f(u) + c in normalised counts u = [x]/[a].

    `A`, `B`, `c` depend on the rate parameters; f collects the closure values
    of the boundary motifs, each the mean over its alternative formulas.
    """

    def __init__(self, variables, all_variables, boundary, rows, constants, closures, census_values, expansion, species, parameters, k):
        self.variables = tuple(variables)
        self.all_variables = tuple(all_variables)
        self.boundary = tuple(boundary)
        self.rows = rows
        self.constants = constants
        self.closures = closures
        self.census_values = census_values
        self.species = tuple(species)
        self.parameters = tuple(parameters)
        self.k = k
        self._exp_E, self._exp_c = expansion
        self._cache = {}
        self._compile()

    # ------------------------------------------------------------ assembly

    @classmethod
    def from_moment_system(cls, system, census, closures):
        variables = system.variables
        all_vars = list(system.all_variables)
        if system.elimination is not None:
            free_missing = [m for m in all_vars if m not in system.elimination.E and m not in variables]
        else:
            free_missing = [m for m in all_vars if m not in variables]
        sizes = {}
        for m in list(all_vars) + list(system.boundary):
            sizes[m] = _census_of(census, m)
        idx = {m: j for j, m in enumerate(variables)}
        E = np.zeros((len(all_vars), len(variables)))
        c = np.zeros(len(all_vars))
        available = np.ones(len(all_vars), bool)
        for i, m in enumerate(all_vars):
            if m in idx:
                E[i, idx[m]] = 1.0
                continue
            if system.elimination is not None and m in system.elimination.E:
                if sizes[m] == 0:
                    available[i] = False
                    continue
                for f, w in system.elimination.E[m].items():
                    E[i, idx[f]] = float(w * sizes[f] / sizes[m])
                c[i] = float(system.elimination.c[m] / sizes[m])
            else:
                available[i] = False
        bnd = [b for b in system.boundary if b in closures]
        pos = {m: i for i, m in enumerate(all_vars)}
        for b in bnd:
            for f in closures[b]:
                for fac in list(f.numerator) + list(f.denominator) + [g for g, _ in f.gamma_factors()]:
                    if fac not in pos or not available[pos[fac]]:
                        raise ValidationError(
                            f"closure factor {fac.name(system.species)} is not recoverable; unrecoverable: "
                            f"{[m.name(system.species) for m in free_missing]}"
                        )
        for m in variables:
            if sizes[m] == 0:
                raise ValidationError(f"census count for variable {m.name(system.species)} is zero")
        obj = cls(
            variables=variables,
            all_variables=all_vars,
            boundary=bnd,
            rows={r: dict(system.rows[r]) for r in variables},
            constants=dict(system.constants),
            closures={b: list(closures[b]) for b in bnd},
            census_values=sizes,
            expansion=(E, c),
            species=system.species,
            parameters=system.rates.parameters,
            k=system.k,
        )
        obj.source = system
        obj.census = census
        return obj

    def _compile(self):
        pos = {m: i for i, m in enumerate(self.all_variables)}
        one = len(self.all_variables)  # index of a constant 1.0 slot
        alts, owner = [], []
        for bi, b in enumerate(self.boundary):
            for f in self.closures[b]:
                num = [pos[x] for x in f.numerator]
                den = [pos[x] for x in f.denominator]
                for g, e in f.gamma_factors():
                    (num if e > 0 else den).extend([pos[g]] * abs(e))
                alts.append((num, den))
                owner.append(bi)
        width_n = max([len(a[0]) for a in alts] + [1])
        width_d = max([len(a[1]) for a in alts] + [1])
        self._num = np.full((len(alts), width_n), one, dtype=np.int64)
        self._den = np.full((len(alts), width_d), one, dtype=np.int64)
        for t, (num, den) in enumerate(alts):
            self._num[t, : len(num)] = num
            self._den[t, : len(den)] = den
        avg = np.zeros((len(self.boundary), len(alts)))
        for t, bi in enumerate(owner):
            avg[bi, t] = 1.0
        counts = avg.sum(axis=1, keepdims=True)
        self._avg = np.divide(avg, counts, out=np.zeros_like(avg), where=counts > 0)

    # ---------------------------------------------------------- evaluation

    def _key(self, params):
        return tuple(float(params[p]) for p in self.parameters)

    def matrices(self, params):
        missing = [p for p in self.parameters if p not in params]
        if missing:
            raise ValidationError(f"missing parameter values: {missing}")
        key = self._key(params)
        if key not in self._cache:
            sv = {m: float(v) for m, v in self.census_values.items()}
            vi = {m: i for i, m in enumerate(self.variables)}
            bi = {m: i for i, m in enumerate(self.boundary)}
            A = np.zeros((len(self.variables), len(self.variables)))
            B = np.zeros((len(self.variables), len(self.boundary)))
            c = np.zeros(len(self.variables))
            for i, r in enumerate(self.variables):
                for col, coef in self.rows[r].items():
                    val = coef.evaluate(params) * sv[col] / sv[r]
                    if col in vi:
                        A[i, vi[col]] += val
                    elif col in bi:
                        B[i, bi[col]] += val
                c[i] = self.constants.get(r, ZERO).evaluate(params) / sv[r]
            self._cache[key] = (A, B, c)
        return self._cache[key]

    def expand(self, u):
        """Normalised values of every motif of order <= k."""
        return self._exp_E @ np.asarray(u, float) + self._exp_c

    def boundary_values(self, u_all):
        ext = np.append(u_all, 1.0)
        if not len(self._num):
            return np.zeros(len(self.boundary))
        den = ext[self._den]
        bad = (den < DENOMINATOR_GUARD).any(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.prod(ext[self._num], axis=1) / np.prod(np.where(bad[:, None], 1.0, den), axis=1)
        vals = np.where(bad, 0.0, vals)
        return self._avg @ vals

    def rhs(self, u, params):
        A, B, c = self.matrices(params)
        u = np.asarray(u, float)
        out = A @ u + c
        if B.size:
            out = out + B @ self.boundary_values(self.expand(u))
        return out

    def full_state(self, u):
        u_all = self.expand(u)
        out = dict(zip(self.all_variables, u_all))
        out.update(zip(self.boundary, self.boundary_values(u_all)))
        return out

    def value(self, u, motif):
        state = self.full_state(u)
        if motif in state:
            return float(state[motif])
        raise KeyError(f"{motif} not available in this closed system")

    def jacobian(self, u, params, h=1e-7, centered=True):
        u = np.asarray(u, float)
        n = len(u)
        J = np.zeros((n, n))
        f0 = None if centered else self.rhs(u, params)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            if centered:
                J[:, j] = (self.rhs(u + e, params) - self.rhs(u - e, params)) / (2 * h)
            else:
                J[:, j] = (self.rhs(u + e, params) - f0) / h
        return J

    def index(self, motif):
        return self.variables.index(motif)


# ------------------------------------------------------------- integration


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    left_unit_box: bool
    event_time: float = None


def integrate(system, u0, params, t_end, rtol=1e-8, atol=1e-10, n_points=201):
    """Adaptive RK45; stops (flagged) if the state leaves [0, 1], never clips."""
    if rtol <= 0 or atol <= 0:
        raise ValidationError("tolerances must be positive")
    slack = 1e-9
    u0 = np.asarray(u0, float)
    if np.any(u0 < -slack) or np.any(u0 > 1 + slack):
        raise ValidationError("initial state must lie in [0, 1]")

    def low(t, y):
        return float(np.min(y)) + slack

    def high(t, y):
        return 1.0 + slack - float(np.max(y))

    low.terminal = high.terminal = True
    low.direction = high.direction = -1
    t_eval = np.linspace(0.0, t_end, n_points)
    sol = solve_ivp(lambda t, y: system.rhs(y, params), (0.0, t_end), np.asarray(u0, float), method="RK45", rtol=rtol, atol=atol, t_eval=t_eval, events=(low, high))
    if sol.status == -1:
        raise RuntimeError(f"integration failed: {sol.message}")
    left = sol.status == 1
    ev = None
    if left:
        ev = float(min(x[0] for x in sol.t_events if len(x)))
    return Trajectory(sol.t, sol.y.T, left, ev)


# ------------------------------------------------------------ steady states


@dataclass
class FixedPoint:
    state: np.ndarray
    stable: bool
    eigenvalues: np.ndarray
    residual: float
    admissible: bool

    @property
    def trivial(self):
        return bool(np.all(np.abs(self.state) < 1e-9))


def newton(system, u0, params, tol=1e-13, max_iter=100, h=1e-7):
    u = np.asarray(u0, float).copy()
    f = system.rhs(u, params)
    for _ in range(max_iter):
        norm = np.max(np.abs(f))
        if norm < tol:
            return u, norm
        J = system.jacobian(u, params, h)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            trial = u + lam * step
            ft = system.rhs(trial, params)
            if np.all(np.isfinite(ft)) and np.max(np.abs(ft)) < norm * (1 - 1e-4 * lam) + 1e-300:
                break
            lam /= 2
        else:
            if np.max(np.abs(step)) < 1e-14:
                return u, norm
            return None, norm
        u, f = trial, ft
        if np.max(np.abs(lam * step)) < 1e-15:
            break
    norm = np.max(np.abs(f))
    return (u, norm) if norm < 1e-10 else (None, norm)


def independence_seed(system, p, background=0):
    """Lift a species distribution into motif space assuming independence."""
    n = len(system.species)
    pi = [p / (n - 1) if s != background else 1 - p for s in range(n)] if n > 1 else [1.0]
    return np.array([math.prod(pi[x] for x in m.labels) for m in system.variables])


def default_seeds(system, params, kappa=None):
    seeds = [np.zeros(len(system.variables))]
    ps = [0.05, 0.25, 0.5, 0.75, 0.95]
    if kappa and "beta" in params and "gamma" in params:
        p = 1 - params["gamma"] / (kappa * params["beta"])
        if 0 < p < 1:
            ps.insert(0, p)
    seeds += [independence_seed(system, p) for p in ps]
    v = len(system.variables)
    if v <= 3:
        for bits in range(1, 1 << v):
            seeds.append(np.array([(bits >> i) & 1 for i in range(v)], float))
    return seeds


def steady_states(system, params, seeds=None, kappa=None, dedup=1e-8):
    seeds = default_seeds(system, params, kappa) if seeds is None else seeds
    found = []
    dropped = 0
    for s in seeds:
        u, res = newton(system, s, params)
        if u is None or not np.all(np.isfinite(u)):
            dropped += 1
            continue
        if any(np.max(np.abs(u - f.state)) < dedup for f in found):
            continue
        J = system.jacobian(u, params)
        eig = np.linalg.eigvals(J)
        u_all = system.expand(u)
        admissible = bool(np.all(u_all > -1e-9) and np.all(u_all < 1 + 1e-9))
        found.append(FixedPoint(u, bool(np.max(eig.real) < 0), eig, float(res), admissible))
    found.sort(key=lambda f: tuple(f.state))
    steady_states.last_dropped = dropped
    return found


def leading_eigenvalue_trivial(system, params, h=1e-9):
    u0 = np.zeros(len(system.variables))
    J = system.jacobian(u0, params, h=h, centered=False)
    return float(np.max(np.linalg.eigvals(J).real))


def _ratio_params(params, ratio):
    p = dict(params)
    p["beta"] = ratio * p.get("gamma", 1.0)
    return p


def locate_threshold(system, params, lo, hi, tol=1e-11):
    f_lo = leading_eigenvalue_trivial(system, _ratio_params(params, lo))
    f_hi = leading_eigenvalue_trivial(system, _ratio_params(params, hi))
    if f_lo * f_hi > 0:
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = leading_eigenvalue_trivial(system, _ratio_params(params, mid))
        if (f_mid > 0) == (f_hi > 0):
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


@dataclass
class BranchRow:
    beta_over_gamma: float
    branch_id: int
    stable: bool
    state: np.ndarray
    C_II: float
    C_SI: float


def bifurcation_scan(system, params, ratio_range, steps, kappa=None, infected=1):
    """Steady states over a beta/gamma grid plus the located epidemic threshold."""
    lo, hi = ratio_range
    if lo <= 0 or hi <= lo:
        raise ValidationError("ratio range must be positive and increasing")
    grid = np.linspace(lo, hi, steps)
    rows = []
    has_branch = []
    for r in grid:
        p = _ratio_params(params, r)
        pts = [f for f in steady_states(system, p, kappa=kappa) if f.admissible]
        nontrivial = [f for f in pts if not f.trivial]
        has_branch.append(any(f.stable for f in nontrivial))
        for bid, f in enumerate(sorted(pts, key=lambda f: f.trivial, reverse=True)):
            cii, csi = _pair_corr(system, f.state, infected)
            rows.append(BranchRow(float(r), 0 if f.trivial else bid, f.stable, f.state, cii, csi))
    threshold = None
    for i in range(1, len(grid)):
        if has_branch[i] != has_branch[i - 1]:
            threshold = locate_threshold(system, params, grid[i - 1], grid[i])
            break
    if threshold is None:
        # fall back on the trivial state's eigenvalue sign change
        ev = [leading_eigenvalue_trivial(system, _ratio_params(params, r)) for r in grid]
        for i in range(1, len(grid)):
            if (ev[i] > 0) != (ev[i - 1] > 0):
                threshold = locate_threshold(system, params, grid[i - 1], grid[i])
                break
    return rows, threshold


def _pair_corr(system, u, infected=1, background=0):
    C = pair_correlations(system, u)
    return float(C[infected, infected]), float(C[background, infected])


def correlation(state, a, b):
    """C_ab = [[ab]] / ([[a]] [[b]]); `state` maps ('a',), ('a','b') keys to normalised counts."""
    pa, pb = state[(a,)], state[(b,)]
    if pa <= 0 or pb <= 0:
        raise ValidationError(f"correlation undefined: zero marginal for {a if pa <= 0 else b}")
    key = (a, b) if (a, b) in state else (b, a)
    return state[key] / (pa * pb)


def pair_correlations(system, u, species=None):
    """Matrix C[a][b] from a closed-system state (pairs from variables or closures)."""
    st = system.full_state(u)
    n = len(system.species)
    single = np.full(n, np.nan)
    pair = np.full((n, n), np.nan)
    for m, v in st.items():
        if m.order == 1:
            single[m.labels[0]] = v
        elif m.order == 2:
            a, b = m.labels
            pair[a, b] = pair[b, a] = v
    if system.k == 1:
        # first order closes every pair as a product of marginals
        pair = np.where(np.isfinite(pair), pair, np.outer(single, single))
    C = np.full((n, n), np.nan)
    for a in range(n):
        for b in range(n):
            if single[a] > 0 and single[b] > 0 and np.isfinite(pair[a, b]):
                C[a, b] = pair[a, b] / (single[a] * single[b])
    return C


def mf_distance_correlation(single, pair, a, b, D):
    """Distance-D correlation under repeated pair factorisation of a (D+1)-chain.

    single: vector of [[s]]; pair: matrix of [[st]] (order-2 normalised, with
    [[st]] = [[ts]]).  The chain numerator sums over interior labels:
    [[a x1 ... b]] = [[a x1]] [[x1 x2]] ... [[x_{D-1} b]] / ([[x1]] ... [[x_{D-1}]]).
    """
    single = np.asarray(single, float)
    pair = np.asarray(pair, float)
    if D < 1:
        raise ValidationError("D must be >= 1")
    vec = pair[a, :].copy()  # indexed by the label of the current chain end
    for _ in range(D - 1):
        vec = (vec / single) @ pair
    return vec[b] / (single[a] * single[b])


# ---------------------------------------------------------- analytic values


def analytic_reference(model, kappa, beta, gamma=1.0):
    """Closed-form SIS steady states and correlations for MF1 and MF2.

    For MF2 on homogeneous networks, `IS_printed` is the literal closed form,
    which agrees with the general-gamma expression `IS` only for gamma = 1.
    """
    k, b, g = float(kappa), float(beta), float(gamma)
    if model == "MF1":
        return {"threshold": 1 / k, "I": 1 - g / (k * b), "C_II": 1.0, "C_SI": 1.0, "C_SS": 1.0}
    if model == "MF2-hom":
        I = 1 - (k - 1) / (k * b * (k - 1) / g - 1)
        return {
            "threshold": 1 / (k - 1),
            "I": I,
            "IS": g * (b * (k - 1) - g) / (b * (k * b * (k - 1) - g)),
            "IS_printed": (b * (k - 1) - 1) / (b * (b * k * (k - 1) - 1)),
            "C_II": (g - b * k) * (g - b * (k - 1) * k) / (b * k**2 * (b * (k - 1) - g)),
            "C_SI": 1 - g / (b * k * (k - 1)),
            "C_SS": (b * (k - 1) * k - g) / (b * (k - 1) ** 2),
        }
    if model == "MF2-het":
        root = math.sqrt(b * (k - 1) ** 2 + 4 * g)
        sb = math.sqrt(b)
        # the printed tuple carries two expressions: [[II]] then [[IS]]
        II = g * (root - sb * (k + 3)) / (2 * b**1.5 * k) + 1
        IS = (g * sb * (k + 1) - g * root) / (2 * k * b**1.5)
        return {
            "threshold": 1 / k,
            "I": k * b * IS / g,
            "II": II,
            "IS": IS,
            "C_II": (4 * b**1.5 * k - 2 * sb * g * (k + 3) + 2 * g * root) / (sb * k * (root - sb * (k + 1)) ** 2),
            "C_SI": 2 * g / (k * math.sqrt(b**2 * (k - 1) ** 2 + 4 * b * g) - b * (k - 1) * k),
            "C_SS": 2 * g / (k * math.sqrt(b**2 * (k - 1) ** 2 + 4 * b * g) - b * (k - 1) * k),
        }
    raise ValidationError(f"unknown analytic model {model!r}")
