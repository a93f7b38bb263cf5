"""Unclosed moment hierarchy, conservation relations and variable elimination."""

from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from itertools import product
from numbers import Number

import numpy as np

from .config import ValidationError, check_order
from .graph_core import SmallGraph, canonical_form
from .motif_algebra import (
    Motif,
    c_degree,
    delete_node,
    enumerate_motifs,
    labelling_orbits,
    relabel,
)

ONE = "1"


class LinComb:
    """Linear combination of named rate parameters with exact rational weights."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for name, w in (terms or {}).items():
            w = Fraction(w)
            if w:
                clean[name] = clean.get(name, 0) + w
        self.terms = tuple(sorted((k, v) for k, v in clean.items() if v))

    @classmethod
    def of(cls, value):
        if isinstance(value, LinComb):
            return value
        if isinstance(value, str):
            return cls({value: 1})
        if isinstance(value, Number):
            return cls({ONE: Fraction(value)})
        raise TypeError(f"cannot make a rate from {value!r}")

    def __add__(self, other):
        other = LinComb.of(other)
        d = dict(self.terms)
        for k, v in other.terms:
            d[k] = d.get(k, 0) + v
        return LinComb(d)

    __radd__ = __add__

    def __neg__(self):
        return LinComb({k: -v for k, v in self.terms})

    def __sub__(self, other):
        return self + (-LinComb.of(other))

    def __mul__(self, scalar):
        scalar = Fraction(scalar)
        return LinComb({k: v * scalar for k, v in self.terms})

    __rmul__ = __mul__

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, (Number, str)):
            other = LinComb.of(other)
        return isinstance(other, LinComb) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def evaluate(self, params):
        total = 0.0
        for k, v in self.terms:
            if k == ONE:
                total += float(v)
            else:
                if k not in params:
                    raise ValidationError(f"missing value for rate parameter {k!r}")
                total += float(v) * float(params[k])
        return total

    @property
    def names(self):
        return [k for k, _ in self.terms if k != ONE]

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k, v in self.terms:
            mag = abs(v)
            if k == ONE:
                body = str(mag)
            elif mag == 1:
                body = k
            else:
                body = f"{mag}*{k}"
            parts.append(("-" if v < 0 else "+", body))
        text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self):
        return f"LinComb({self})"


ZERO = LinComb()


class RateModel:
    """Species count n, spontaneous rates R0[a][b] and pairwise rates R1[a][b][c].

    Entries may be numbers or parameter names; R1[a][b][c] is the rate of an
    a -> b conversion per c-neighbour.
    """

    def __init__(self, n, R0=None, R1=None, species=None):
        self.n = int(n)
        if self.n < 1:
            raise ValidationError("need at least one species")
        self.species = tuple(species) if species else tuple("ABCDEFGH"[: self.n]) if self.n <= 8 else tuple(map(str, range(self.n)))
        if len(self.species) != self.n:
            raise ValidationError("species names must match n")
        self.R0 = {}
        self.R1 = {}
        for key, val in _entries(R0, 2):
            self._set(self.R0, key, val)
        for key, val in _entries(R1, 3):
            self._set(self.R1, key, val)

    def _set(self, table, key, val):
        if any(not 0 <= i < self.n for i in key):
            raise ValidationError(f"rate index {key} out of range")
        rate = LinComb.of(val)
        if not rate:
            return
        if key[0] == key[1]:
            raise ValidationError(f"self-conversion rate at {key} must be zero")
        if any(w < 0 for _, w in rate.terms):
            raise ValidationError(f"negative rate at {key}")
        table[key] = table.get(key, ZERO) + rate

    def r0(self, a, b):
        return self.R0.get((a, b), ZERO)

    def r1(self, a, b, c):
        return self.R1.get((a, b, c), ZERO)

    @property
    def parameters(self):
        names = set()
        for v in list(self.R0.values()) + list(self.R1.values()):
            names.update(v.names)
        return sorted(names)

    def numeric(self, params=None):
        params = params or {}
        r0 = np.zeros((self.n, self.n))
        r1 = np.zeros((self.n, self.n, self.n))
        for k, v in self.R0.items():
            r0[k] = v.evaluate(params)
        for k, v in self.R1.items():
            r1[k] = v.evaluate(params)
        return r0, r1

    def to_dict(self):
        return {
            "species": list(self.species),
            "R0": [[list(k), str(v)] for k, v in sorted(self.R0.items())],
            "R1": [[list(k), str(v)] for k, v in sorted(self.R1.items())],
        }

    @classmethod
    def from_dict(cls, data):
        species = data["species"]
        n = len(species)

        def parse(entries, dim):
            if isinstance(entries, list) and entries and isinstance(entries[0], list) and len(entries[0]) == 2 and isinstance(entries[0][0], list):
                return {tuple(k): _parse_rate(v) for k, v in entries}
            return {k: _parse_rate(v) if isinstance(v, str) else v for k, v in _entries(entries, dim)}

        return cls(n, parse(data.get("R0", []), 2), parse(data.get("R1", []), 3), species)


def _parse_rate(text):
    if not isinstance(text, str):
        return text
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        pass
    total = ZERO
    for chunk in text.replace("- ", "+ -").split("+"):
        chunk = chunk.strip()
        if not chunk:
            continue
        sign = -1 if chunk.startswith("-") else 1
        chunk = chunk.lstrip("-").strip()
        if "*" in chunk:
            w, name = chunk.split("*", 1)
            total = total + LinComb({name.strip(): sign * Fraction(w)})
        else:
            try:
                total = total + LinComb({ONE: sign * Fraction(chunk)})
            except ValueError:
                total = total + LinComb({chunk: sign})
    return total


def _entries(table, dim):
    if table is None:
        return []
    if isinstance(table, dict):
        return [(tuple(k), v) for k, v in table.items()]
    arr = table
    out = []
    for idx in product(range(len(arr)), repeat=dim):
        val = arr
        for i in idx:
            val = val[i]
        if isinstance(val, str) or val:
            out.append((idx, val))
    return out


def sis_rates(beta="beta", gamma="gamma"):
    """SIS: I -> S at rate gamma, S -> I at rate beta per infected neighbour."""
    return RateModel(2, {(1, 0): gamma}, {(0, 1, 1): beta}, species=("S", "I"))


# ------------------------------------------------------------------- rows


@lru_cache(maxsize=None)
def _raw_extensions(adj, labels, p, c):
    m = len(adj)
    others = [v for v in range(m) if v != p]
    out = defaultdict(int)
    for bits in range(1 << len(others)):
        rows = list(adj) + [1 << p]
        for t, v in enumerate(others):
            if bits >> t & 1:
                rows[m] |= 1 << v
        for v in range(m):
            if rows[m] >> v & 1:
                rows[v] |= 1 << m
        cf = canonical_form(SmallGraph(m + 1, tuple(rows)), labels + (c,))
        out[Motif(cf.graph, cf.labels)] += 1
    return tuple(out.items())


@lru_cache(maxsize=None)
def graph_class(motif):
    """Unlabelled canonical adjacency of a motif's graph."""
    return canonical_form(motif.graph).graph.adj


def _allowed(motif, classes):
    return classes is None or graph_class(motif) in classes


def derive_equation(motif, rates, graph_classes=None):
    """Exact population-level RHS of d[x]/dt as {motif class: rate combination}."""
    check_order(motif.order + 1)
    classes = _class_set(graph_classes)
    row = defaultdict(lambda: ZERO)
    x = motif.labels
    adj = motif.graph.adj
    n = rates.n
    kappa = [[c_degree(motif, p, c) for c in range(n)] for p in range(motif.order)]
    for p in range(motif.order):
        a = x[p]
        for k in range(n):
            if k == a:
                continue
            y_labels = x[:p] + (k,) + x[p + 1 :]
            y = relabel(motif, p, k)
            rate_in = rates.r0(k, a)
            rate_out = rates.r0(a, k)
            for c in range(n):
                if kappa[p][c]:
                    rate_in = rate_in + rates.r1(k, a, c) * kappa[p][c]
                    rate_out = rate_out + rates.r1(a, k, c) * kappa[p][c]
            if rate_in:
                row[y] = row[y] + rate_in
            if rate_out:
                row[motif] = row[motif] - rate_out
            for c in range(n):
                r_in = rates.r1(k, a, c)
                if r_in:
                    for z, mult in _raw_extensions(adj, y_labels, p, c):
                        if _allowed(z, classes):
                            row[z] = row[z] + r_in * mult
                r_out = rates.r1(a, k, c)
                if r_out:
                    for z, mult in _raw_extensions(adj, x, p, c):
                        if _allowed(z, classes):
                            row[z] = row[z] - r_out * mult
    return {m: v for m, v in row.items() if v}


def _class_set(graph_classes):
    if graph_classes is None:
        return None
    if isinstance(graph_classes, frozenset):
        return graph_classes
    return frozenset(canonical_form(g).graph.adj for g in graph_classes)


# ------------------------------------------------------------------ system


@dataclass(frozen=True)
class Relation:
    coeffs: tuple  # ((Motif, Fraction), ...)
    rhs: Fraction = Fraction(0)
    kind: str = "sum"

    def as_dict(self):
        return dict(self.coeffs)

    def describe(self, species="SI"):
        lhs = " + ".join(f"{'' if c == 1 else str(c) + '*'}[{m.name(species)}]" for m, c in self.coeffs)
        return f"{lhs} = {self.rhs}"


@dataclass(frozen=True)
class Elimination:
    eliminated: tuple  # motifs in pivot order
    E: dict  # eliminated motif -> {free motif: Fraction}
    c: dict  # eliminated motif -> Fraction
    unrecoverable: tuple = ()

    def expand(self, motif):
        """Expression of any motif as ({free motif: weight}, constant)."""
        if motif in self.E:
            return self.E[motif], self.c[motif]
        return {motif: Fraction(1)}, Fraction(0)


@dataclass
class MomentSystem:
    k: int
    rates: RateModel
    variables: tuple
    boundary: tuple
    rows: dict
    all_variables: tuple
    all_rows: dict
    graph_classes: object = None
    pruned: tuple = ()
    constants: dict = field(default_factory=dict)
    relations: tuple = ()
    elimination: Elimination = None

    @property
    def species(self):
        return self.rates.species

    def order_of(self, motif):
        return motif.order

    def check_block_structure(self):
        for r, row in self.rows.items():
            for col in row:
                if col.order not in (r.order, r.order + 1):
                    raise AssertionError(f"row {r} couples to order {col.order}")
        return True

    def columns(self):
        return list(self.variables) + list(self.boundary)

    def matrix(self, params):
        cols = self.columns()
        idx = {m: j for j, m in enumerate(cols)}
        Q = np.zeros((len(self.variables), len(cols)))
        for i, r in enumerate(self.variables):
            for col, coef in self.rows[r].items():
                Q[i, idx[col]] += coef.evaluate(params)
        c = np.array([self.constants.get(r, ZERO).evaluate(params) for r in self.variables])
        return Q, c

    def rhs(self, values, params):
        """Evaluate the (unclosed) RHS given a mapping motif -> raw count."""
        out = {}
        for r in self.variables:
            total = self.constants.get(r, ZERO).evaluate(params)
            for col, coef in self.rows[r].items():
                total += coef.evaluate(params) * values[col]
            out[r] = total
        return out

    def format(self):
        sp = self.species
        lines = []
        for r in self.variables:
            terms = [f"({coef})[{col.name(sp)}]" for col, coef in sorted(self.rows[r].items())]
            const = self.constants.get(r)
            if const:
                terms.append(f"({const})")
            lines.append(f"d[{r.name(sp)}]/dt = " + (" + ".join(terms) if terms else "0"))
        return "\n".join(lines)


def build_hierarchy(k, rates, graph_classes=None, prune=True, background=0):
    """Truncated hierarchy for orders 1..k with boundary columns at order k+1."""
    if k < 1:
        raise ValidationError("order k must be >= 1")
    check_order(k + 1)
    classes = _class_set(graph_classes)
    restrict = None if graph_classes is None else [SmallGraph(len(a), a) for a in classes]
    variables = []
    for m in range(1, k + 1):
        variables.extend(enumerate_motifs(m, rates.n, restrict))
    rows = {x: derive_equation(x, rates, classes) for x in variables}
    boundary = sorted({col for row in rows.values() for col in row if col.order == k + 1})
    system = MomentSystem(
        k=k,
        rates=rates,
        variables=tuple(variables),
        boundary=tuple(boundary),
        rows=dict(rows),
        all_variables=tuple(variables),
        all_rows=dict(rows),
        graph_classes=classes,
    )
    system.check_block_structure()
    return prune_irrelevant(system, background) if prune else system


def prune_irrelevant(system, background=0):
    """Keep variables reachable from order-1 seeds through RHS dependencies.

    Seeds are order-1 variables with a nonzero row other than the background
    species, whose count follows from the species sum relation.
    """
    seeds = [x for x in system.all_variables if x.order == 1 and x.labels[0] != background and system.all_rows.get(x)]
    keep = set()
    stack = list(seeds)
    while stack:
        x = stack.pop()
        if x in keep:
            continue
        keep.add(x)
        for col in system.all_rows.get(x, {}):
            if col.order <= system.k and col not in keep:
                stack.append(col)
    variables = tuple(x for x in system.variables if x in keep)
    rows = {x: system.rows[x] for x in variables}
    boundary = tuple(sorted({col for row in rows.values() for col in row if col.order == system.k + 1}))
    pruned = tuple(x for x in system.all_variables if x not in keep)
    return replace(system, variables=variables, rows=rows, boundary=boundary, pruned=pruned)


# --------------------------------------------------------------- relations


def conservation_relations(k, n, census, graph_classes=None, degree_homogeneous=False):
    """Sum-over-labellings relations per graph class; stub relations when homogeneous."""
    classes = _class_set(graph_classes)
    relations = []
    for m in range(1, k + 1):
        for g in census.classes(m, nonzero=True):
            if classes is not None and g.adj not in classes:
                continue
            orbits = labelling_orbits(g, n)
            coeffs = tuple(sorted(((x, Fraction(c)) for x, c in orbits.items()), key=lambda t: t[0].key))
            relations.append(Relation(coeffs, Fraction(census[g]), "sum"))
    if not degree_homogeneous:
        return relations
    seen = set()
    for m in range(2, k + 1):
        for g in census.classes(m, nonzero=True):
            if classes is not None and g.adj not in classes:
                continue
            for x in labelling_orbits(g, n):
                for p in range(m):
                    if x.graph.degree(p) != 1:
                        continue
                    rest = delete_node(x, p)
                    if rest is None:
                        continue
                    sub = canonical_form(x.graph.induced([v for v in range(m) if v != p])).graph
                    denom = census[sub]
                    if denom == 0:
                        continue
                    ratio = Fraction(census[g]) / Fraction(denom)
                    d = defaultdict(Fraction)
                    for s in range(n):
                        d[relabel(x, p, s)] += 1
                    d[rest] -= ratio
                    coeffs = tuple(sorted(((mm, c) for mm, c in d.items() if c), key=lambda t: t[0].key))
                    key = frozenset(coeffs)
                    if key in seen:
                        continue
                    seen.add(key)
                    relations.append(Relation(coeffs, Fraction(0), "stub"))
    return relations


def _preference(motif, pruned, n):
    top = n - 1
    return (
        motif in pruned,
        sum(1 for x in motif.labels if x == top),
        sum(motif.labels),
        motif.order,
    )


def relation_rank(relations, variables):
    """Rank of the relation coefficient matrix (exact arithmetic)."""
    cols = {m: j for j, m in enumerate(variables)}
    rows = []
    for rel in relations:
        r = {}
        for m, c in rel.coeffs:
            if m in cols:
                r[cols[m]] = Fraction(c)
        rows.append(r)
    rank = 0
    used = [False] * len(rows)
    for j in range(len(variables)):
        piv = next((i for i, r in enumerate(rows) if not used[i] and r.get(j)), None)
        if piv is None:
            continue
        used[piv] = True
        rank += 1
        pr = rows[piv]
        for i, r in enumerate(rows):
            if i != piv and r.get(j):
                f = r[j] / pr[j]
                for jj, v in pr.items():
                    r[jj] = r.get(jj, 0) - f * v
                    if not r[jj]:
                        del r[jj]
    return rank


def eliminate(system, relations, targets=None):
    """Substitute eliminated variables via conservation relations.

    Pruned variables are always eliminated first.  With explicit `targets`
    only those (plus pruned ones) become pivots; otherwise the preference is
    the most high-index-species labels, then higher order.
    """
    relations = list(relations)
    if targets is not None and len(targets) == 0 and not system.pruned:
        return replace(system, relations=tuple(relations), elimination=Elimination((), {}, {}))
    pruned = set(system.pruned)
    allv = list(system.all_variables)
    index = {m: j for j, m in enumerate(allv)}
    rows = []
    for rel in relations:
        r = {m: Fraction(c) for m, c in rel.coeffs if m in index}
        extra = [m for m, _ in rel.coeffs if m not in index]
        if extra:
            continue
        rows.append([r, Fraction(rel.rhs)])
    if targets is None:
        cand = sorted(allv, key=lambda m: _preference(m, pruned, system.rates.n), reverse=True)
    else:
        targets = list(targets)
        missing = [t for t in targets if t not in index]
        if missing:
            raise ValidationError(f"targets not in system: {missing}")
        cand = sorted(pruned, key=lambda m: _preference(m, pruned, system.rates.n), reverse=True) + [
            t for t in targets if t not in pruned
        ]
    pivots = {}
    used = [False] * len(rows)
    for v in cand:
        piv = next((i for i, (r, _) in enumerate(rows) if not used[i] and r.get(v)), None)
        if piv is None:
            if targets is not None and v not in pruned:
                raise ValidationError(f"target {v} cannot be eliminated: relations are dependent")
            continue
        used[piv] = True
        r, b = rows[piv]
        f = r[v]
        r = {m: c / f for m, c in r.items()}
        b = b / f
        rows[piv] = [r, b]
        for i, (s, sb) in enumerate(rows):
            if i != piv and s.get(v):
                g = s[v]
                for m, c in r.items():
                    s[m] = s.get(m, 0) - g * c
                    if not s[m]:
                        del s[m]
                rows[i][1] = sb - g * b
        pivots[v] = piv
    for r, b in rows:
        if not r and b:
            raise ValidationError("conservation relations are inconsistent")
    E, c = {}, {}
    for v, piv in pivots.items():
        r, b = rows[piv]
        E[v] = {m: -w for m, w in r.items() if m != v}
        c[v] = b
    free_pruned = tuple(m for m in system.pruned if m not in pivots)
    elim = Elimination(tuple(v for v in cand if v in pivots), E, c, free_pruned)
    new_vars = tuple(x for x in system.variables if x not in pivots)
    new_rows, consts = {}, {}
    for x in new_vars:
        row = defaultdict(lambda: ZERO)
        const = ZERO
        for col, coef in system.rows[x].items():
            if col in pivots:
                for f, w in E[col].items():
                    row[f] = row[f] + coef * w
                if c[col]:
                    const = const + coef * c[col]
            else:
                row[col] = row[col] + coef
        row = {m: v for m, v in row.items() if v}
        bad = [m for m in row if m in free_pruned]
        if bad:
            raise ValidationError(f"pruned variables {bad} could not be eliminated; build without pruning")
        new_rows[x] = row
        if const:
            consts[x] = const
    boundary = tuple(sorted({col for row in new_rows.values() for col in row if col.order == system.k + 1}))
    return replace(
        system,
        variables=new_vars,
        rows=new_rows,
        boundary=boundary,
        constants=consts,
        relations=tuple(relations),
        elimination=elim,
    )


def equation_count(k, n, census, graph_classes=None, degree_homogeneous=True):
    """Number of independent moment equations after conservation relations."""
    classes = _class_set(graph_classes)
    restrict = None if classes is None else [SmallGraph(len(a), a) for a in classes]
    variables = [x for m in range(1, k + 1) for x in enumerate_motifs(m, n, restrict)]
    rels = conservation_relations(k, n, census, classes, degree_homogeneous)
    return len(variables) - relation_rank(rels, variables)
