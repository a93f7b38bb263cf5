"""Closure formulas for boundary motifs and assembly of closed systems.

A formula approximates the normalised count of an order-(k+1) motif by a
ratio of products of normalised counts of its sub-motifs.  Factors are node
subsets of the target; disconnected subsets factorise into their connected
components.
"""

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .config import ValidationError
from .graph_core import (
    canonical_form,
    is_chordal,
    junction_from_cliques,
    maximal_cliques,
    minimal_triangulations,
    power_graph,
)
from .motif_algebra import Motif, induced_motif, motif_name

ROUTES = ("auto", "chordal", "triangulated", "adhoc", "average")


@dataclass(frozen=True)
class DecompositionPlan:
    motif: Motif
    d: int
    route: str  # "chordal" or "nonchordal"
    junction_trees: tuple = ()  # chordal route: all distinct junction trees
    triangulations: tuple = ()  # non-chordal: (triangulated graph, junction trees)
    adhoc_cliques: tuple = ()  # maximal d-cliques, used by the ad-hoc route


@dataclass(frozen=True)
class ClosureFormula:
    """Normalised closure: prod(num) / prod(den) * prod_p [[x_p]]^gamma_p."""

    target: Motif
    num_sets: tuple
    den_sets: tuple
    gamma: tuple
    route: str = "chordal"
    prefactor: Fraction = Fraction(1)

    @property
    def numerator(self):
        return tuple(_factor(self.target, s) for s in self.num_sets)

    @property
    def denominator(self):
        return tuple(_factor(self.target, s) for s in self.den_sets)

    def gamma_factors(self):
        return [(_factor(self.target, (p,)), g) for p, g in enumerate(self.gamma) if g]

    def net_exponents(self):
        """Per node position: numerator - denominator + gamma occurrences."""
        m = self.target.order
        out = list(self.gamma)
        for s in self.num_sets:
            for p in s:
                out[p] += 1
        for s in self.den_sets:
            for p in s:
                out[p] -= 1
        return out if m else []

    def class_exponents(self):
        """Net exponent per factor class after cancellation (a Counter)."""
        c = Counter()
        for f in self.numerator:
            c[f] += 1
        for f in self.denominator:
            c[f] -= 1
        for f, g in self.gamma_factors():
            c[f] += g
        return Counter({k: v for k, v in c.items() if v})

    def set_exponents(self):
        """Net exponent per node subset after cancellation."""
        c = Counter()
        for s in self.num_sets:
            c[s] += 1
        for s in self.den_sets:
            c[s] -= 1
        for p, g in enumerate(self.gamma):
            if g:
                c[(p,)] += g
        return Counter({k: v for k, v in c.items() if v})

    def mf1_reduction(self):
        """Species exponents after replacing every factor by its node product."""
        c = Counter()
        for f, e in self.class_exponents().items():
            for lab in f.labels:
                c[lab] += e
        return Counter({k: v for k, v in c.items() if v})

    def evaluate(self, values):
        """values: mapping motif -> normalised count."""
        den = [values[f] for f in self.denominator] + [values[f] ** -g for f, g in self.gamma_factors() if g < 0]
        if any(v < 1e-12 for v in den):
            return 0.0
        out = 1.0
        for f in self.numerator:
            out *= values[f]
        for f, g in self.gamma_factors():
            if g > 0:
                out *= values[f] ** g
        for v in den:
            out /= v
        return out

    def text(self, species="SI", letters=None):
        """Render with class names, or with per-position letters when given."""
        def show(s):
            if letters is not None:
                return "[[" + "".join(letters[p] for p in s) + "]]"
            return "[[" + motif_name(_factor(self.target, s), species) + "]]"

        num = [show(s) for s in self.num_sets] + [show((p,)) + (f"^{g}" if g > 1 else "") for p, g in enumerate(self.gamma) if g > 0]
        den = [show(s) for s in self.den_sets] + [show((p,)) + (f"^{-g}" if g < -1 else "") for p, g in enumerate(self.gamma) if g < 0]
        body = " ".join(num) if num else "1"
        if den:
            body += " / (" + " ".join(den) + ")"
        if self.prefactor != 1:
            body = f"{self.prefactor} * " + body
        return body


def _factor(target, nodes):
    m = induced_motif(target, nodes)
    if m is None:
        raise ValueError("closure factor must be connected")
    return m


def _split(motif, sets):
    """Replace disconnected subsets by their connected components."""
    out = []
    for s in sets:
        for comp in motif.graph.components(s):
            out.append(tuple(sorted(comp)))
    return out


def _diameter_of(motif, nodes):
    return motif.graph.induced(sorted(nodes)).diameter()


def decomposition_plan(motif, d=None):
    if motif.order < 2:
        raise ValueError("decomposition needs order >= 2")
    if d is None:
        d = max(int(motif.graph.diameter()) - 1, 0)
    pg = power_graph(motif.graph, d)
    cliques = tuple(maximal_cliques(pg))
    if is_chordal(pg):
        trees = tuple(junction_from_cliques(cliques, all_variants=True))
        return DecompositionPlan(motif, d, "chordal", junction_trees=trees, adhoc_cliques=cliques)
    tri = []
    for t in minimal_triangulations(pg):
        tri.append((t, tuple(junction_from_cliques(maximal_cliques(t), all_variants=True))))
    return DecompositionPlan(motif, d, "nonchordal", triangulations=tuple(tri), adhoc_cliques=cliques)


def gamma_exponents(num_sets, den_sets, m):
    out = [1] * m
    for s in num_sets:
        for p in s:
            out[p] -= 1
    for s in den_sets:
        for p in s:
            out[p] += 1
    return tuple(out)


def chordal_closure(plan, tree=None):
    if plan.route != "chordal":
        raise ValidationError("chordal closure needs a chordal power graph")
    tree = tree or plan.junction_trees[0]
    if not tree.is_forest:
        raise ValidationError("chordal closure needs an acyclic clique set")
    num = _split(plan.motif, tree.cliques)
    den = _split(plan.motif, tree.separators)
    return _make(plan.motif, num, den, "chordal")


def _make(motif, num, den, route, gamma=None):
    num = tuple(sorted(tuple(s) for s in num))
    den = tuple(sorted(tuple(s) for s in den))
    if gamma is None:
        gamma = gamma_exponents(num, den, motif.order)
    return ClosureFormula(motif, num, den, tuple(gamma), route)


def _sub_tree(motif, nodes, d):
    """Junction tree of a factor, in the target's node indices."""
    nodes = sorted(nodes)
    pg = power_graph(motif.graph.induced(nodes), d)
    if not is_chordal(pg):
        pg = minimal_triangulations(pg)[0]
    tree = junction_from_cliques(maximal_cliques(pg))
    remap = lambda sets: [tuple(nodes[i] for i in s) for s in sets]
    return remap(tree.cliques), remap(tree.separators)


def _expand(motif, num, den, d, depth):
    """Split disconnected factors and recurse into factors wider than d."""
    out_num, out_den = [], []
    for sets, pos, neg in ((num, out_num, out_den), (den, out_den, out_num)):
        for s in _split(motif, sets):
            if len(s) > 1 and _diameter_of(motif, s) > d and depth < motif.order:
                a, b = _expand(motif, *_sub_tree(motif, s, d), d, depth + 1)
                pos += a
                neg += b
            else:
                pos.append(s)
    return out_num, out_den


def triangulated_closures(plan):
    out = []
    for _, trees in plan.triangulations:
        for tree in trees:
            num, den = _expand(plan.motif, tree.cliques, tree.separators, plan.d, 0)
            out.append(_make(plan.motif, num, den, "triangulated"))
    return _dedupe(out)


def leave_one_out_sets(motif):
    m = motif.order
    out = []
    for p in range(m):
        rest = tuple(v for v in range(m) if v != p)
        if motif.graph.induced(rest).is_connected():
            out.append(rest)
    return out


def adhoc_closure(plan, subsets="leave_one_out"):
    """Ad-hoc form: cliques over connected pairwise intersections, with gamma corrections.

    subsets: "leave_one_out" (connected (m-1)-node subsets) or "maximal"
    (maximal d-cliques of the plan).
    """
    motif = plan.motif
    if subsets == "maximal":
        sets = _split(motif, plan.adhoc_cliques)
    elif subsets == "leave_one_out":
        sets = leave_one_out_sets(motif)
    else:
        sets = [tuple(sorted(s)) for s in subsets]
    den = []
    for a, b in combinations(sets, 2):
        inter = tuple(sorted(set(a) & set(b)))
        if inter and motif.graph.induced(inter).is_connected():
            den.append(inter)
    return _make(motif, sets, den, "adhoc")


def _dedupe(formulas):
    seen, out = set(), []
    for f in formulas:
        key = frozenset(f.class_exponents().items())
        if key not in seen:
            seen.add(key)
            out.append(f)
    return out


def closure_alternatives(motif, route="auto", d=None):
    """Formulas whose evaluated values are averaged for this motif."""
    if route not in ROUTES:
        raise ValidationError(f"unknown route {route!r}; choose from {ROUTES}")
    plan = decomposition_plan(motif, d)
    if plan.route == "chordal":
        return _dedupe([chordal_closure(plan, t) for t in plan.junction_trees])
    if route == "adhoc":
        return [adhoc_closure(plan)]
    if route == "average":
        return _dedupe(triangulated_closures(plan) + [adhoc_closure(plan)])
    return triangulated_closures(plan)


def denormalize(formula, census):
    """Return the formula with the census prefactor for raw counts.

    [target] ~ prefactor * prod[num] / prod[den] * prod [x_p]^gamma_p
    """
    def size(m):
        val = census[canonical_form(m.graph).graph]
        if val == 0:
            raise ValidationError(f"census count for factor class of {m} is zero")
        return Fraction(val)

    pre = size(formula.target)
    for f in formula.numerator:
        pre /= size(f)
    for f in formula.denominator:
        pre *= size(f)
    n_nodes = Fraction(census.N)
    pre /= n_nodes ** sum(formula.gamma)
    return ClosureFormula(formula.target, formula.num_sets, formula.den_sets, formula.gamma, formula.route, pre)


def formula_to_dict(formula, species="SI"):
    return {
        "target": formula.target.ident,
        "target_name": motif_name(formula.target, species),
        "route": formula.route,
        "numerator": [f.ident for f in formula.numerator],
        "denominator": [f.ident for f in formula.denominator],
        "gamma": [[f.ident, g] for f, g in formula.gamma_factors()],
        "numerator_sets": [list(s) for s in formula.num_sets],
        "denominator_sets": [list(s) for s in formula.den_sets],
        "gamma_positions": list(formula.gamma),
        "prefactor": str(formula.prefactor),
        "text": formula.text(species),
    }


@dataclass
class ClosureOptions:
    route: str = "auto"
    d: int = None
    overrides: dict = field(default_factory=dict)  # Motif -> route


def close_system(system, census, options=None):
    """Replace boundary motifs by closure formulas; returns an odesys.ClosedSystem."""
    from .odesys import ClosedSystem

    options = options or ClosureOptions()
    if isinstance(options, str):
        options = ClosureOptions(route=options)
    if census.kmax < system.k + 1:
        raise ValidationError(f"census covers order {census.kmax}, closure needs {system.k + 1}")
    closures = {}
    for b in system.boundary:
        if census[canonical_form(b.graph).graph] == 0:
            continue
        route = options.overrides.get(b, options.route)
        closures[b] = closure_alternatives(b, route, options.d)
    return ClosedSystem.from_moment_system(system, census, closures)
