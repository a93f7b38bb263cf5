"""Neutral JSON AST for moment systems and closures, plus plain-text rendering.

A term is ``{"coeff": "p/q", "rate": name-or-"1", "motif": ident}``; motifs
are referred to by their stable ident strings.  Everything is emitted in a
fixed order so that identical systems give identical bytes.
"""

import hashlib
import json
from fractions import Fraction

from .closure import ClosureFormula, formula_to_dict
from .config import ValidationError
from .derivation import Elimination, LinComb, MomentSystem, RateModel, Relation
from .graph_core import SmallGraph
from .motif_algebra import motif_from_ident
from .network_models import SubgraphCensus

FORMAT_EQUATIONS = "momentforge.equations/1"
FORMAT_CLOSED = "momentforge.closed/1"


def _terms(comb, motif=None):
    out = []
    for name, w in comb.terms:
        t = {"coeff": str(w), "rate": name}
        if motif is not None:
            t["motif"] = motif.ident
        out.append(t)
    return out


def _comb(terms):
    return LinComb({t["rate"]: Fraction(t["coeff"]) for t in terms}) if terms else LinComb()


def _rows(terms):
    row = {}
    for t in terms:
        m = motif_from_ident(t["motif"])
        row[m] = row.get(m, LinComb()) + LinComb({t["rate"]: Fraction(t["coeff"])})
    return row


def system_to_dict(system):
    sp = system.species
    eqs = []
    for r in system.variables:
        terms = []
        for col in sorted(system.rows[r]):
            terms.extend(_terms(system.rows[r][col], col))
        eq = {"lhs": r.ident, "name": r.name(sp), "terms": terms}
        const = system.constants.get(r)
        if const:
            eq["constant"] = _terms(const)
        eqs.append(eq)
    out = {
        "format": FORMAT_EQUATIONS,
        "order": system.k,
        "rates": system.rates.to_dict(),
        "parameters": list(system.rates.parameters),
        "variables": [{"id": m.ident, "name": m.name(sp)} for m in system.variables],
        "boundary": [{"id": m.ident, "name": m.name(sp)} for m in system.boundary],
        "pruned": [m.ident for m in system.pruned],
        "equations": eqs,
        "relations": [
            {"kind": r.kind, "rhs": str(r.rhs), "terms": [{"coeff": str(c), "motif": m.ident} for m, c in r.coeffs]}
            for r in system.relations
        ],
    }
    if system.elimination is not None:
        el = system.elimination
        out["elimination"] = [
            {
                "motif": m.ident,
                "name": m.name(sp),
                "terms": [{"coeff": str(w), "motif": f.ident} for f, w in sorted(el.E[m].items())],
                "constant": str(el.c[m]),
            }
            for m in el.eliminated
        ]
    return out


def system_from_dict(data):
    if data.get("format") != FORMAT_EQUATIONS:
        raise ValidationError(f"not an equation set: format {data.get('format')!r}")
    rates = RateModel.from_dict(data["rates"])
    variables = tuple(motif_from_ident(v["id"]) for v in data["variables"])
    boundary = tuple(motif_from_ident(v["id"]) for v in data["boundary"])
    rows, consts = {}, {}
    for eq in data["equations"]:
        m = motif_from_ident(eq["lhs"])
        rows[m] = _rows(eq["terms"])
        if eq.get("constant"):
            consts[m] = _comb(eq["constant"])
    relations = tuple(
        Relation(tuple((motif_from_ident(t["motif"]), Fraction(t["coeff"])) for t in r["terms"]), Fraction(r["rhs"]), r["kind"])
        for r in data.get("relations", [])
    )
    elim = None
    if "elimination" in data:
        order, E, c = [], {}, {}
        for e in data["elimination"]:
            m = motif_from_ident(e["motif"])
            order.append(m)
            E[m] = {motif_from_ident(t["motif"]): Fraction(t["coeff"]) for t in e["terms"]}
            c[m] = Fraction(e["constant"])
        elim = Elimination(tuple(order), E, c)
    pruned = tuple(motif_from_ident(x) for x in data.get("pruned", []))
    all_vars = tuple(sorted(set(variables) | set(pruned) | (set(elim.E) if elim else set())))
    return MomentSystem(
        k=data["order"],
        rates=rates,
        variables=variables,
        boundary=boundary,
        rows=rows,
        all_variables=all_vars,
        all_rows=dict(rows),
        pruned=pruned,
        constants=consts,
        relations=relations,
        elimination=elim,
    )


def census_to_list(census):
    return [{"order": g.order, "edges": [list(e) for e in g.edges()], "count": str(c)} for g, c in census.as_rows()]


def census_from_list(rows, kmax):
    return SubgraphCensus({SmallGraph.from_edges(r["order"], r["edges"]): Fraction(r["count"]) for r in rows}, kmax)


def formula_from_dict(data):
    return ClosureFormula(
        motif_from_ident(data["target"]),
        tuple(tuple(s) for s in data["numerator_sets"]),
        tuple(tuple(s) for s in data["denominator_sets"]),
        tuple(data["gamma_positions"]),
        data["route"],
        Fraction(data["prefactor"]),
    )


def closed_to_dict(closed):
    """Unclosed equations + census + closure formulas: enough to rebuild the ClosedSystem."""
    system, census, closures = closed.source, closed.census, closed.closures
    sp = system.species
    return {
        "format": FORMAT_CLOSED,
        "equations": system_to_dict(system),
        "census": census_to_list(census),
        "census_kmax": census.kmax,
        "closures": [
            {"boundary": b.ident, "name": b.name(sp), "alternatives": [formula_to_dict(f, sp) for f in closures[b]]}
            for b in system.boundary
            if b in closures
        ],
    }


def closed_from_dict(data):
    from .odesys import ClosedSystem

    if data.get("format") != FORMAT_CLOSED:
        raise ValidationError(f"not a closed system: format {data.get('format')!r}")
    system = system_from_dict(data["equations"])
    census = census_from_list(data["census"], data["census_kmax"])
    closures = {motif_from_ident(c["boundary"]): [formula_from_dict(f) for f in c["alternatives"]] for c in data["closures"]}
    return ClosedSystem.from_moment_system(system, census, closures)


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True)


def digest(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def system_text(system):
    return system.format()


def closures_text(closures, species):
    lines = []
    for b in sorted(closures):
        alts = closures[b]
        joined = "  |  ".join(f.text(species) for f in alts)
        tag = " (mean of alternatives)" if len(alts) > 1 else ""
        lines.append(f"[[{b.name(species)}]] ~ {joined}{tag}")
    return "\n".join(lines)
