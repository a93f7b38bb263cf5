import re
from fractions import Fraction

import pytest

from momentforge.derivation import LinComb
from momentforge.motif_algebra import complete_motif, motif_from_edges, path_motif

SPECIES = {"S": 0, "I": 1}

# Suffix -> edge list on positions (a, b, c, d) = (0, 1, 2, 3).
_SHAPES = {
    "tr": [(0, 1), (1, 2), (0, 2)],
    "tre": [(1, 0), (1, 2), (1, 3)],
    "sqo": [(0, 1), (1, 2), (2, 3), (3, 0)],
    "str": [(0, 1), (1, 2), (2, 3), (1, 3)],
    "sqi": [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)],
}


def glyph(name):
    """Motif from a compact name such as ``SSI``, ``SSItr`` or ``ISSIsqo``.

    Plain letter strings are paths read in order.  Suffixes: ``tr`` triangle,
    ``tre`` star centred on the second letter, ``sqo`` 4-cycle, ``str`` paw
    with the pendant on the first letter, ``sqi`` diamond with chord b-d,
    ``sqii`` complete graph on four nodes.
    """
    m = re.fullmatch(r"([SI]+)(tre|tr|sqii|sqo|sqi|str)?", name)
    if m is None:
        raise ValueError(name)
    labels = [SPECIES[ch] for ch in m.group(1)]
    shape = m.group(2)
    if shape is None:
        return path_motif(labels)
    if shape == "sqii":
        return complete_motif(labels)
    return motif_from_edges(len(labels), _SHAPES[shape], labels)


def rate(text):
    """Parse ``-2β-γ``, ``14/3β`` or ``0`` into a LinComb over beta/gamma."""
    text = text.replace("−", "-").replace(" ", "")
    if text in ("0", ""):
        return LinComb()
    out = {}
    for sign, coef, sym in re.findall(r"([+-]?)(\d+(?:/\d+)?)?([βγ]|1)", text):
        w = Fraction(coef) if coef else Fraction(1)
        if sign == "-":
            w = -w
        key = {"β": "beta", "γ": "gamma", "1": "1"}[sym]
        out[key] = out.get(key, 0) + w
    return LinComb(out)


def table(columns, rows):
    """Matrix written as {row name: "c1, c2, ..."} -> {row motif: {col motif: LinComb}}."""
    cols = [glyph(c) for c in columns]
    out = {}
    for r, text in rows.items():
        cells = [rate(x) for x in text.split(",")]
        assert len(cells) == len(cols), r
        out[glyph(r)] = {c: v for c, v in zip(cols, cells) if v}
    return out


@pytest.fixture(scope="session")
def rng():
    import numpy as np

    return np.random.default_rng(12345)


# --------------------------------------------------------- acceptance report

ACCEPTANCE = {}


def record(number, ok, detail):
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
