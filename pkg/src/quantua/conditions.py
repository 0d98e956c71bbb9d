"""Universality decisions for an (activation, Q_{p,s}) pair."""
from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from . import reach
from .activations import (ActivationSpec, MetadataMissing, QuantTable, derivative_bounds,
                          differentiable_on, eval_real, tabulate, value_bounds)
from .fxp import FxFormat

UNIVERSAL, NOT_UNIVERSAL, UNKNOWN = "Universal", "NotUniversal", "Unknown"
EXIT_CODES = {UNIVERSAL: 0, NOT_UNIVERSAL: 10, UNKNOWN: 20}
REPORT_SCHEMA = "quantua.analysis/1"


class ConditionViolated(ValueError):
    pass


# ------------------------------------------------------------ Condition 1

@dataclass(frozen=True)
class Condition1Witness:
    alpha: int
    beta: int
    z: int  # numerator over s

    def reflect(self, table: QuantTable) -> QuantTable:
        return table.reflected(self.alpha, self.beta)


SIGN_ORDER = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def _threshold(vals) -> int | None:
    """Index z such that vals hits its max exactly on [z, end), or None."""
    top = max(vals)
    z = len(vals)
    while z > 0 and vals[z - 1] == top:
        z -= 1
    if any(v == top for v in vals[:z]):
        return None
    return z


def check_condition1(table: QuantTable) -> Condition1Witness | None:
    q = table.fmt.qmax_num
    for a, b in SIGN_ORDER:
        vals = table.reflected(a, b).values
        z = _threshold(vals)
        if z is not None and z > 0:
            return Condition1Witness(a, b, z - q)
    return None


def verify_condition1(table: QuantTable, w: Condition1Witness) -> bool:
    rho = w.reflect(table)
    top = rho.max_num
    q = table.fmt.qmax_num
    return w.z != -q and all((rho(x) == top) == (x >= w.z) for x in table.fmt.grid())


# ------------------------------------------------------ divisor obstruction

def check_necessity_divisor(table: QuantTable, binary: bool = False) -> int | None:
    """Smallest r >= 3 with s*r in Q_{p,s} dividing every scaled entry.

    General weights need (s*r) | (s*entry); +-1 weights only need r | (s*entry).
    r = 3 additionally requires p even.
    """
    fmt = table.fmt
    s, p = fmt.s, fmt.p
    r = 3
    while s * s * r <= fmt.qmax_num:
        if r != 3 or p % 2 == 0:
            m = r if binary else s * r
            if all(v % m == 0 for v in table.values):
                return r
        r += 1
    return None


# --------------------------------------------------- sufficiency items

@dataclass(frozen=True)
class ItemCertificate:
    item: int
    q1: int
    q2: int
    d1_inf: float
    d1_sup: float
    abs_sup: float
    note: str = ""


@functools.lru_cache(maxsize=64)
def _cells(act: ActivationSpec, s: int, q: int):
    """Per unit cell [k/s, (k+1)/s]: (d1 inf, d1 sup, sigma inf, sigma sup)."""
    out = {}
    for k in range(-q, q):
        a, b = Fraction(k, s), Fraction(k + 1, s)
        out[k] = derivative_bounds(act, a, b) + value_bounds(act, a, b)
    return out


def window_bounds(act: ActivationSpec, fmt: FxFormat, q1: int, q2: int):
    """Bounds of sigma' and sigma over [q1/s, q2/s]; None if a kink lies strictly inside."""
    s = fmt.s
    if not differentiable_on(act, Fraction(q1, s), Fraction(q2, s)):
        return None
    cells = _cells(act, s, fmt.qmax_num)
    rows = [cells[k] for k in range(q1, q2)]
    return (min(r[0] for r in rows), max(r[1] for r in rows),
            min(r[2] for r in rows), max(r[3] for r in rows))


def _interval_bounds(act, a: Fraction, b: Fraction):
    if not differentiable_on(act, a, b):
        return None
    return derivative_bounds(act, a, b) + value_bounds(act, a, b)


def _gap(act: ActivationSpec, s: int, q1: int, q2: int):
    lo1, hi1 = eval_real(act, Fraction(q1, s), 128)
    lo2, hi2 = eval_real(act, Fraction(q2, s), 128)
    return lo2 - hi1, hi2 - lo1


def _cert(item, q1, q2, b, note=""):
    d1lo, d1hi, vlo, vhi = b
    return ItemCertificate(item, q1, q2, float(d1lo), float(d1hi),
                           float(max(abs(vlo), abs(vhi))), note)


def _check_window_item(item, act, fmt, q1, q2):
    b = window_bounds(act, fmt, q1, q2)
    if b is None:
        return None
    d1lo, d1hi, vlo, vhi = b
    qm, s = fmt.q_max, fmt.s
    bounded = max(abs(vlo), abs(vhi)) <= qm
    if item == 1:
        ok = max(abs(d1lo), abs(d1hi)) < 1 and bounded
    elif item == 2:
        ok = max(abs(d1lo), abs(d1hi)) <= 1 and vlo >= 0 and vhi <= qm
    else:
        ok = 1 <= d1lo and d1hi <= 2 and bounded
    if not ok:
        return None
    glo, ghi = _gap(act, s, q1, q2)
    if item in (1, 2):
        ok = glo >= Fraction(1, s) or ghi <= -Fraction(1, s)
    else:
        ok = max(abs(glo), abs(ghi)) < Fraction(2 * (q2 - q1) - 1, s)
    return _cert(item, q1, q2, b) if ok else None


# item -> (lower bound on sigma', strict upper bound, window in units of 1/s)
FIXED_ITEMS = {
    4: (Fraction(1, 2), Fraction(1), (0, 2)),
    5: (Fraction(1), Fraction(3, 2), (0, 2)),
    6: (Fraction(1, 3), Fraction(1), (-2, 1)),
    7: (Fraction(1, 6), Fraction(1), (-3, 3)),
}


def check_fixed_item(item: int, act: ActivationSpec, fmt: FxFormat, interval_j=None):
    lo_d, hi_d, (u, v) = FIXED_ITEMS[item]
    s = fmt.s
    a, b = Fraction(u, s), Fraction(v, s)
    bd = _interval_bounds(act, a, b)
    if bd is None:
        return None
    d1lo, d1hi, vlo, vhi = bd
    note = ""
    if item == 5:
        ja, jb = interval_j or (a, b)
        vlo, vhi = value_bounds(act, ja, jb)
        bd = (d1lo, d1hi, vlo, vhi)
        note = f"J=({ja},{jb}) assumed"
    if lo_d <= d1lo and d1hi < hi_d and max(abs(vlo), abs(vhi)) <= fmt.q_max:
        return _cert(item, u, v, bd, note)
    return None


def check_sufficiency_items(act: ActivationSpec, fmt: FxFormat, items=range(1, 8),
                            search_width: int = 4, interval_j=None) -> dict:
    """Certificates for every item of the sufficiency lemma that holds (needs p >= 3)."""
    if not act.has_metadata:
        raise MetadataMissing(f"{act.name}: derivative metadata required")
    if fmt.p < 3:
        return {}
    q = fmt.qmax_num
    found = {}
    for item in items:
        if item in FIXED_ITEMS:
            c = check_fixed_item(item, act, fmt, interval_j)
            if c:
                found[item] = c
            continue
        for width in range(1, search_width + 1):
            for q1 in range(-q, q - width + 1):
                c = _check_window_item(item, act, fmt, q1, q1 + width)
                if c:
                    found[item] = c
                    break
            if item in found:
                break
    return found


# ------------------------------------------------------------ Condition 2

@dataclass(frozen=True)
class Condition2Result:
    holds: bool
    subitem: int | None
    d1_inf: float
    d1_sup: float
    value_inf: float
    value_sup: float


def check_condition2(act: ActivationSpec, fmt: FxFormat) -> Condition2Result:
    """Slope in [1/2, 2] and 0 <= sigma <= q_max on [0, q_max], plus item 4 or 5 near 0."""
    if not act.has_metadata:
        raise MetadataMissing(act.name)
    qm = fmt.q_max
    if not differentiable_on(act, Fraction(0), qm):
        return Condition2Result(False, None, 0.0, 0.0, 0.0, 0.0)
    d1lo, d1hi = derivative_bounds(act, 0, qm)
    vlo, vhi = value_bounds(act, 0, qm)
    base = Fraction(1, 2) <= d1lo and d1hi <= 2 and vlo >= 0 and vhi <= qm
    sub = None
    two_s = Fraction(2, fmt.s)
    lo, hi = derivative_bounds(act, 0, two_s)
    if Fraction(1, 2) <= lo and hi < 1:
        sub = 1
    elif 1 <= lo and hi < Fraction(3, 2):
        sub = 2
    return Condition2Result(bool(base and sub), sub, float(d1lo), float(d1hi),
                            float(vlo), float(vhi))


# --------------------------------------------------------------- verdict

@dataclass
class AnalysisReport:
    activation: str
    format: str
    mode: str
    verdict: str
    condition1: dict | None
    sufficiency_items: dict | None
    divisor_r: int | None
    sets: dict
    notes: list = field(default_factory=list)
    schema: str = REPORT_SCHEMA

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_json(self) -> dict:
        return asdict(self)


def analyze_table(table: QuantTable, binary: bool = False,
                  act: ActivationSpec | None = None) -> AnalysisReport:
    fmt = table.fmt
    mode = reach.BINARY if binary else reach.GENERAL
    sk, nk = ("BS", "BN") if binary else ("S", "N")
    w = check_condition1(table)
    s_scan = reach.scan_bias(table, sk, keep_missing=False)
    notes = []
    items = None
    if act is not None and act.has_metadata:
        items = {str(k): asdict(v) for k, v in check_sufficiency_items(act, fmt).items()}
        if "5" in items:
            notes.append("item 5 checked with J = (0, 2/s)")
    elif act is None or not act.has_metadata:
        notes.append("no derivative metadata: sufficiency items not evaluated")
    sets = {
        "S_kind": sk, "N_kind": nk,
        f"{sk}_witness_b": s_scan.witness, f"{sk}_period": s_scan.period,
        f"|{sk}_0|": len(reach.SET_FUNCS[sk](table, 0)),
        f"|{nk}_0|": len(reach.SET_FUNCS[nk](table, 0)),
        "V_gcd": reach._gcd(reach.compute_V(table).members),
        "range_gcd": reach._gcd(table.range_nums),
    }
    r = check_necessity_divisor(table, binary)
    if w is not None and s_scan.found:
        verdict = UNIVERSAL
    else:
        n_scan = reach.scan_bias(table, nk)
        sets[f"{nk}_witness_b"] = n_scan.witness
        sets[f"{nk}_scanned"] = len(n_scan.scanned)
        if not n_scan.found:
            verdict = NOT_UNIVERSAL
            sets[f"{nk}_missing"] = {str(b): m for b, m in n_scan.missing.items()}
        else:
            verdict = UNKNOWN
            notes.append("necessary condition met but sufficiency not established")
    return AnalysisReport(table.name, str(fmt), mode, verdict,
                          asdict(w) if w else None, items, r, sets, notes)


def verdict(act: ActivationSpec, fmt: FxFormat, binary: bool = False) -> AnalysisReport:
    return analyze_table(tabulate(act, fmt), binary, act)
