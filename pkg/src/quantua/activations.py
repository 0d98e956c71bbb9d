"""Activation zoo, rigorous rounding onto Q_{p,s}, and derivative metadata."""
from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import mpmath
import numpy as np

from .fxp import FxFormat, round_half_away

mpf = mpmath.mpf


class TieUnresolved(ArithmeticError):
    def __init__(self, name: str, x: Fraction, bits: int):
        super().__init__(f"{name}({x}) still straddles a rounding tie at {bits} bits")
        self.x = x
        self.bits = bits


class MetadataMissing(LookupError):
    pass


@dataclass(frozen=True)
class ActivationSpec:
    """An activation with an exact path (where available) and an mpmath path.

    ``exact(x)`` returns a Fraction when sigma(x) is rational and known
    exactly, else None.  ``d1``/``d2`` are closed-form first and second
    derivatives; ``kinks`` are points where sigma is not differentiable and
    ``breaks`` are points where d1 may be non-smooth.
    """

    name: str
    kind: str  # "exact" or "transcendental"
    exact: Callable[[Fraction], Optional[Fraction]]
    mp: Optional[Callable] = None
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    kinks: tuple = ()
    breaks: tuple = ()
    monotone: Optional[bool] = None

    @property
    def has_metadata(self) -> bool:
        return self.d1 is not None

    def __call__(self, x):
        return eval_real(self, Fraction(x), 64)


def _mpx(x: Fraction):
    return mpf(x.numerator) / x.denominator


def _sig(x):
    return 1 / (1 + mpmath.exp(-x))


def _softplus(x):
    return mpmath.log1p(mpmath.exp(x))


def _phi(x):
    return mpmath.exp(-x * x / 2) / mpmath.sqrt(2 * mpmath.pi)


def _Phi(x):
    return (1 + mpmath.erf(x / mpmath.sqrt(2))) / 2


def _zero_at_origin(x: Fraction):
    return Fraction(0) if x == 0 else None


def _mish_d1(x):
    t, g = mpmath.tanh(_softplus(x)), _sig(x)
    return t + x * (1 - t * t) * g


def _mish_d2(x):
    t, g = mpmath.tanh(_softplus(x)), _sig(x)
    return (1 - t * t) * g * (2 + x * (1 - g - 2 * t * g))


@functools.lru_cache(maxsize=None)
def _scaled_hardtanh(c: int, name: str) -> ActivationSpec:
    def ex(x):
        return Fraction(0) if x <= 0 else (c * x if x < 1 else Fraction(c))

    return ActivationSpec(
        name, "exact", ex, mp=lambda x: c * min(max(x, 0), 1),
        d1=lambda x: mpf(c) if 0 < x < 1 else mpf(0), d2=lambda x: mpf(0),
        kinks=(Fraction(0), Fraction(1)), breaks=(Fraction(0), Fraction(1)), monotone=True)


LEAKY_SLOPE = Fraction(1, 100)

_ZOO: dict[str, ActivationSpec] = {
    "identity": ActivationSpec("identity", "exact", lambda x: x, mp=lambda x: x,
                               d1=lambda x: mpf(1), d2=lambda x: mpf(0), monotone=True),
    "relu": ActivationSpec("relu", "exact", lambda x: max(x, Fraction(0)), mp=lambda x: max(x, 0),
                           d1=lambda x: mpf(1) if x > 0 else mpf(0), d2=lambda x: mpf(0),
                           kinks=(Fraction(0),), breaks=(Fraction(0),), monotone=True),
    "leaky_relu": ActivationSpec(
        "leaky_relu", "exact", lambda x: x if x >= 0 else LEAKY_SLOPE * x,
        mp=lambda x: x if x >= 0 else x / 100,
        d1=lambda x: mpf(1) if x > 0 else mpf(1) / 100, d2=lambda x: mpf(0),
        kinks=(Fraction(0),), breaks=(Fraction(0),), monotone=True),
    "hardtanh": _scaled_hardtanh(1, "hardtanh"),
    "sigmoid": ActivationSpec("sigmoid", "transcendental",
                              lambda x: Fraction(1, 2) if x == 0 else None, mp=_sig,
                              d1=lambda x: _sig(x) * (1 - _sig(x)),
                              d2=lambda x: _sig(x) * (1 - _sig(x)) * (1 - 2 * _sig(x)),
                              monotone=True),
    "softplus": ActivationSpec("softplus", "transcendental", lambda x: None, mp=_softplus,
                               d1=_sig, d2=lambda x: _sig(x) * (1 - _sig(x)), monotone=True),
    "elu": ActivationSpec("elu", "transcendental", lambda x: x if x >= 0 else None,
                          mp=lambda x: x if x >= 0 else mpmath.expm1(x),
                          d1=lambda x: mpf(1) if x >= 0 else mpmath.exp(x),
                          d2=lambda x: mpf(0) if x >= 0 else mpmath.exp(x),
                          breaks=(Fraction(0),), monotone=True),
    "silu": ActivationSpec("silu", "transcendental", _zero_at_origin, mp=lambda x: x * _sig(x),
                           d1=lambda x: _sig(x) * (1 + x * (1 - _sig(x))),
                           d2=lambda x: _sig(x) * (1 - _sig(x)) * (2 + x * (1 - 2 * _sig(x))),
                           monotone=False),
    "gelu": ActivationSpec("gelu", "transcendental", _zero_at_origin, mp=lambda x: x * _Phi(x),
                           d1=lambda x: _Phi(x) + x * _phi(x),
                           d2=lambda x: _phi(x) * (2 - x * x), monotone=False),
    "mish": ActivationSpec("mish", "transcendental", _zero_at_origin,
                           mp=lambda x: x * mpmath.tanh(_softplus(x)), d1=_mish_d1, d2=_mish_d2,
                           monotone=False),
}

ZOO_NAMES = tuple(_ZOO) + ("hardtanh5", "hardtanh5s")


def get_activation(name: str, fmt: FxFormat | None = None) -> ActivationSpec:
    """Look up a zoo member.  ``hardtanh5s`` is 5s*Hardtanh and needs the format."""
    key = name.lower().replace("-", "_")
    if key in _ZOO:
        return _ZOO[key]
    if key == "hardtanh5":
        return _scaled_hardtanh(5, "hardtanh5")
    if key == "hardtanh5s":
        if fmt is None:
            raise ValueError("hardtanh5s depends on the scale; pass a format")
        return _scaled_hardtanh(5 * fmt.s, "hardtanh5s")
    raise KeyError(f"unknown activation {name!r}")


# ------------------------------------------------------------- evaluation

def mpf_to_fraction(v) -> Fraction:
    sign, man, exp, _ = mpf(v)._mpf_
    man, exp = int(man), int(exp)
    r = Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)
    return -r if sign else r


def eval_real(act: ActivationSpec, x: Fraction, precision_bits: int = 64) -> tuple[Fraction, Fraction]:
    """Enclosure [lo, hi] of act(x) with hi - lo <= 2**-precision_bits.

    The radius budget assumes mpmath's elementary functions are accurate to
    a few ulps at the working precision; exact cases are degenerate intervals.
    """
    if precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")
    x = Fraction(x)
    v = act.exact(x)
    if v is not None:
        return v, v
    if act.mp is None:
        raise MetadataMissing(f"{act.name} has no real evaluator")
    mag = abs(x.numerator) // x.denominator + 2
    wp = precision_bits + 24 + mag.bit_length()
    with mpmath.workprec(wp):
        y = act.mp(_mpx(x))
        c = mpf_to_fraction(y)
    r = Fraction(abs(int(c)) + mag, 2 ** (wp - 8))
    return c - r, c + r


def _round_frac(v: Fraction, fmt: FxFormat) -> int:
    t = v * fmt.s
    r = round_half_away(t.numerator, t.denominator)
    return max(-fmt.qmax_num, min(fmt.qmax_num, r))


def round_activation(act: ActivationSpec, x: Fraction, fmt: FxFormat,
                     guard_bits: int = 128, max_escalations: int = 3) -> int:
    """Numerator of round(act(x)) on Q_{p,s}, refining until the cell is decided."""
    bits = guard_bits
    for _ in range(max_escalations + 1):
        lo, hi = eval_real(act, x, bits)
        a, b = _round_frac(lo, fmt), _round_frac(hi, fmt)
        if a == b:
            return a
        bits *= 2
    raise TieUnresolved(act.name, x, bits // 2)


# ------------------------------------------------------------------ tables

@dataclass(frozen=True)
class QuantTable:
    """The finite map round(sigma): Q_{p,s} -> Q_{p,s}, stored as numerators in grid order."""

    name: str
    fmt: FxFormat
    values: tuple
    guard_bits: int = 128

    def __post_init__(self):
        if len(self.values) != self.fmt.size:
            raise ValueError(f"table needs {self.fmt.size} entries, got {len(self.values)}")
        q = self.fmt.qmax_num
        if any(abs(v) > q for v in self.values):
            raise ValueError("table entries must lie on the grid")

    def __call__(self, num: int) -> int:
        return self.values[num + self.fmt.qmax_num]

    @functools.cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    @property
    def range_nums(self) -> list[int]:
        return sorted(set(self.values))

    @property
    def max_num(self) -> int:
        return max(self.values)

    def reflected(self, alpha: int, beta: int) -> "QuantTable":
        """Table of rho(x) = alpha*sigma(beta*x); rounding commutes with the sign flips."""
        q = self.fmt.qmax_num
        vals = tuple(alpha * self(beta * k) for k in range(-q, q + 1))
        return QuantTable(f"{self.name}[{alpha},{beta}]", self.fmt, vals, self.guard_bits)

    def to_text(self) -> str:
        head = [f"# quant-table v1", f"name={self.name}", f"p={self.fmt.p}",
                f"s={self.fmt.s}", f"guard_bits={self.guard_bits}"]
        return "\n".join(head + [str(v) for v in self.values]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QuantTable":
        meta, vals = {}, []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k.strip()] = v.strip()
            else:
                vals.append(int(line))
        fmt = FxFormat(int(meta["p"]), int(meta["s"]))
        return cls(meta.get("name", "custom"), fmt, tuple(vals), int(meta.get("guard_bits", 0)))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "QuantTable":
        return cls.from_text(Path(path).read_text())


@functools.lru_cache(maxsize=256)
def _tabulate_cached(act: ActivationSpec, fmt: FxFormat, guard_bits: int, max_escalations: int):
    s = fmt.s
    vals = tuple(round_activation(act, Fraction(k, s), fmt, guard_bits, max_escalations)
                 for k in fmt.grid())
    return QuantTable(act.name, fmt, vals, guard_bits)


def tabulate(act: ActivationSpec, fmt: FxFormat, guard_bits: int = 128,
             max_escalations: int = 3) -> QuantTable:
    if not fmt.finite:
        raise ValueError("tabulation needs a finite p")
    return _tabulate_cached(act, fmt, guard_bits, max_escalations)


def table_for(name: str, fmt: FxFormat) -> QuantTable:
    """Zoo name or ``table:<path>``."""
    if name.startswith("table:"):
        t = QuantTable.load(name[len("table:"):])
        if t.fmt != fmt:
            raise ValueError(f"table file is for {t.fmt}, requested {fmt}")
        return t
    return tabulate(get_activation(name, fmt), fmt)


# ------------------------------------------------ analytic derivative data

SCAN_RADIUS = 40
SCAN_STEP = Fraction(1, 16)
WORK_PREC = 113


def _sign_change_roots(f: Callable, lo: Fraction, hi: Fraction) -> tuple:
    """Points where f changes sign on a mesh over [lo, hi], refined by bisection."""
    roots = []
    with mpmath.workprec(WORK_PREC):
        n = int((hi - lo) / SCAN_STEP)
        prev_x, prev_s = None, 0
        for i in range(n + 1):
            x = _mpx(lo + i * SCAN_STEP)
            v = f(x)
            sg = 0 if v == 0 else (1 if v > 0 else -1)
            if sg == 0:
                continue
            if prev_s and sg != prev_s:
                a, b = prev_x, x
                for _ in range(90):
                    m = (a + b) / 2
                    fm = f(m)
                    if fm == 0:
                        a = b = m
                        break
                    if (fm > 0) == (prev_s > 0):
                        a = m
                    else:
                        b = m
                roots.append(mpf_to_fraction((a + b) / 2))
            prev_x, prev_s = x, sg
    return tuple(roots)


@functools.lru_cache(maxsize=None)
def critical_points(act: ActivationSpec, order: int) -> tuple:
    """Roots of d1 (order=1, extrema of sigma) or d2 (order=2, extrema of sigma')."""
    if not act.has_metadata:
        raise MetadataMissing(f"{act.name} carries no derivative metadata")
    f = act.d1 if order == 1 else act.d2
    r = Fraction(SCAN_RADIUS)
    return _sign_change_roots(f, -r, r)


def differentiable_on(act: ActivationSpec, a: Fraction, b: Fraction) -> bool:
    """True if no kink lies in the open interval (a, b)."""
    return not any(a < k < b for k in act.kinks)


def _extrema(act, f, roots, a: Fraction, b: Fraction):
    pts = [a, b] + [r for r in roots + act.breaks + act.kinks if a < r < b]
    tiny = Fraction(1, 2**200)
    vals = []
    with mpmath.workprec(WORK_PREC):
        for x in pts:
            if f is act.d1 and x in act.kinks:
                # one-sided derivative from inside the interval
                x = x + tiny if x == a else x - tiny if x == b else x
            vals.append(mpf_to_fraction(mpf(f(_mpx(Fraction(x))))))
    return min(vals), max(vals)


def derivative_bounds(act: ActivationSpec, a, b):
    """(inf, sup) of sigma' over [a, b]; endpoints at kinks use the inner side."""
    a, b = Fraction(a), Fraction(b)
    return _extrema(act, act.d1, critical_points(act, 2), a, b)


def value_bounds(act: ActivationSpec, a, b):
    """(inf, sup) of sigma over [a, b]."""
    if act.mp is None:
        raise MetadataMissing(act.name)
    a, b = Fraction(a), Fraction(b)
    roots = critical_points(act, 1) if act.has_metadata else ()
    pts = [a, b] + [r for r in roots + act.breaks + act.kinks if a < r < b]
    encl = [eval_real(act, x, WORK_PREC) for x in pts]
    return min(e[0] for e in encl), max(e[1] for e in encl)


def audit_derivative_bounds(act: ActivationSpec, interval, claimed_inf, claimed_sup,
                            n_samples: int = 2000, tau: float = 1e-3) -> dict:
    """Finite-difference tripwire: every sample of sigma' must sit in the claimed band +- tau.

    Samples are interval midpoints so that excluded endpoints (and kinks
    there) are never differenced across.
    """
    a, b = (float(v) for v in interval)
    h = 1e-7
    samples = []
    with mpmath.workprec(80):
        for i in range(n_samples):
            x = mpf(a) + (mpf(b) - a) * (i + mpf(0.5)) / n_samples
            samples.append(float((act.mp(x + h) - act.mp(x - h)) / (2 * h)))
    lo, hi = min(samples), max(samples)
    ok = lo >= claimed_inf - tau and hi <= claimed_sup + tau
    return {"pass": ok, "sample_min": lo, "sample_max": hi,
            "margin": min(lo - (claimed_inf - tau), claimed_sup + tau - hi)}


# Published reference values used as regression targets (never as inputs).
# Each entry: (activation, quantity, interval, value).  "x>=0" intervals use
# a finite stand-in of [0, 20].
REFERENCE_BOUNDS = [
    ("relu", "inf_d1", (0, 20), 1), ("relu", "sup_d1", (0, 20), 1),
    ("relu", "inf_d1", (0, Fraction(2, 3)), 1), ("relu", "sup_d1", (0, Fraction(2, 3)), 1),
    ("elu", "inf_d1", (0, 20), 1), ("elu", "sup_d1", (0, 20), 1),
    ("elu", "inf_d1", (0, Fraction(2, 3)), 1), ("elu", "sup_d1", (0, Fraction(2, 3)), 1),
    ("silu", "inf_d1", (0, 20), 0.5), ("silu", "sup_d1", (0, 20), 1.10),
    ("silu", "inf_d1", (0, Fraction(2, 3)), 0.5), ("silu", "sup_d1", (0, Fraction(2, 3)), 0.81),
    ("mish", "inf_d1", (0, 20), 0.6), ("mish", "sup_d1", (0, 20), 1.09),
    ("mish", "inf_d1", (0, Fraction(2, 3)), 0.6), ("mish", "sup_d1", (0, Fraction(2, 3)), 0.96),
    ("gelu", "inf_d1", (0, 20), 0.5), ("gelu", "sup_d1", (0, 20), 1.13),
    ("gelu", "inf_d1", (0, Fraction(2, 3)), 0.5), ("gelu", "sup_d1", (0, Fraction(2, 3)), 0.96),
    ("softplus", "sup_abs", (Fraction(-2, 3), Fraction(1, 3)), 0.87),
    ("softplus", "inf_d1", (Fraction(-2, 3), Fraction(1, 3)), 0.34),
    ("softplus", "sup_d1", (Fraction(-2, 3), Fraction(1, 3)), 0.58),
    ("sigmoid", "sup_abs", (-1, 1), 0.73),
    ("sigmoid", "inf_d1", (-1, 1), 0.2),
    ("sigmoid", "sup_d1", (-1, 1), 0.25),
]


def reference_quantity(act: ActivationSpec, quantity: str, interval) -> float:
    a, b = interval
    if quantity == "inf_d1":
        return float(derivative_bounds(act, a, b)[0])
    if quantity == "sup_d1":
        return float(derivative_bounds(act, a, b)[1])
    if quantity == "sup_abs":
        lo, hi = value_bounds(act, a, b)
        return float(max(abs(lo), abs(hi)))
    raise ValueError(quantity)
