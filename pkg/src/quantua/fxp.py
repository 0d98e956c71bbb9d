"""Exact fixed-point arithmetic on the grids Q_{p,s} and Q_{inf,s}.

Grid values are carried as integer numerators over s.  Affine intermediates
live at scale s**2 and are rounded exactly once.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class Unresolved(ValueError):
    """An enclosure straddles a grid boundary that must be decided."""


@dataclass(frozen=True)
class FxFormat:
    """The pair (p, s).  ``p=None`` stands for the unbounded grid Q_{inf,s}."""

    p: int | None
    s: int

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"scale must be positive, got {self.s}")
        if self.p is not None:
            if self.p < 1:
                raise ValueError(f"p must be positive, got {self.p}")
            if 2**self.p - 1 < self.s:
                raise ValueError(f"q_max < 1 for p={self.p}, s={self.s}")

    @property
    def finite(self) -> bool:
        return self.p is not None

    @property
    def qmax_num(self) -> int:
        if self.p is None:
            raise ValueError("unbounded format has no q_max")
        return 2**self.p - 1

    @property
    def q_max(self) -> Fraction:
        return Fraction(self.qmax_num, self.s)

    @property
    def size(self) -> int:
        return 2 * self.qmax_num + 1

    def grid(self) -> range:
        """Numerators of Q_{p,s} in increasing order."""
        return range(-self.qmax_num, self.qmax_num + 1)

    def contains(self, num: int) -> bool:
        return self.p is None or abs(num) <= self.qmax_num

    def value(self, num: int) -> Fraction:
        return Fraction(num, self.s)

    def __str__(self) -> str:
        return f"p={'inf' if self.p is None else self.p},s={self.s}"

    @classmethod
    def parse(cls, text: str) -> "FxFormat":
        m = re.fullmatch(r"\s*p\s*=\s*(\w+)\s*,\s*s\s*=\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"bad format string {text!r}")
        p = None if m.group(1) in ("inf", "oo") else int(m.group(1))
        return cls(p, int(m.group(2)))


@dataclass(frozen=True)
class ScaledExact:
    """Exact value num / s**k."""

    num: int
    k: int
    s: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.num, self.s**self.k)

    def rescale(self, k: int) -> "ScaledExact":
        if k < self.k:
            raise ValueError("can only lift to a larger log-scale")
        return ScaledExact(self.num * self.s ** (k - self.k), k, self.s)

    def __add__(self, other: "ScaledExact") -> "ScaledExact":
        k = max(self.k, other.k)
        return ScaledExact(self.rescale(k).num + other.rescale(k).num, k, self.s)

    def __mul__(self, other: "ScaledExact") -> "ScaledExact":
        return ScaledExact(self.num * other.num, self.k + other.k, self.s)

    def __str__(self) -> str:
        return f"{self.num}/{self.s}^{self.k}"


@dataclass(frozen=True, order=True)
class FxNum:
    """A multiple of 1/s.  Grid-bounded only if ``fmt.p`` is finite and the caller checks."""

    num: int
    fmt: FxFormat

    @property
    def value(self) -> Fraction:
        return Fraction(self.num, self.fmt.s)

    @property
    def exact(self) -> ScaledExact:
        return ScaledExact(self.num, 1, self.fmt.s)

    def on_grid(self) -> bool:
        return self.fmt.contains(self.num)

    def __str__(self) -> str:
        return f"{self.num}/{self.fmt.s}^1"

    @classmethod
    def parse(cls, text: str, fmt: FxFormat) -> "FxNum":
        se = parse_scaled(text)
        if se.s != fmt.s and se.k:
            raise ValueError(f"scale mismatch in {text!r}")
        v = se.value * fmt.s
        if v.denominator != 1:
            raise ValueError(f"{text!r} is not a multiple of 1/{fmt.s}")
        return cls(int(v), fmt)


def parse_scaled(text: str) -> ScaledExact:
    m = re.fullmatch(r"\s*(-?\d+)\s*/\s*(\d+)\s*\^\s*(\d+)\s*", text)
    if not m:
        raise ValueError(f"bad exact number {text!r}")
    return ScaledExact(int(m.group(1)), int(m.group(3)), int(m.group(2)))


# ---------------------------------------------------------------- rounding

def round_half_away(n: int, d: int) -> int:
    """Nearest integer to n/d (d > 0), ties away from zero."""
    q = (2 * abs(n) + d) // (2 * d)
    return q if n >= 0 else -q


def round_num(num: int, k: int, s: int, qmax_num: int) -> int:
    """Round num/s**k onto Q_{p,s}; returns the numerator over s."""
    if k == 0:
        r = num * s
    else:
        r = round_half_away(num, s ** (k - 1))
    return max(-qmax_num, min(qmax_num, r))


def round_to(fmt: FxFormat, v) -> FxNum:
    """Nearest element of Q_{p,s}; ties go to the larger magnitude, then saturate."""
    if not fmt.finite:
        raise ValueError("round_to needs a finite p")
    if isinstance(v, FxNum):
        v = v.exact
    if isinstance(v, ScaledExact):
        if v.s != fmt.s:
            v = v.value
        else:
            return FxNum(round_num(v.num, v.k, v.s, fmt.qmax_num), fmt)
    v = Fraction(v) * fmt.s
    r = round_half_away(v.numerator, v.denominator)
    return FxNum(max(-fmt.qmax_num, min(fmt.qmax_num, r)), fmt)


def affine_exact(weights: Sequence[int], bias: int, inputs: Sequence[int], s: int) -> int:
    """b + sum w_i x_i as a numerator over s**2 (all arguments numerators over s)."""
    if len(weights) != len(inputs):
        raise ValueError(f"{len(weights)} weights for {len(inputs)} inputs")
    return bias * s + sum(w * x for w, x in zip(weights, inputs))


def affine_round(fmt: FxFormat, weights: Sequence[FxNum], bias: FxNum,
                 inputs: Sequence[FxNum]) -> FxNum:
    acc = affine_exact([w.num for w in weights], bias.num, [x.num for x in inputs], fmt.s)
    return FxNum(round_num(acc, 2, fmt.s, fmt.qmax_num), fmt)


# ---------------------------------------------------------- floor / ceil

def _as_interval(v) -> tuple[Fraction, Fraction]:
    if isinstance(v, tuple):
        return Fraction(v[0]), Fraction(v[1])
    if isinstance(v, float):
        v = Fraction(str(v))
    elif isinstance(v, (ScaledExact, FxNum)):
        v = v.value
    v = Fraction(v)
    return v, v


def floor_grid(s: int, v) -> FxNum:
    """Largest multiple of 1/s not above v.  ``v`` may be an enclosure (lo, hi)."""
    lo, hi = _as_interval(v)
    a, b = math.floor(lo * s), math.floor(hi * s)
    if a != b:
        raise Unresolved(f"floor cell of [{lo}, {hi}] undecided")
    return FxNum(a, FxFormat(None, s))


def ceil_grid(s: int, v) -> FxNum:
    lo, hi = _as_interval(v)
    a, b = math.ceil(lo * s), math.ceil(hi * s)
    if a != b:
        raise Unresolved(f"ceil cell of [{lo}, {hi}] undecided")
    return FxNum(a, FxFormat(None, s))


def grid_values(fmt: FxFormat) -> Iterable[FxNum]:
    return (FxNum(k, fmt) for k in fmt.grid())
