"""Target functions on the grid: sin(3 sum x), exp(-|x|^2), seeded random tables."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from mpmath import iv, mpf

from .activations import TieUnresolved, mpf_to_fraction
from .fxp import FxFormat, round_half_away

GAUSS_LIP = Fraction(858, 1000)  # >= sqrt(2/e), the sup of |d/dr exp(-r^2)|


@dataclass(frozen=True)
class Target:
    """f* with an interval oracle (``fn``) or an exact grid table (``table``)."""

    name: str
    d: int
    lipschitz: Fraction | None = None  # w.r.t. the sup norm
    fn: Callable | None = field(default=None, compare=False)
    table: dict | None = field(default=None, compare=False)
    seed: int | None = None

    def enclosure(self, x, bits: int = 128) -> tuple[Fraction, Fraction]:
        """Interval containing f*(x) for a tuple of Fractions."""
        if self.table is not None:
            raise ValueError("table targets are only defined on their grid")
        iv.prec = bits
        y = self.fn([iv.mpf([v.numerator, v.numerator]) / v.denominator for v in x])
        lo, hi = y._mpi_
        return _raw_to_fraction(lo), _raw_to_fraction(hi)

    def rounded(self, fmt: FxFormat, x_nums, guard_bits: int = 128, escalations: int = 3) -> int:
        """Numerator of round(f*(x)) on Q_{p,s}."""
        if self.table is not None:
            return self.table[tuple(x_nums)]
        x = tuple(Fraction(v, fmt.s) for v in x_nums)
        bits = guard_bits
        for _ in range(escalations + 1):
            lo, hi = self.enclosure(x, bits)
            a, b = _round(lo, fmt), _round(hi, fmt)
            if a == b:
                return a
            bits *= 2
        raise TieUnresolved(self.name, x[0], bits)

    def value_bounds(self, fmt: FxFormat, x_nums, bits: int = 128):
        if self.table is not None:
            v = Fraction(self.table[tuple(x_nums)], fmt.s)
            return v, v
        return self.enclosure(tuple(Fraction(v, fmt.s) for v in x_nums), bits)


def _raw_to_fraction(raw) -> Fraction:
    return mpf_to_fraction(mpf(raw))


def _round(v: Fraction, fmt: FxFormat) -> int:
    t = v * fmt.s
    r = round_half_away(t.numerator, t.denominator)
    return max(-fmt.qmax_num, min(fmt.qmax_num, r))


def _sin3(xs):
    return iv.sin(3 * sum(xs[1:], xs[0]))


def _gauss(xs):
    return iv.exp(-sum((v * v for v in xs[1:]), xs[0] * xs[0]))


def _ident(xs):
    return xs[0]


def random_table(fmt: FxFormat, d: int, seed: int) -> dict:
    rng = random.Random(seed)
    q = fmt.qmax_num
    import itertools
    return {x: rng.randint(-q, q) for x in itertools.product(fmt.grid(), repeat=d)}


BUILTIN_TARGETS = ("sin3", "gauss", "randtable", "identity")


def make_target(name: str, fmt: FxFormat, d: int = 1, seed: int = 0) -> Target:
    if name == "sin3":
        return Target("sin3", d, Fraction(3 * d), _sin3)
    if name == "gauss":
        return Target("gauss", d, GAUSS_LIP * d, _gauss)
    if name == "identity":
        return Target("identity", d, Fraction(1), _ident)
    if name == "randtable":
        return Target("randtable", d, None, table=random_table(fmt, d, seed), seed=seed)
    raise ValueError(f"unknown target {name!r}; choose from {BUILTIN_TARGETS}")


def table_target(values: dict, d: int, name: str = "table") -> Target:
    return Target(name, d, None, table=dict(values))
