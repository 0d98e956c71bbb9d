"""Reachable sets V, S, N and their +-1-weight analogues BS, BN.

All unrounded sums b + sum w_i x_i with unbounded term count form a coset
of a gcd lattice, so every set is computed from (offset, step) exactly.  A
brute-force enumerator over bounded term counts is kept as an oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

from .activations import QuantTable
from .fxp import FxFormat, round_num

GENERAL, BINARY = "general", "binary"


class CombinatorialBudget(RuntimeError):
    pass


@dataclass(frozen=True)
class Lattice:
    """The coset {(offset + m*step) / s**k : m in Z}."""

    offset: int
    step: int
    k: int
    s: int


@dataclass(frozen=True)
class ReachSet:
    fmt: FxFormat
    kind: str
    members: tuple  # sorted numerators over s
    lattice: Lattice | None = None

    @property
    def full(self) -> bool:
        return len(self.members) == self.fmt.size

    def missing(self) -> list[int]:
        have = set(self.members)
        return [k for k in self.fmt.grid() if k not in have]

    def __len__(self):
        return len(self.members)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "format": str(self.fmt), "size": len(self.members),
               "members": list(self.members)}
        if self.lattice:
            L = self.lattice
            out["lattice"] = {"offset": L.offset, "step": L.step, "scale_exp": L.k}
        return out


def _gcd(nums) -> int:
    return reduce(math.gcd, (abs(v) for v in nums), 0)


def compute_V(table: QuantTable) -> ReachSet:
    r = table.range_nums
    diffs = sorted({a - b for a in r for b in r})
    return ReachSet(table.fmt, "V", tuple(diffs))


def lattice_of(generators, mode: str, b_num: int, fmt: FxFormat) -> Lattice:
    d = _gcd(generators)
    if mode == GENERAL:
        # weights run over multiples of 1/s including 1/s itself
        return Lattice(b_num * fmt.s, d, 2, fmt.s)
    if mode == BINARY:
        return Lattice(b_num, d, 1, fmt.s)
    raise ValueError(mode)


def lattice_members(L: Lattice, fmt: FxFormat) -> tuple:
    q = fmt.qmax_num
    if L.step == 0:
        return (round_num(L.offset, L.k, L.s, q),)
    D = L.s ** (L.k - 1)
    bound = q * D + D
    lo = -((bound + L.offset) // L.step)
    hi = (bound - L.offset) // L.step
    out = {round_num(L.offset + m * L.step, L.k, L.s, q) for m in range(lo - 1, hi + 2)}
    out |= {-q, q}  # the coset is unbounded in both directions
    return tuple(sorted(out))


def reach_lattice(generators, mode: str, b_num: int, fmt: FxFormat, kind: str = "") -> ReachSet:
    L = lattice_of(generators, mode, b_num, fmt)
    return ReachSet(fmt, kind or f"{mode}-lattice", lattice_members(L, fmt), L)


def brute_force_reach(generators, mode: str, b_num: int, fmt: FxFormat, n_max: int = 6,
                      budget: int = 5 * 10**7) -> ReachSet:
    """Round every sum with at most n_max terms; the oracle for ``reach_lattice``."""
    s, q = fmt.s, fmt.qmax_num
    gens = set(generators)
    if mode == GENERAL:
        prods = {w * x for w in fmt.grid() for x in gens}
        base, k = b_num * s, 2
    else:
        prods = {w * x for w in (-1, 1) for x in gens}
        base, k = b_num, 1
    sums = frontier = {0}
    work = 0
    for _ in range(n_max):
        work += len(frontier) * len(prods)
        if work > budget:
            raise CombinatorialBudget(f"brute force needs more than {budget} steps")
        frontier = {a + p for a in frontier for p in prods} - sums
        if not frontier:
            break
        sums = sums | frontier
    members = sorted({round_num(base + v, k, s, q) for v in sums})
    return ReachSet(fmt, f"{mode}-brute", tuple(members))


def N_set(table: QuantTable, b_num: int = 0) -> ReachSet:
    return reach_lattice(table.range_nums, GENERAL, b_num, table.fmt, "N")


def S_set(table: QuantTable, b_num: int = 0) -> ReachSet:
    return reach_lattice(compute_V(table).members, GENERAL, b_num, table.fmt, "S")


def BN_set(table: QuantTable, b_num: int = 0) -> ReachSet:
    return reach_lattice(table.range_nums, BINARY, b_num, table.fmt, "BN")


def BS_set(table: QuantTable, b_num: int = 0) -> ReachSet:
    return reach_lattice(compute_V(table).members, BINARY, b_num, table.fmt, "BS")


SET_FUNCS = {"N": N_set, "S": S_set, "BN": BN_set, "BS": BS_set}


def bias_period(table: QuantTable, kind: str) -> int:
    """Number of bias numerators after which the coset repeats."""
    gens = table.range_nums if kind in ("N", "BN") else compute_V(table).members
    d = _gcd(gens)
    if d == 0:
        return 1
    if kind in ("N", "S"):
        return d // math.gcd(d, table.fmt.s)
    return d


@dataclass(frozen=True)
class BiasScan:
    kind: str
    witness: int | None  # bias numerator over s
    scanned: tuple
    period: int
    missing: dict  # b -> grid numerators not reached

    @property
    def found(self) -> bool:
        return self.witness is not None


def scan_bias(table: QuantTable, kind: str, keep_missing: bool = True) -> BiasScan:
    """Search one full residue period of biases for a b with set == Q_{p,s}.

    Biases are tried in order of increasing magnitude (0, 1, -1, 2, ...).  For
    a constant table the coset is the single point b, which can never cover
    the grid, so only b = 0 is reported.
    """
    f = SET_FUNCS[kind]
    P = bias_period(table, kind)
    cands = sorted(range(-(P // 2), P - P // 2), key=lambda b: (abs(b), b < 0))
    gens = table.range_nums if kind in ("N", "BN") else compute_V(table).members
    if _gcd(gens) == 0:
        cands = [0]
    missing = {}
    scanned = []
    for b in cands:
        rs = f(table, b)
        scanned.append(b)
        if rs.full:
            return BiasScan(kind, b, tuple(scanned), P, missing)
        if keep_missing:
            missing[b] = rs.missing()
    return BiasScan(kind, None, tuple(scanned), P, missing)
