"""Writing a target gamma as sum_j w_j v_j with v_j differences of table values."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..activations import QuantTable
from ..reach import _gcd, compute_V
from .bezout import bezout_multi

GENERAL, BINARY, FOUR_TERM = "general", "binary", "four_term"


class NotRepresentable(ValueError):
    def __init__(self, gamma, step, note=""):
        super().__init__(f"gamma={gamma} is not representable (lattice step {step}){note}")
        self.gamma = gamma
        self.step = step


@dataclass(frozen=True)
class Term:
    weight: int  # numerator over s
    v: int       # numerator over s, equals table(v1) - table(v2)
    v1: int
    v2: int
    count: int = 1


@dataclass(frozen=True)
class GammaDecomposition:
    gamma: Fraction
    mode: str
    terms: tuple
    step: int = 0

    @property
    def n(self) -> int:
        return sum(t.count for t in self.terms)

    def total(self, s: int) -> Fraction:
        return Fraction(sum(t.weight * t.v * t.count for t in self.terms), s * s)

    def check(self, table: QuantTable) -> bool:
        s = table.fmt.s
        return (self.total(s) == self.gamma and
                all(table(t.v1) - table(t.v2) == t.v for t in self.terms))


def realizing_pairs(table: QuantTable) -> dict:
    """v -> (v1, v2) with table(v1) - table(v2) = v, smallest v1 then smallest v2."""
    first = {}
    for x in table.fmt.grid():
        first.setdefault(table(x), x)
    pairs = {}
    for a in sorted(first):
        for b in sorted(first):
            pairs.setdefault(a - b, (first[a], first[b]))
    return pairs


def gamma_count_bound(p: int, s: int) -> int:
    return 4 * s * (2 ** (p + 2) - 3) * (2 ** p - 1)


def _split_weight(c: int, qn: int) -> list[int]:
    """Write c as one or two weights of magnitude <= qn."""
    if abs(c) <= qn:
        return [c]
    h = c // 2
    if max(abs(h), abs(c - h)) > qn:
        raise ValueError(f"coefficient {c} needs more than two weights")
    return [h, c - h]


def _merge(terms) -> tuple:
    acc: dict = {}
    for t in terms:
        k = (t.weight, t.v, t.v1, t.v2)
        acc[k] = acc.get(k, 0) + t.count
    return tuple(Term(*k, c) for k, c in sorted(acc.items()) if c)


def decompose_gamma(table: QuantTable, gamma, mode: str = GENERAL) -> GammaDecomposition:
    """Express gamma with general weights, +-1 weights, or at most four a-terms."""
    gamma = Fraction(gamma)
    fmt = table.fmt
    s, qn = fmt.s, fmt.qmax_num
    if mode == FOUR_TERM:
        return _four_term(table, gamma)
    gens = sorted(v for v in compute_V(table).members if v > 0)
    d = _gcd(gens)
    scale = s * s if mode == GENERAL else s
    g0 = gamma * scale
    if g0 == 0:
        return GammaDecomposition(gamma, mode, (), d)
    if g0.denominator != 1 or d == 0 or g0.numerator % d:
        raise NotRepresentable(gamma, d, f" at scale s^{2 if mode == GENERAL else 1}")
    reps = g0.numerator // d
    sign = 1 if reps > 0 else -1
    reps = abs(reps)
    pairs = realizing_pairs(table)
    cs = bezout_multi(gens)
    terms = []
    for c, x in zip(cs, gens):
        if c == 0:
            continue
        v1, v2 = pairs[x]
        if mode == GENERAL:
            for w in _split_weight(sign * c, qn):
                terms.append(Term(w, x, v1, v2, reps))
        elif mode == BINARY:
            w = s if sign * c > 0 else -s
            terms.append(Term(w, x, v1, v2, reps * abs(c)))
        else:
            raise ValueError(mode)
    return GammaDecomposition(gamma, mode, _merge(terms), d)


# ------------------------------------------------------------ four terms

def a_sequence(table: QuantTable) -> list[int]:
    """a_i = s*(sigma(q_max) - sigma(i/s)) for i = 0..2^p-1, as numerators over s."""
    q = table.fmt.qmax_num
    top = table(q)
    return [top - table(i) for i in range(q + 1)]


def number_lemma_hypotheses(a) -> bool:
    """Non-increasing, gaps <= 2, some unit gap, last term 0."""
    gaps = [x - y for x, y in zip(a, a[1:])]
    return bool(a) and a[-1] == 0 and all(0 <= g <= 2 for g in gaps) and 1 in gaps


def four_term_indices(a, T: int) -> list[tuple[int, int]]:
    """Signed indices (sign, i) with sum sign*a_i = T, at most four of them.

    Requires the number-lemma hypotheses and |T| <= 2*a_0 + 1.
    """
    if T < 0:
        return [(-e, i) for e, i in four_term_indices(a, -T)]
    if T > 2 * a[0] + 1:
        raise ValueError(f"{T} exceeds 2*a_0 + 1 = {2 * a[0] + 1}")
    kappa = next(i for i in range(len(a) - 1) if a[i] - a[i + 1] == 1)
    unit = {1: [(1, kappa), (-1, kappa + 1)], -1: [(-1, kappa), (1, kappa + 1)]}

    def near(t):
        # a covers [0, a_0] with gaps <= 2, so some a_c is within 1 of t
        c = min(range(len(a)), key=lambda i: (abs(a[i] - t), i))
        return [(1, c)] + (unit[t - a[c]] if t != a[c] else [])

    if T <= a[0]:
        return [] if T == 0 else near(T)
    rest = T - a[0]
    if rest == a[0] + 1:
        return [(1, 0), (1, 0)] + unit[1]
    return [(1, 0)] + near(rest)


def _four_term(table: QuantTable, gamma: Fraction) -> GammaDecomposition:
    fmt = table.fmt
    s, q = fmt.s, fmt.qmax_num
    T = gamma * s
    if T.denominator != 1:
        raise NotRepresentable(gamma, 1, " (not on the 1/s grid)")
    a = a_sequence(table)
    if not number_lemma_hypotheses(a):
        raise NotRepresentable(gamma, 1, " (a-sequence violates the number-lemma hypotheses)")
    if abs(T) > 2 * a[0] + 1:
        raise NotRepresentable(gamma, 1, f" (|s*gamma| exceeds 2*a_0 + 1 = {2 * a[0] + 1})")
    terms = [Term(e * s, a[i], q, i) for e, i in four_term_indices(a, int(T))]
    return GammaDecomposition(gamma, FOUR_TERM, _merge(terms), 1)
