from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from quantua.fxp import (FxFormat, FxNum, ScaledExact, Unresolved, affine_exact, affine_round,
                         ceil_grid, floor_grid, parse_scaled, round_half_away, round_num, round_to)


def oracle_round(v: Fraction, fmt: FxFormat) -> int:
    """Round half away from zero via floor on |v|, then saturate."""
    t = abs(v) * fmt.s
    n = int(t + Fraction(1, 2)) if t - int(t) != Fraction(1, 2) else int(t) + 1
    n = n if v >= 0 else -n
    return max(-fmt.qmax_num, min(fmt.qmax_num, n))


formats = st.tuples(st.integers(1, 8), st.integers(1, 8)).filter(lambda ps: 2**ps[0] - 1 >= ps[1]) \
    .map(lambda ps: FxFormat(*ps))


def test_format_basics():
    f = FxFormat(3, 2)
    assert f.q_max == Fraction(7, 2) and f.size == 15
    assert list(f.grid())[:2] == [-7, -6]
    assert FxFormat.parse("p=3,s=2") == f and str(f) == "p=3,s=2"
    assert FxFormat.parse("p=inf,s=4") == FxFormat(None, 4)
    with pytest.raises(ValueError):
        FxFormat(2, 4)  # q_max < 1
    with pytest.raises(ValueError):
        FxFormat(3, 0)


def test_ties_away_from_zero():
    f = FxFormat(3, 2)
    assert round_to(f, Fraction(1, 4)).num == 1
    assert round_to(f, Fraction(-1, 4)).num == -1
    assert round_to(f, Fraction(3, 4)).num == 2
    assert round_to(f, 100).num == 7 and round_to(f, -100).num == -7


def test_round_num_scales():
    assert round_num(5, 0, 3, 100) == 15
    assert round_num(5, 1, 3, 100) == 5
    assert round_num(5, 2, 3, 100) == 2   # 5/9 -> 2/3
    assert round_num(-3, 2, 2, 100) == -2  # -3/4 -> -1 (tie away)


@given(formats, st.fractions(max_denominator=500).filter(lambda v: abs(v) < 300))
def test_round_matches_oracle(fmt, v):
    assert round_to(fmt, v).num == oracle_round(v, fmt)


@given(formats, st.fractions(max_denominator=200).filter(lambda v: abs(v) < 50))
def test_round_properties(fmt, v):
    r = round_to(fmt, v)
    assert round_to(fmt, r.value) == r  # idempotent
    assert round_to(fmt, -v).num == -r.num  # odd
    if abs(v) <= fmt.q_max:
        assert abs(r.value - v) <= Fraction(1, 2 * fmt.s)


@given(formats, st.fractions(max_denominator=100), st.fractions(max_denominator=100))
def test_round_monotone(fmt, a, b):
    if a <= b:
        assert round_to(fmt, a) <= round_to(fmt, b)


@given(st.integers(-10**6, 10**6), st.integers(1, 10**4))
def test_round_half_away(n, d):
    q = round_half_away(n, d)
    assert abs(Fraction(n, d) - q) <= Fraction(1, 2)
    if abs(Fraction(n, d) - q) == Fraction(1, 2):
        assert abs(q) > abs(Fraction(n, d))


@given(formats, st.data())
def test_affine_round_single_rounding(fmt, data):
    k = data.draw(st.integers(0, 6))
    g = st.integers(-fmt.qmax_num, fmt.qmax_num)
    ws = [FxNum(data.draw(g), fmt) for _ in range(k)]
    xs = [FxNum(data.draw(g), fmt) for _ in range(k)]
    b = FxNum(data.draw(st.integers(-10**4, 10**4)), fmt)
    exact = b.value + sum((w.value * x.value for w, x in zip(ws, xs)), Fraction(0))
    assert affine_round(fmt, ws, b, xs).num == oracle_round(exact, fmt)
    assert Fraction(affine_exact([w.num for w in ws], b.num, [x.num for x in xs], fmt.s),
                    fmt.s**2) == exact


def test_affine_length_mismatch():
    with pytest.raises(ValueError):
        affine_exact([1, 2], 0, [1], 2)


def test_scaled_exact_and_parse():
    a = ScaledExact(3, 1, 4)
    b = ScaledExact(5, 2, 4)
    assert (a + b).value == Fraction(3, 4) + Fraction(5, 16)
    assert (a * b).value == Fraction(15, 64)
    assert parse_scaled(str(b)) == b
    f = FxFormat(4, 4)
    assert FxNum.parse("3/4^1", f) == FxNum(3, f)
    assert str(FxNum(-3, f)) == "-3/4^1"
    with pytest.raises(ValueError):
        parse_scaled("3/4")


def test_floor_ceil():
    assert floor_grid(3, Fraction(5, 6)).num == 2
    assert ceil_grid(3, Fraction(5, 6)).num == 3
    assert floor_grid(3, Fraction(-5, 6)).num == -3
    assert floor_grid(4, 0.3).num == 1
    assert ceil_grid(3, (Fraction(1, 2), Fraction(6, 10))).num == 2
    with pytest.raises(Unresolved):
        floor_grid(3, (Fraction(32, 100), Fraction(34, 100)))


def test_unbounded_format():
    f = FxFormat(None, 3)
    assert f.contains(10**30)
    with pytest.raises(ValueError):
        _ = f.qmax_num
