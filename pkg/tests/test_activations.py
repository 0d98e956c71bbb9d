from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from quantua.activations import (REFERENCE_BOUNDS, ZOO_NAMES, MetadataMissing, QuantTable, TieUnresolved,
                                 audit_derivative_bounds, derivative_bounds, eval_real, get_activation,
                                 mpf_to_fraction, reference_quantity, round_activation, table_for,
                                 tabulate, value_bounds)
from quantua.fxp import FxFormat


def test_mpf_to_fraction_keeps_sign():
    assert mpf_to_fraction(mpmath.mpf(-0.5)) == Fraction(-1, 2)
    assert mpf_to_fraction(mpmath.mpf(3)) == 3
    assert mpf_to_fraction(mpmath.mpf(0)) == 0


@pytest.mark.parametrize("name,x,want", [
    ("relu", Fraction(-3, 2), 0), ("relu", Fraction(5, 4), Fraction(5, 4)),
    ("leaky_relu", Fraction(-1), Fraction(-1, 100)), ("identity", Fraction(7, 3), Fraction(7, 3)),
    ("hardtanh", Fraction(1, 2), Fraction(1, 2)), ("hardtanh", Fraction(3), 1),
    ("sigmoid", Fraction(0), Fraction(1, 2)), ("gelu", Fraction(0), 0), ("elu", Fraction(2), 2),
])
def test_exact_values(name, x, want):
    lo, hi = eval_real(get_activation(name), x, 64)
    assert lo == hi == want


@pytest.mark.parametrize("name,x,ref", [
    ("sigmoid", 1, lambda x: 1 / (1 + mpmath.e**-x)), ("softplus", -2, lambda x: mpmath.log1p(mpmath.e**x)),
    ("elu", -1, lambda x: mpmath.e**x - 1), ("gelu", -1, lambda x: x * mpmath.ncdf(x)),
    ("silu", 2, lambda x: x / (1 + mpmath.e**-x)), ("mish", -1, lambda x: x * mpmath.tanh(mpmath.log1p(mpmath.e**x))),
])
def test_enclosures_contain_reference(name, x, ref):
    lo, hi = eval_real(get_activation(name), Fraction(x), 100)
    with mpmath.workprec(300):
        v = mpf_to_fraction(ref(mpmath.mpf(x)))
    assert lo <= v <= hi and hi - lo < Fraction(1, 2**90)


def test_negative_values_are_negative():
    t = tabulate(get_activation("elu"), FxFormat(4, 3))
    assert t(-15) == -3 and t(-1) == -1 and t(3) == 3


@given(st.sampled_from(["sigmoid", "silu", "gelu", "mish", "softplus", "elu"]),
       st.integers(-15, 15))
def test_round_activation_matches_high_precision(name, k):
    fmt = FxFormat(4, 3)
    act = get_activation(name)
    x = Fraction(k, 3)
    lo, hi = eval_real(act, x, 300)
    mid = (lo + hi) / 2
    want = max(-15, min(15, round(mid * 3)))  # no exact ties occur away from the exact paths
    assert round_activation(act, x, fmt) == want


def test_tie_unresolved_raised():
    # x + 1/6 at x = 0 sits exactly on the rounding boundary of Q_{3,3}
    from quantua.activations import ActivationSpec
    act = ActivationSpec("tie", "transcendental", lambda x: None, mp=lambda x: x + mpmath.mpf(1) / 6)
    with pytest.raises(TieUnresolved):
        round_activation(act, Fraction(0), FxFormat(3, 3), guard_bits=64, max_escalations=1)


def test_table_roundtrip_and_reflection(tmp_path):
    fmt = FxFormat(3, 2)
    t = tabulate(get_activation("gelu"), fmt)
    t.save(tmp_path / "g.qt")
    u = QuantTable.load(tmp_path / "g.qt")
    assert u.values == t.values and u.fmt == fmt
    assert table_for(f"table:{tmp_path / 'g.qt'}", fmt).values == t.values
    with pytest.raises(ValueError):
        table_for(f"table:{tmp_path / 'g.qt'}", FxFormat(4, 2))
    r = t.reflected(-1, -1)
    assert all(r(k) == -t(-k) for k in fmt.grid())
    with pytest.raises(ValueError):
        QuantTable("bad", fmt, (0,) * 3)


def test_hardtanh5s_needs_format():
    with pytest.raises(ValueError):
        get_activation("hardtanh5s")
    f = FxFormat(4, 2)
    t = tabulate(get_activation("hardtanh5s", f), f)
    assert t(1) == 10 and t(2) == 15 and t(0) == 0
    assert set(ZOO_NAMES) >= {"relu", "gelu", "hardtanh5"}


@pytest.mark.parametrize("row", REFERENCE_BOUNDS, ids=lambda r: f"{r[0]}-{r[1]}-{r[2]}")
def test_reference_bounds(row):
    name, qty, interval, quoted = row
    assert abs(reference_quantity(get_activation(name), qty, interval) - quoted) <= 0.01


@pytest.mark.parametrize("name", ["silu", "gelu", "mish", "softplus", "sigmoid", "elu"])
def test_derivative_bounds_survive_finite_differences(name):
    act = get_activation(name)
    for a, b in [(0, 20), (-3, 1), (-1, Fraction(2, 3))]:
        lo, hi = derivative_bounds(act, a, b)
        assert audit_derivative_bounds(act, (a, b), float(lo), float(hi), n_samples=400)["pass"]


def test_audit_catches_wrong_claim():
    act = get_activation("silu")
    assert not audit_derivative_bounds(act, (0, 20), 0.6, 1.0, n_samples=400)["pass"]


def test_value_bounds_gelu_minimum():
    lo, _ = value_bounds(get_activation("gelu"), -3, 0)
    assert abs(float(lo) + 0.17) < 0.01


def test_metadata_missing():
    from quantua.activations import ActivationSpec, critical_points
    act = ActivationSpec("bare", "exact", lambda x: x)
    with pytest.raises(MetadataMissing):
        critical_points(act, 1)
