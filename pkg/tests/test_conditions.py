import json
from fractions import Fraction

import pytest

from quantua.activations import MetadataMissing, QuantTable, get_activation, tabulate
from quantua.conditions import (EXIT_CODES, NOT_UNIVERSAL, UNIVERSAL, UNKNOWN, Condition1Witness,
                                analyze_table, check_condition1, check_condition2, check_fixed_item,
                                check_necessity_divisor, check_sufficiency_items, verdict,
                                verify_condition1)
from quantua.fxp import FxFormat


def test_condition1_relu():
    fmt = FxFormat(4, 3)
    t = tabulate(get_activation("relu"), fmt)
    w = check_condition1(t)
    assert w == Condition1Witness(1, 1, 15) and verify_condition1(t, w)


def test_condition1_reflection_needed():
    fmt = FxFormat(3, 2)
    # decreasing table: max attained on the left half-line only
    t = QuantTable("dec", fmt, tuple(max(-k, 0) for k in fmt.grid()))
    w = check_condition1(t)
    assert (w.alpha, w.beta) == (1, -1) and verify_condition1(t, w)


def test_condition1_fails_on_constant_and_bump():
    fmt = FxFormat(3, 2)
    assert check_condition1(QuantTable("c", fmt, (3,) * fmt.size)) is None
    bump = QuantTable("b", fmt, tuple(3 if k == 0 else 0 for k in fmt.grid()))
    assert check_condition1(bump) is None


def test_divisor():
    f = FxFormat(3, 1)
    assert check_necessity_divisor(tabulate(get_activation("hardtanh5s", f), f)) == 5
    assert check_necessity_divisor(tabulate(get_activation("relu"), f)) is None
    # r = 3 needs even p: entries all multiples of 3 at p = 3 do not qualify
    t = QuantTable("three", f, tuple(3 * (k > 0) for k in f.grid()))
    assert check_necessity_divisor(t) is None
    f4 = FxFormat(4, 1)
    t4 = QuantTable("three", f4, tuple(3 * (k > 0) for k in f4.grid()))
    assert check_necessity_divisor(t4) == 3


@pytest.mark.parametrize("name", ["silu", "mish", "gelu"])
@pytest.mark.parametrize("s", [3, 4, 8])
def test_item4_smooth(name, s):
    assert 4 in check_sufficiency_items(get_activation(name), FxFormat(6, s), items=[4])


@pytest.mark.parametrize("name", ["relu", "elu"])
def test_item4_piecewise_linear_fails_strict_bound(name):
    # sigma' = 1 on (0, 2/s) while the item needs sigma' < 1
    fmt = FxFormat(5, 4)
    items = check_sufficiency_items(get_activation(name), fmt)
    assert 4 not in items and 5 in items


def test_items_6_7():
    fmt = FxFormat(5, 3)
    assert check_fixed_item(6, get_activation("softplus"), fmt)
    assert check_fixed_item(7, get_activation("sigmoid"), fmt)
    assert not check_fixed_item(6, get_activation("sigmoid"), fmt)


def test_items_need_p3():
    assert check_sufficiency_items(get_activation("relu"), FxFormat(2, 2)) == {}


def test_item_certificate_values():
    c = check_fixed_item(4, get_activation("gelu"), FxFormat(5, 3))
    assert (c.q1, c.q2) == (0, 2) and 0.5 <= c.d1_inf and c.d1_sup < 1


def test_condition2():
    fmt = FxFormat(5, 3)
    assert check_condition2(get_activation("relu"), fmt).holds
    assert check_condition2(get_activation("relu"), fmt).subitem == 2
    assert check_condition2(get_activation("gelu"), fmt).subitem == 1
    assert not check_condition2(get_activation("sigmoid"), fmt).holds
    from quantua.activations import ActivationSpec
    with pytest.raises(MetadataMissing):
        check_condition2(ActivationSpec("bare", "exact", lambda x: x), fmt)


@pytest.mark.parametrize("name,p,s,want", [
    ("relu", 4, 3, UNIVERSAL), ("gelu", 4, 4, UNIVERSAL), ("identity", 3, 1, UNIVERSAL),
    ("hardtanh5s", 3, 1, NOT_UNIVERSAL), ("hardtanh5s", 4, 1, NOT_UNIVERSAL),
])
def test_verdicts(name, p, s, want):
    fmt = FxFormat(p, s)
    rep = verdict(get_activation(name, fmt), fmt)
    assert rep.verdict == want
    assert rep.exit_code == EXIT_CODES[want]
    json.dumps(rep.to_json())


def test_not_universal_reports_missing_residues():
    fmt = FxFormat(3, 1)
    rep = verdict(get_activation("hardtanh5", fmt), fmt, binary=True)
    assert rep.verdict == NOT_UNIVERSAL and rep.divisor_r == 5
    assert set(rep.sets["BN_missing"]) == {"0", "1", "-1", "2", "-2"}


def test_unknown_verdict():
    # range {0, 1, 2} is full-span but the table never saturates on a half-line
    fmt = FxFormat(3, 1)
    vals = tuple((k % 3) for k in fmt.grid())
    rep = analyze_table(QuantTable("saw", fmt, vals))
    assert rep.verdict == UNKNOWN
    assert "no derivative metadata" in rep.notes[0]
