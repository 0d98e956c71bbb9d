import pytest
from hypothesis import given, strategies as st

from quantua import reach
from quantua.activations import QuantTable, get_activation, tabulate
from quantua.fxp import FxFormat


@st.composite
def tables(draw):
    p = draw(st.integers(2, 4))
    s = draw(st.integers(1, min(4, 2**p - 1)))
    fmt = FxFormat(p, s)
    q = fmt.qmax_num
    k = draw(st.integers(1, 4))
    pool = draw(st.lists(st.integers(-q, q), min_size=k, max_size=k))
    vals = tuple(draw(st.sampled_from(pool)) for _ in range(fmt.size))
    return QuantTable("rand", fmt, vals)


@given(tables(), st.integers(-3, 3), st.sampled_from([reach.GENERAL, reach.BINARY]),
       st.booleans())
def test_lattice_matches_brute_force(table, b, mode, use_v):
    gens = reach.compute_V(table).members if use_v else table.range_nums
    lat = reach.reach_lattice(gens, mode, b, table.fmt)
    q = table.fmt.qmax_num
    bf = reach.brute_force_reach(gens, mode, b, table.fmt, n_max=6, budget=10**8)
    assert set(bf.members) <= set(lat.members)
    if q <= 7:
        # 2q + |b| + 2 terms span the whole grid window, so every lattice point is hit
        bf = reach.brute_force_reach(gens, mode, b, table.fmt, n_max=2 * q + abs(b) + 2, budget=10**8)
        assert set(bf.members) == set(lat.members)


def test_V_symmetric_and_contains_zero():
    t = tabulate(get_activation("gelu"), FxFormat(4, 3))
    V = reach.compute_V(t).members
    assert 0 in V and all(-v in V for v in V)


@pytest.mark.parametrize("p", range(1, 9))
@pytest.mark.parametrize("s", range(1, 9))
def test_identity_S_full(p, s):
    if 2**p - 1 < s:
        return
    fmt = FxFormat(p, s)
    t = tabulate(get_activation("identity"), fmt)
    assert reach.S_set(t, 0).full


def test_hardtanh_N_residues():
    fmt = FxFormat(3, 1)
    t = tabulate(get_activation("hardtanh5s", fmt), fmt)
    scan = reach.scan_bias(t, "N")
    assert not scan.found and scan.period == 5
    assert scan.scanned == (0, 1, -1, 2, -2)
    assert scan.missing[0] == [k for k in fmt.grid() if k % 5 and abs(k) != 7]


def test_constant_table_scans_once():
    fmt = FxFormat(3, 2)
    t = QuantTable("zero", fmt, (0,) * fmt.size)
    scan = reach.scan_bias(t, "S")
    assert scan.scanned == (0,) and not scan.found


def test_reachset_json_and_missing():
    fmt = FxFormat(3, 1)
    t = tabulate(get_activation("relu"), fmt)
    rs = reach.N_set(t, 0)
    js = rs.to_json()
    assert js["size"] == len(rs) and js["lattice"]["step"] == 1
    assert rs.full and rs.missing() == []


def test_budget_guard():
    fmt = FxFormat(6, 1)
    with pytest.raises(reach.CombinatorialBudget):
        reach.brute_force_reach(range(1, 60), reach.GENERAL, 0, fmt, n_max=6, budget=1000)


def test_bias_period():
    fmt = FxFormat(4, 2)
    t = QuantTable("even", fmt, tuple(6 * (k % 2) for k in fmt.grid()))
    assert reach.bias_period(t, "N") == 3   # gcd 6 over scale 2
    assert reach.bias_period(t, "BN") == 6
