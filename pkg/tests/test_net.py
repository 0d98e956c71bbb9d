from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantua.activations import QuantTable, get_activation, tabulate
from quantua.fxp import FxFormat
from quantua.net import (AffineNeuron, BudgetExceeded, QuantizedNet, RealNet, RealNeuron, eval, eval_grid,
                         eval_grid_dict, eval_real_net, eval_reference, expand_multiset,
                         expanded_param_count, forward, grid_points, load_net, param_count,
                         quantize_net, save_net)

FMT = FxFormat(3, 2)


@st.composite
def nets(draw, fmt=FMT, max_width=4, binary=False):
    q = fmt.qmax_num
    vals = tuple(draw(st.lists(st.integers(-q, q), min_size=fmt.size, max_size=fmt.size)))
    table = QuantTable("rand", fmt, vals)
    d = draw(st.integers(1, 3))
    depth = draw(st.integers(1, 3))
    widths = [d] + [draw(st.integers(1, max_width)) for _ in range(depth - 1)] + [1]
    wgen = st.sampled_from([-fmt.s, fmt.s]) if binary else st.integers(-q, q)
    layers = []
    for a, b in zip(widths, widths[1:]):
        layer = []
        for _ in range(b):
            k = draw(st.integers(0, 4))
            terms = [(draw(st.integers(0, a - 1)), draw(wgen), draw(st.integers(1, 3))) for _ in range(k)]
            layer.append(AffineNeuron.from_terms(terms, draw(st.integers(-40, 40))))
        layers.append(tuple(layer))
    return QuantizedNet(fmt, table, tuple(layers), d, binary)


@given(nets())
def test_forward_matches_reference_interpreter(net):
    X = grid_points(net.fmt, net.d)[:, ::7]
    out, _ = forward(net, X)
    for j in range(X.shape[1]):
        assert out[j] == eval_reference(net, X[:, j]).num


@given(nets())
def test_expand_multiset_equivalent(net):
    try:
        flat = expand_multiset(net)
    except ValueError:
        return  # merged first-layer weight left Q_{p,s}
    for layer in flat.layers[1:]:
        for n in layer:
            assert len(set(n.indices)) == len(n.indices)
    assert param_count(flat) == expanded_param_count(net)
    X = grid_points(net.fmt, net.d)[:, ::5]
    assert np.array_equal(forward(net, X)[0], forward(flat, X)[0])


@given(nets())
def test_text_roundtrip(net):
    import tempfile, pathlib
    with tempfile.TemporaryDirectory() as td:
        path = pathlib.Path(td) / "n.qnet"
        save_net(net, path)
        back = load_net(path)
    assert back.layers == net.layers and back.d == net.d and back.table.values == net.table.values


def test_wide_path_matches_int64():
    fmt = FxFormat(3, 2)
    table = tabulate(get_activation("relu"), fmt)
    big = 2**70
    layers = ((AffineNeuron((0,), (2,), big),), (AffineNeuron((0,), (1,), -big // 2),))
    net = QuantizedNet(fmt, table, layers, 1)
    out, Z = forward(net, np.array([[3]]))
    assert Z.dtype == object
    assert out[0] == eval_reference(net, [3]).num


def test_param_count_and_copies():
    fmt = FxFormat(3, 2)
    t = tabulate(get_activation("relu"), fmt)
    l1 = (AffineNeuron((0,), (2,), 0), AffineNeuron((0,), (-2,), 1))
    l2 = (AffineNeuron((0, 1), (2, 2), 0, (3, 1)),)
    net = QuantizedNet(fmt, t, (l1, l2), 1)
    assert param_count(net) == 2 + 2 + 1 + 4
    # neuron 0 is referenced 3 times, so set form needs 3 copies of it
    assert expanded_param_count(net) == 3 * 2 + 2 + 5


def test_validation_errors():
    t = tabulate(get_activation("relu"), FMT)
    with pytest.raises(ValueError):
        QuantizedNet(FMT, t, ((AffineNeuron((0,), (1,)), AffineNeuron((0,), (1,))),), 1)
    with pytest.raises(ValueError):
        QuantizedNet(FMT, t, ((AffineNeuron((1,), (1,)),),), 1)
    with pytest.raises(ValueError):
        QuantizedNet(FMT, t, ((AffineNeuron((0,), (99,)),),), 1)
    with pytest.raises(ValueError):
        QuantizedNet(FMT, t, ((AffineNeuron((0,), (1,)),),), 1, binary=True)
    with pytest.raises(ValueError):
        eval(QuantizedNet(FMT, t, ((AffineNeuron((0,), (2,)),),), 1), [99])


def test_eval_grid_budget_and_dict():
    t = tabulate(get_activation("identity"), FMT)
    net = QuantizedNet(FMT, t, ((AffineNeuron((0, 1), (2, 2)),),), 2)
    with pytest.raises(BudgetExceeded):
        next(eval_grid(net, budget=10))
    table = eval_grid_dict(net)
    assert len(table) == FMT.size**2
    assert table[(1, 2)] == 3 and table[(7, 7)] == 7


def test_quantize_real_net():
    real = RealNet(((RealNeuron((0,), (Fraction(1, 3),), Fraction(1, 5)),), (RealNeuron((0,), (Fraction(1),)),)),
                   1, lambda v: max(v, Fraction(0)))
    assert eval_real_net(real, [3]) == Fraction(6, 5)
    q = quantize_net(real, FMT, tabulate(get_activation("relu"), FMT))
    assert q.layers[0][0].weights == (1,) and q.layers[0][0].bias == 0
    assert eval(q, [6]).num == 3  # 1/2 * 3 rounds to 3/2
