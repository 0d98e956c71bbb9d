"""Quantized network IR and a bit-exact evaluator.

A neuron is an affine form over the previous layer with weights in Q_{p,s}
(numerators over s) and a bias in Q_{inf,s}.  Integer multiples of an input
are encoded as repeated indices; ``counts`` stores the repetition compactly.
Hidden layers are followed by the activation table, the last layer is not.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import sparse

from .activations import QuantTable
from .fxp import FxFormat, FxNum, affine_round, round_half_away, round_num, round_to

INT64_SAFE = 2**62


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class AffineNeuron:
    indices: tuple
    weights: tuple
    bias: int = 0
    counts: tuple | None = None

    def __post_init__(self):
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights differ in length")
        if self.counts is not None and len(self.counts) != len(self.indices):
            raise ValueError("counts and indices differ in length")

    def entries(self):
        cs = self.counts or itertools.repeat(1)
        return zip(self.indices, self.weights, cs)

    @property
    def fan_in(self) -> int:
        return sum(self.counts) if self.counts else len(self.indices)

    def multiplicity(self) -> dict:
        m: dict = {}
        for i, _, c in self.entries():
            m[i] = m.get(i, 0) + c
        return m

    @classmethod
    def from_terms(cls, terms, bias: int = 0) -> "AffineNeuron":
        """Build from (index, weight, count) triples, merging equal (index, weight) pairs."""
        acc: dict = {}
        for i, w, c in terms:
            if c:
                acc[(i, w)] = acc.get((i, w), 0) + c
        keys = sorted(acc)
        cnt = tuple(acc[k] for k in keys)
        return cls(tuple(k[0] for k in keys), tuple(k[1] for k in keys), bias,
                   None if all(c == 1 for c in cnt) else cnt)


@dataclass(frozen=True)
class QuantizedNet:
    fmt: FxFormat
    table: QuantTable
    layers: tuple
    d: int
    binary: bool = False
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.table.fmt != self.fmt:
            raise ValueError("activation table format differs from network format")
        if not self.layers or len(self.layers[-1]) != 1:
            raise ValueError("the last layer must hold exactly one neuron")
        width = self.d
        q = self.fmt.qmax_num
        for l, layer in enumerate(self.layers):
            for n in layer:
                if any(not 0 <= i < width for i in n.indices):
                    raise ValueError(f"layer {l + 1} references outside 0..{width - 1}")
                if any(abs(w) > q for w in n.weights):
                    raise ValueError(f"layer {l + 1} has a weight outside Q_{{p,s}}")
                if self.binary and any(abs(w) != self.fmt.s for w in n.weights):
                    raise ValueError("binary network with a weight other than +-1")
            width = len(layer)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [self.d] + [len(l) for l in self.layers]

    @functools.cached_property
    def _compiled(self):
        return [_compile_layer(layer, width, self.fmt)
                for layer, width in zip(self.layers, self.widths[:-1])]


def _compile_layer(layer, width: int, fmt: FxFormat):
    rows, cols, vals = [], [], []
    bound = 0
    for r, n in enumerate(layer):
        tot = 0
        for i, w, c in n.entries():
            rows.append(r)
            cols.append(i)
            vals.append(w * c)
            tot += abs(w * c)
        bound = max(bound, tot * fmt.qmax_num + abs(n.bias) * fmt.s)
    bias = [n.bias * fmt.s for n in layer]
    if bound < INT64_SAFE:
        W = sparse.csr_matrix((np.asarray(vals, dtype=np.int64), (rows, cols)),
                              shape=(len(layer), width), dtype=np.int64)
        W.sum_duplicates()
        return W, np.asarray(bias, dtype=np.int64)[:, None], False
    # wide path: python integers
    return (list(zip(rows, cols, vals)), len(layer)), bias, True


def _apply(compiled, A):
    W, b, wide = compiled
    if not wide:
        return W @ A + b
    (trip, n), bias = W, b
    out = np.empty((n, A.shape[1]), dtype=object)
    for r in range(n):
        out[r, :] = bias[r]
    for r, c, v in trip:
        out[r, :] += v * A[c, :].astype(object)
    return out


def round_array(n, s: int, qmax_num: int):
    """Vectorized rounding of numerators over s**2 onto Q_{p,s} numerators."""
    if n.dtype == object:
        f = np.vectorize(lambda v: round_num(int(v), 2, s, qmax_num), otypes=[np.int64])
        return f(n)
    a = np.abs(n)
    q = (2 * a + s) // (2 * s)
    q = np.where(n < 0, -q, q)
    return np.clip(q, -qmax_num, qmax_num)


def forward(net: QuantizedNet, X: np.ndarray, keep: bool = False):
    """Evaluate columns of X (d x batch numerators).

    Returns (rounded outputs, exact output numerators over s**2[, activations]).
    """
    A = np.asarray(X, dtype=np.int64)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape[0] != net.d:
        raise ValueError(f"expected {net.d} inputs, got {A.shape[0]}")
    fmt, tab = net.fmt, net.table.array
    q = fmt.qmax_num
    acts = []
    comp = net._compiled
    for k, c in enumerate(comp):
        Z = _apply(c, A)
        if k == len(comp) - 1:
            out = round_array(Z, fmt.s, q)
            return (out[0], Z[0], acts) if keep else (out[0], Z[0])
        A = tab[round_array(Z, fmt.s, q) + q]
        if keep:
            acts.append(A)
    raise AssertionError("unreachable")


def eval(net: QuantizedNet, x: Sequence) -> FxNum:
    """Output of the network on one grid input (numerators or FxNum values)."""
    nums = [v.num if isinstance(v, FxNum) else int(v) for v in x]
    if len(nums) != net.d:
        raise ValueError(f"expected {net.d} inputs, got {len(nums)}")
    if any(abs(v) > net.fmt.qmax_num for v in nums):
        raise ValueError("input off the grid")
    out, _ = forward(net, np.asarray(nums, dtype=np.int64))
    return FxNum(int(out[0]), net.fmt)


def eval_reference(net: QuantizedNet, x: Sequence) -> FxNum:
    """Neuron-by-neuron interpreter built on fxp.affine_round (independent of ``forward``)."""
    fmt = net.fmt
    vals = [FxNum(int(v), fmt) for v in x]
    for l, layer in enumerate(net.layers):
        nxt = []
        for n in layer:
            ws, xs = [], []
            for i, w, c in n.entries():
                ws += [FxNum(w, fmt)] * c
                xs += [vals[i]] * c
            y = affine_round(fmt, ws, FxNum(n.bias, fmt), xs)
            if l < len(net.layers) - 1:
                y = FxNum(net.table(y.num), fmt)
            nxt.append(y)
        vals = nxt
    return vals[0]


def grid_points(fmt: FxFormat, d: int, box=None) -> np.ndarray:
    """All grid vectors (d x n numerators) in lexicographic order."""
    if box is None:
        box = [(-fmt.qmax_num, fmt.qmax_num)] * d
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh])


def eval_grid(net: QuantizedNet, box=None, budget: int = 2**24,
              chunk: int = 8192) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Stream (inputs, outputs) chunks over the full grid or a sub-box."""
    fmt = net.fmt
    if box is None:
        box = [(-fmt.qmax_num, fmt.qmax_num)] * net.d
    total = 1
    for lo, hi in box:
        total *= hi - lo + 1
    if total > budget:
        raise BudgetExceeded(f"{total} grid points exceed the budget {budget}")
    X = grid_points(fmt, net.d, box)
    for a in range(0, X.shape[1], chunk):
        Xc = X[:, a:a + chunk]
        yield Xc, forward(net, Xc)[0]


def eval_grid_dict(net: QuantizedNet, box=None, budget: int = 2**24) -> dict:
    out = {}
    for X, Y in eval_grid(net, box, budget):
        for col, y in zip(X.T, Y):
            out[tuple(int(v) for v in col)] = int(y)
    return out


# ---------------------------------------------------------- accounting

def param_count(net: QuantizedNet) -> int:
    """Sum over neurons of 1 + |I|, repeated indices counted per occurrence."""
    return sum(1 + n.fan_in for layer in net.layers for n in layer)


def is_binary(net: QuantizedNet) -> bool:
    return all(abs(w) == net.fmt.s for layer in net.layers for n in layer for w in n.weights)


def copies_needed(net: QuantizedNet) -> list[list[int]]:
    """Copies of each neuron required to turn every index multiset into a set."""
    copies = [[1] * len(layer) for layer in net.layers]
    for l in range(len(net.layers) - 1, 0, -1):
        below = [0] * len(net.layers[l - 1])
        for j, n in enumerate(net.layers[l]):
            if copies[l][j] == 0:
                continue
            for i, m in n.multiplicity().items():
                below[i] = max(below[i], m)
        copies[l - 1] = [max(1, c) for c in below]
    return copies


def expanded_param_count(net: QuantizedNet) -> int:
    """Parameter count of the set-form network produced by ``expand_multiset``."""
    copies = copies_needed(net)
    # repeated references to an input coordinate are merged into one weight
    total = sum(c * (1 + len(set(n.indices))) for n, c in zip(net.layers[0], copies[0]))
    return total + sum(c * (1 + n.fan_in) for layer, cs in zip(net.layers[1:], copies[1:])
                       for n, c in zip(layer, cs))


def expand_multiset(net: QuantizedNet) -> QuantizedNet:
    """Equivalent network in which no neuron references the same input twice."""
    copies = copies_needed(net)
    fmt = net.fmt
    new_layers = []
    # first layer: repeated inputs can only be merged
    first = []
    for n, c in zip(net.layers[0], copies[0]):
        merged = {}
        for i, w, k in n.entries():
            merged[i] = merged.get(i, 0) + w * k
        if any(abs(w) > fmt.qmax_num for w in merged.values()) or \
                (net.binary and any(abs(w) != fmt.s for w in merged.values())):
            raise ValueError("repeated input with a merged weight outside the weight set")
        idx = tuple(sorted(merged))
        first += [AffineNeuron(idx, tuple(merged[i] for i in idx), n.bias)] * c
    new_layers.append(tuple(first))
    for l in range(1, len(net.layers)):
        base = [0]
        for c in copies[l - 1]:
            base.append(base[-1] + c)
        layer = []
        for n, c in zip(net.layers[l], copies[l]):
            used: dict = {}
            idx, ws = [], []
            for i, w, k in n.entries():
                for _ in range(k):
                    u = used.get(i, 0)
                    used[i] = u + 1
                    idx.append(base[i] + u)
                    ws.append(w)
            layer += [AffineNeuron(tuple(idx), tuple(ws), n.bias)] * c
        new_layers.append(tuple(layer))
    return QuantizedNet(fmt, net.table, tuple(new_layers), net.d, net.binary, dict(net.meta))


# ------------------------------------------------------- real reference

@dataclass(frozen=True)
class RealNeuron:
    indices: tuple
    weights: tuple  # Fractions
    bias: Fraction = Fraction(0)


@dataclass(frozen=True)
class RealNet:
    """Unrounded network with exact rational parameters and an exact activation."""

    layers: tuple
    d: int
    activation: Callable[[Fraction], Fraction]


def eval_real_net(net: RealNet, x: Sequence) -> Fraction:
    vals = [Fraction(v) for v in x]
    for l, layer in enumerate(net.layers):
        nxt = []
        for n in layer:
            y = n.bias + sum((w * vals[i] for i, w in zip(n.indices, n.weights)), Fraction(0))
            if l < len(net.layers) - 1:
                y = net.activation(y)
            nxt.append(y)
        vals = nxt
    return vals[0]


def quantize_net(real: RealNet, fmt: FxFormat, table: QuantTable) -> QuantizedNet:
    """Round every weight onto Q_{p,s} and every bias onto the 1/s lattice."""
    layers = []
    for layer in real.layers:
        out = []
        for n in layer:
            ws = tuple(round_to(fmt, w).num for w in n.weights)
            b = _round_bias(n.bias, fmt.s)
            out.append(AffineNeuron.from_terms(((i, w, 1) for i, w in zip(n.indices, ws)), b))
        layers.append(tuple(out))
    return QuantizedNet(fmt, table, tuple(layers), real.d)


def _round_bias(b: Fraction, s: int) -> int:
    t = Fraction(b) * s
    return round_half_away(t.numerator, t.denominator)


# ------------------------------------------------------------ file format

NET_HEADER = "# quantua-net v1"


def _fmt_entries(n: AffineNeuron) -> str:
    idx = " ".join(f"{i}*{c}" if c != 1 else str(i) for i, _, c in n.entries())
    ws = " ".join(str(w) for w in n.weights)
    return f"{idx} | {ws} | {n.bias}"


def net_to_text(net: QuantizedNet, table_name: str) -> str:
    lines = [NET_HEADER, f"format {net.fmt}", f"activation {table_name}",
             f"inputs {net.d}", f"binary {int(net.binary)}"]
    for layer in net.layers:
        lines.append(f"layer {len(layer)}")
        lines += [_fmt_entries(n) for n in layer]
    return "\n".join(lines) + "\n"


def net_from_text(text: str, table: QuantTable | None = None, base: Path | None = None) -> QuantizedNet:
    lines = [l for l in text.splitlines() if l.strip()]
    if lines[0].strip() != NET_HEADER:
        raise ValueError("not a quantua network file")
    head = {}
    i = 1
    while not lines[i].startswith("layer"):
        k, v = lines[i].split(None, 1)
        head[k] = v.strip()
        i += 1
    fmt = FxFormat.parse(head["format"])
    if table is None:
        table = QuantTable.load((base or Path(".")) / head["activation"])
    layers = []
    while i < len(lines):
        n = int(lines[i].split()[1])
        i += 1
        layer = []
        for line in lines[i:i + n]:
            a, w, b = (part.strip() for part in line.split("|"))
            idx, cnt = [], []
            for tok in a.split():
                j, _, c = tok.partition("*")
                idx.append(int(j))
                cnt.append(int(c) if c else 1)
            ws = tuple(int(t) for t in w.split())
            layer.append(AffineNeuron(tuple(idx), ws, int(b),
                                      None if all(c == 1 for c in cnt) else tuple(cnt)))
        layers.append(tuple(layer))
        i += n
    return QuantizedNet(fmt, table, tuple(layers), int(head["inputs"]), bool(int(head["binary"])))


def save_net(net: QuantizedNet, path, table_path=None) -> Path:
    path = Path(path)
    table_path = Path(table_path) if table_path else path.with_suffix(".qt")
    net.table.save(table_path)
    path.write_text(net_to_text(net, table_path.name))
    return table_path


def load_net(path) -> QuantizedNet:
    path = Path(path)
    return net_from_text(path.read_text(), base=path.parent)
