"""Deep indicators for activations with slope in [1/2, 2] on [0, q_max].

A branch separates y >= a from y < a with a chain of rounded layers
    g_0 = -11 q_max sigma(round(y + z - a)) + ceil(11 q_max sigma(z - 1/s)) + q_max
    g_{i+1} = 5 q_max sigma(round g_i) - (floor(5 q_max sigma(q_max)) - q_max)
For y < a every round(g_i) is q_max; for y >= a it is beta_i, and the chain
stops at the first l with q_max - beta_l >= q_max / 2.  Two branches (lower
and upper bound) give T1, T2 in {D, 0} with D = sigma(q_max) - sigma(beta_l), and
    Ind = k (2 sigma(q_max) - D) - k sigma(G1) - k sigma(G2) = k D 1_[a,b].
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..activations import QuantTable
from ..conditions import ConditionViolated, check_condition1
from ..fxp import round_num
from .builder import NetBuilder
from .decompose import FOUR_TERM, GammaDecomposition, decompose_gamma
from .shallow import Cube, Indicator


@dataclass(frozen=True)
class DeepContext:
    table: QuantTable
    z: int
    c0: int        # bias of g_0, numerator over s
    c: int         # subtracted constant of g_{i+1}
    l: int
    betas: tuple   # rounded beta_0 .. beta_l
    D: int
    k: int

    @property
    def top(self) -> int:
        return self.table.max_num

    @property
    def gamma_num(self) -> int:
        return self.k * self.D


def depth_bound(p: int, s: int) -> int:
    """floor(log_{2 q_max}(2^p - 1)) + 1 in integer arithmetic."""
    qn = 2 ** p - 1
    e = 0
    while (2 * qn) ** (e + 1) <= qn * s ** (e + 1):
        e += 1
    return e + 1


def deep_context(table: QuantTable) -> DeepContext:
    fmt = table.fmt
    s, q = fmt.s, fmt.qmax_num
    w = check_condition1(table)
    if w is None or (w.alpha, w.beta) != (1, 1):
        raise ConditionViolated(f"{table.name} at {fmt}: no unreflected threshold")
    z, M = w.z, table.max_num
    below = table(z - 1)
    if any(table(y) > below for y in range(-q, z)):
        raise ConditionViolated("sigma below the threshold exceeds sigma(z - 1/s)")
    c0 = -((-11 * q * below) // s) + q
    c = (5 * q * M) // s - q
    betas = [round_num(-11 * q * M + c0 * s, 2, s, q)]
    limit = depth_bound(fmt.p, s) + 8
    while 2 * (q - betas[-1]) < q:
        if len(betas) > limit:
            raise ConditionViolated("separation chain does not terminate")
        betas.append(round_num(5 * q * table(betas[-1]) - c * s, 2, s, q))
    D = M - table(betas[-1])
    if D <= 0:
        raise ConditionViolated("separation chain ends without a gap")
    k = -(-q // D)
    return DeepContext(table, z, c0, c, len(betas) - 1, tuple(betas), D, k)


def emit_branch(b: NetBuilder, ctx: DeepContext, layer: int, terms, bias: int) -> int:
    """Chain whose input affine (terms, bias) feeds the threshold neuron at ``layer``.

    Returns the index of sigma(round g_l) in layer ``layer + l + 1``.
    """
    q = ctx.table.fmt.qmax_num
    n = b.add(layer, terms, bias + ctx.z)
    n = b.add(layer + 1, [(n, -q, 11)], ctx.c0)
    for i in range(ctx.l):
        n = b.add(layer + 2 + i, [(n, q, 5)], -ctx.c)
    return n


def interval_terms(b, ctx, layer, terms, bias, lo, hi):
    """Output terms and bias for k D 1[lo <= y <= hi] with y = sum terms + bias (over s)."""
    s = ctx.table.fmt.s
    t1 = emit_branch(b, ctx, layer, terms, bias - lo)
    t2 = emit_branch(b, ctx, layer, [(i, -w, c) for i, w, c in terms], hi - bias)
    return [(t1, -s, ctx.k), (t2, -s, ctx.k)], ctx.k * (2 * ctx.top - ctx.D)


def emit_cell(b: NetBuilder, ctx: DeepContext, cube: Cube, dec: GammaDecomposition,
              out: list) -> None:
    """Neurons for gamma * 1_C with a four-term decomposition of gamma."""
    if not dec.terms:
        return
    s = ctx.table.fmt.s
    L = ctx.l + 2  # layers per branch
    if cube.d == 1:
        ind, ind_b = interval_terms(b, ctx, 1, [(0, s, 1)], 0, cube.lo[0], cube.hi[0])
        top = L + 1
    else:
        # S = sum_i (k D - Ind_i) is 0 on C and >= k D off C; test S in [0, 0]
        sterms, sbias = [], 0
        for i in range(cube.d):
            t, tb = interval_terms(b, ctx, 1, [(i, s, 1)], 0, cube.lo[i], cube.hi[i])
            sterms += [(j, -w, c) for j, w, c in t]
            sbias += ctx.gamma_num - tb
        ind, ind_b = interval_terms(b, ctx, L + 1, sterms, sbias, 0, 0)
        top = 2 * L + 1
    for t in dec.terms:
        qv = t.v2
        f = b.add(top, ind, ind_b + qv)
        cq = b.const(top, qv)
        out += [(f, t.weight, t.count), (cq, -t.weight, t.count)]


def deep_unary_bound(l: int) -> int:
    return 120 * l + 461


def deep_cell_bound(d: int, l: int) -> int:
    if d == 1:
        return deep_unary_bound(l)
    return 4 * (220 * (d * (120 * l + 461) + 1) + 120 * l + 241) + 1


def build_deep_indicator(table: QuantTable, lo: int, hi: int) -> Indicator:
    """k D * 1_[lo/s, hi/s] on one input; k D >= q_max."""
    ctx = deep_context(table)
    b = NetBuilder(table, 1)
    out, bias = interval_terms(b, ctx, 1, [(0, table.fmt.s, 1)], 0, lo, hi)
    manifest = {"kind": "deep-indicator", "l": ctx.l, "betas": list(ctx.betas), "D": ctx.D,
                "k": ctx.k, "c0": ctx.c0, "c": ctx.c, "z": ctx.z,
                "gamma": str(Fraction(ctx.gamma_num, table.fmt.s)),
                "depth_bound": depth_bound(table.fmt.p, table.fmt.s),
                "param_bound": deep_unary_bound(ctx.l)}
    net = b.finish(out, bias, manifest)
    return Indicator(net, Cube((lo,), (hi,)), Fraction(ctx.gamma_num, table.fmt.s), manifest)


def build_deep_cell(table: QuantTable, cube: Cube, gamma) -> Indicator:
    """gamma * 1_C for any grid gamma, via the four-term decomposition."""
    ctx = deep_context(table)
    dec = decompose_gamma(table, gamma, FOUR_TERM)
    b = NetBuilder(table, cube.d)
    out: list = []
    emit_cell(b, ctx, cube, dec, out)
    manifest = {"kind": "deep-cell", "l": ctx.l, "k": ctx.k, "D": ctx.D, "n": dec.n,
                "param_bound": deep_cell_bound(cube.d, ctx.l)}
    return Indicator(b.finish(out, 0, manifest), cube, Fraction(gamma), manifest)
