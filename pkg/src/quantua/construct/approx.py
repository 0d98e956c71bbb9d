"""Universal approximators: a sum of cell indicators plus one final rounding."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .. import reach
from ..activations import ActivationSpec, QuantTable
from ..conditions import check_condition1, check_condition2
from ..fxp import FxFormat, round_num
from ..net import QuantizedNet, expanded_param_count
from ..targets import Target
from . import deep, shallow
from .builder import NetBuilder
from .decompose import BINARY, FOUR_TERM, GENERAL, NotRepresentable, decompose_gamma

SHALLOW, DEEP = "shallow", "deep"


class NotUniversal(ValueError):
    pass


@dataclass
class Approximator:
    net: QuantizedNet
    manifest: dict = field(default_factory=dict)


def cell_width(fmt: FxFormat, delta) -> int:
    """Grid points per cell side so that points in one cell differ by less than delta."""
    if delta is None or Fraction(delta) <= Fraction(1, fmt.s):
        return 1
    return min(fmt.size, math.ceil(Fraction(delta) * fmt.s))


def partition(fmt: FxFormat, d: int, width: int) -> list[shallow.Cube]:
    """Boxes of ``width`` grid points per side from -q_max; the last box per axis is closed."""
    q = fmt.qmax_num
    starts = list(range(-q, q + 1, width))
    axis = [(a, min(a + width - 1, q)) for a in starts]
    return [shallow.Cube(tuple(c[0] for c in cell), tuple(c[1] for c in cell))
            for cell in itertools.product(axis, repeat=d)]


def choose_delta(target: Target, eps, delta=None) -> tuple:
    """(delta, source).  Table targets fall back to point cells."""
    if delta is not None:
        return Fraction(delta), "given"
    if target.lipschitz is not None:
        return Fraction(eps) / target.lipschitz, "lipschitz"
    return None, "point-cells"


def _lattice_gamma(t: int, b: int, step: int, fmt: FxFormat, binary: bool) -> int:
    """Smallest-magnitude L (multiple of step) whose sum with b rounds to t.

    General mode: L is a numerator over s**2 and the output is b*s + L.
    Binary mode: L is a numerator over s and the output is b + L.
    """
    s, q = fmt.s, fmt.qmax_num
    if binary:
        k, base, unit = 1, b, 1
    else:
        k, base, unit = 2, b * s, s
    centre = t * unit - base
    if step == 0:
        cands = [0]
    else:
        m0 = centre // step
        span = unit // step + 2
        cands = [m * step for m in range(m0 - span, m0 + span + 2)]
        if abs(t) == q:  # saturating values can overshoot
            far = (q * unit + unit) // step + 2
            cands += [sgn * m * step for m in range(far + 1) for sgn in (1, -1)]
    ok = [L for L in cands if round_num(base + L, k, s, q) == t]
    if not ok:
        raise NotRepresentable(Fraction(t, s), step, " (no lattice point rounds to the target)")
    return min(ok, key=lambda L: (abs(L), L))


def build_approximator(table: QuantTable, target: Target, eps, strategy: str = SHALLOW,
                       binary: bool = False, delta=None, act: ActivationSpec | None = None,
                       bias: int | None = None) -> Approximator:
    """Piecewise-constant approximation of ``target`` on the grid of ``table.fmt``."""
    fmt = table.fmt
    s = fmt.s
    d = target.d
    dl, source = choose_delta(target, eps, delta)
    width = cell_width(fmt, dl)
    cells = partition(fmt, d, width)
    b = NetBuilder(table, d, binary)
    out: list = []
    man = {"kind": "approximator", "strategy": strategy, "binary": binary,
           "format": str(fmt), "activation": table.name, "target": target.name,
           "target_seed": target.seed, "d": d, "eps": str(Fraction(eps)),
           "delta": None if dl is None else str(dl), "delta_source": source,
           "cell_width": width, "cells": len(cells)}
    cell_bounds = []
    ns = []
    if strategy == SHALLOW:
        w = check_condition1(table)
        kind = "BS" if binary else "S"
        if bias is None:
            scan = reach.scan_bias(table, kind, keep_missing=False)
            if w is None or not scan.found:
                raise NotUniversal(f"{table.name} at {fmt}: no Condition 1 witness or {kind} bias")
            bias = scan.witness
        ctx = shallow.shallow_context(table, binary, w)
        step = reach._gcd(v for v in reach.compute_V(ctx.rho).members)
        for cube in cells:
            t = target.rounded(fmt, cube.lo)
            L = _lattice_gamma(t, bias, step, fmt, binary)
            gamma = Fraction(L, s if binary else s * s)
            dec = decompose_gamma(ctx.rho, gamma, BINARY if binary else GENERAL)
            shallow.emit_cell(b, ctx, cube, dec, out)
            ns.append(dec.n)
            cell_bounds.append(shallow.shallow_param_bound(dec.n, d, ctx.m, ctx.m_q) if dec.n else 0)
        man.update(m=ctx.m, m_q=ctx.m_q, bias=bias,
                   witness=[ctx.witness.alpha, ctx.witness.beta, ctx.witness.z])
        out_bias = bias
    elif strategy == DEEP:
        if binary:
            raise ValueError("the deep construction uses general weights")
        if act is not None and act.has_metadata and not check_condition2(act, fmt).holds:
            raise NotUniversal(f"{act.name} at {fmt}: Condition 2 fails")
        ctx = deep.deep_context(table)
        for cube in cells:
            t = target.rounded(fmt, cube.lo)
            dec = decompose_gamma(table, Fraction(t, s), FOUR_TERM)
            deep.emit_cell(b, ctx, cube, dec, out)
            ns.append(dec.n)
            cell_bounds.append(deep.deep_cell_bound(d, ctx.l) if dec.n else 0)
        man.update(l=ctx.l, k=ctx.k, D=ctx.D, bias=0)
        out_bias = 0
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    man["n_max"] = max(ns, default=0)
    man["n_total"] = sum(ns)
    man["param_bound"] = sum(cell_bounds) + 1
    net = b.finish(out, out_bias, man)
    man["params"] = expanded_param_count(net)
    return Approximator(net, man)
