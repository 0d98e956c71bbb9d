"""Three-hidden-layer indicator networks gamma * 1_C.

Layout (rho(y) = alpha * sigma(beta * y) is the reflected table whose
maximum M is attained exactly on [z, q_max]):

    layer 1   A_i = rho(x_i - lo_i + z),  B_i = rho(-x_i + hi_i + z),  K1 = rho(q_max)
    layer 2   H = rho(m q_max phi + z - 1/s),  phi = sum_i (2 K1 - A_i - B_i),  K2 = rho(q_max)
    layer 3   F_v = rho(v + m_q q_max (K2 - H)),  C_v = rho(v)
    output    sum_j w_j (C_{v1} - F_{v1} + F_{v2} - C_{v2})

On C, H = rho(z - 1/s) < M and every F_v saturates to M, so the output is
sum_j w_j (rho(v1) - rho(v2)) = gamma.  Off C, H = M and F_v = C_v.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from ..activations import QuantTable
from ..conditions import Condition1Witness, ConditionViolated, check_condition1
from ..net import QuantizedNet
from .builder import NetBuilder
from .decompose import BINARY, GENERAL, GammaDecomposition, decompose_gamma


@dataclass(frozen=True)
class Cube:
    lo: tuple  # numerators over s
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"bad cube {self.lo}..{self.hi}")

    @property
    def d(self) -> int:
        return len(self.lo)

    def contains(self, x) -> bool:
        return all(a <= v <= b for a, v, b in zip(self.lo, x, self.hi))

    def box(self):
        return list(zip(self.lo, self.hi))

    @classmethod
    def point(cls, x) -> "Cube":
        return cls(tuple(x), tuple(x))


@dataclass
class Indicator:
    """A network whose unrounded output equals gamma on the cube and 0 elsewhere."""

    net: QuantizedNet
    cube: Cube
    gamma: Fraction
    manifest: dict = field(default_factory=dict)

    @property
    def rho(self):
        """The final affine map (unrounded)."""
        return self.net.layers[-1][0]


@dataclass(frozen=True)
class ShallowContext:
    table: QuantTable
    witness: Condition1Witness
    rho: QuantTable
    binary: bool
    m: int
    m_q: int

    @property
    def unit(self) -> int:
        """Numerator of the amplification weight: q_max, or 1 for +-1 weights."""
        return self.table.fmt.s if self.binary else self.table.fmt.qmax_num


def shallow_context(table: QuantTable, binary: bool = False,
                    witness: Condition1Witness | None = None) -> ShallowContext:
    w = witness or check_condition1(table)
    if w is None:
        raise ConditionViolated(f"{table.name} at {table.fmt}: Condition 1 fails")
    fmt = table.fmt
    s, q = fmt.s, fmt.qmax_num
    rho = w.reflect(table)
    gap = rho.max_num - rho(w.z - 1)
    if binary:
        m = m_q = 2 ** (fmt.p + 1) - 1
    else:
        m = 2 * s + 1
        m_q = 2 * s // gap + 1  # smallest with m_q * q_max * gap/s > 2 q_max
    return ShallowContext(table, w, rho, binary, m, m_q)


def emit_cell(b: NetBuilder, ctx: ShallowContext, cube: Cube, dec: GammaDecomposition,
              out: list) -> None:
    """Append the neurons for one cube to ``b`` and its output terms to ``out``."""
    if not dec.terms:
        return
    s, q = ctx.table.fmt.s, ctx.table.fmt.qmax_num
    al, be, z = ctx.witness.alpha, ctx.witness.beta, ctx.witness.z
    u, d = ctx.unit, cube.d
    ab = al * be
    k1 = b.const(1, be * q)
    first = []
    for i in range(d):
        first.append(b.add(1, [(i, be * s, 1)], be * (z - cube.lo[i])))
        first.append(b.add(1, [(i, -be * s, 1)], be * (cube.hi[i] + z)))
    h = b.add(2, [(j, -ab * u, ctx.m) for j in first] + [(k1, ab * u, 2 * d * ctx.m)],
              be * (z - 1))
    k2 = b.const(2, be * q)
    fv: dict = {}
    for t in dec.terms:
        for v in (t.v1, t.v2):
            if v not in fv:
                fv[v] = b.add(3, [(h, -ab * u, ctx.m_q), (k2, ab * u, ctx.m_q)], be * v)
        c1, c2 = b.const(3, be * t.v1), b.const(3, be * t.v2)
        w = t.weight * al
        out += [(fv[t.v1], -w, t.count), (c1, w, t.count),
                (fv[t.v2], w, t.count), (c2, -w, t.count)]


def shallow_param_bound(n: int, d: int, m: int, m_q: int) -> int:
    """Explicit count chain for one indicator with n decomposition terms."""
    if n == 0:
        return 1
    return 2 * n * (m * m_q * 10 * d + 4 * m_q + 4)


def paper_shallow_bound(n: int, d: int, s: int) -> int:
    return 2 * n * ((2 * s + 1) ** 2 * 10 * d + 8 * s + 8) if n else 1


def build_indicator(table: QuantTable, cube: Cube, gamma, binary: bool = False,
                    witness: Condition1Witness | None = None) -> Indicator:
    """gamma * 1_C with gamma in the span lattice of V (general or +-1 weights)."""
    gamma = Fraction(gamma)
    ctx = shallow_context(table, binary, witness)
    if any(abs(v) > table.fmt.qmax_num for v in cube.lo + cube.hi):
        raise ValueError("cube bounds must lie on the grid")
    dec = decompose_gamma(ctx.rho, gamma, BINARY if binary else GENERAL)
    b = NetBuilder(table, cube.d, binary)
    out: list = []
    emit_cell(b, ctx, cube, dec, out)
    for l in range(1, 4 if dec.terms else 1):
        b._ensure(l)
    manifest = {"kind": "shallow-indicator", "binary": binary, "m": ctx.m, "m_q": ctx.m_q,
                "n": dec.n, "witness": [ctx.witness.alpha, ctx.witness.beta, ctx.witness.z],
                "gamma": str(gamma), "cube": [list(cube.lo), list(cube.hi)],
                "param_bound": shallow_param_bound(dec.n, cube.d, ctx.m, ctx.m_q)}
    net = b.finish(out, 0, manifest)
    return Indicator(net, cube, gamma, manifest)


def build_indicator_binary(table: QuantTable, cube: Cube, gamma,
                           witness: Condition1Witness | None = None) -> Indicator:
    return build_indicator(table, cube, gamma, True, witness)
