"""Exhaustive checks of constructed networks and the counterexample reproductions."""
from __future__ import annotations

import os
import random
import time
import xml.etree.ElementTree as ET
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import reach
from .activations import get_activation, table_for, tabulate
from .conditions import check_necessity_divisor, verdict
from .construct.deep import deep_cell_bound, deep_unary_bound
from .construct.shallow import Cube, Indicator, paper_shallow_bound
from .fxp import FxFormat
from .net import (AffineNeuron, QuantizedNet, RealNet, RealNeuron, eval_real_net, expanded_param_count,
                  forward, grid_points, param_count, quantize_net)
from .targets import Target

DEFAULT_BUDGET = 2**24
SAMPLE_POINTS = 10**6
PASS, FAIL, SAMPLED = "pass", "fail", "sampled-pass"


def grid_budget() -> int:
    return int(os.environ.get("QUANTUA_GRID_BUDGET", DEFAULT_BUDGET))


@dataclass
class Check:
    id: str
    status: str
    detail: str = ""
    witness: list | None = None
    count: int = 0
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status != FAIL


@dataclass
class VerificationRun:
    subject: str
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        self.checks.sort(key=lambda c: c.id)
        return check

    def to_json(self, timing: bool = False) -> dict:
        """Deterministic report; wall-clock timings only on request, in their own field."""
        checks = []
        for c in self.checks:
            row = asdict(c)
            del row["seconds"]
            checks.append(row)
        out = {"schema": "quantua.verify/1", "subject": self.subject, "passed": self.passed,
               "checks": checks, "meta": self.meta}
        if timing:
            out["timing"] = {c.id: c.seconds for c in self.checks}
        return out

    def to_junit(self) -> str:
        suite = ET.Element("testsuite", name=self.subject, tests=str(len(self.checks)),
                           failures=str(sum(not c.ok for c in self.checks)))
        for c in self.checks:
            case = ET.SubElement(suite, "testcase", name=c.id, time=f"{c.seconds:.3f}")
            if not c.ok:
                f = ET.SubElement(case, "failure", message=c.detail)
                f.text = f"witness={c.witness}"
        return ET.tostring(suite, encoding="unicode")


def _points(fmt: FxFormat, d: int, budget: int | None, seed: int = 0):
    """(X, mode): every grid point, or a seeded sample if the grid exceeds the budget."""
    budget = grid_budget() if budget is None else budget
    if fmt.size ** d <= budget:
        return grid_points(fmt, d), PASS
    rng = np.random.default_rng(seed)
    q = fmt.qmax_num
    return rng.integers(-q, q + 1, size=(d, SAMPLE_POINTS), dtype=np.int64), SAMPLED


# ---------------------------------------------------------------- indicators

def verify_indicator(net: QuantizedNet, cube: Cube, gamma, budget: int | None = None,
                     subject: str = "indicator") -> VerificationRun:
    """Unrounded output equals gamma * 1_C at every grid point."""
    t0 = time.perf_counter()
    fmt = net.fmt
    target = Fraction(gamma) * fmt.s**2
    run = VerificationRun(subject, meta={"gamma": str(gamma), "cube": [list(cube.lo), list(cube.hi)]})
    if target.denominator != 1:
        run.add(Check("indicator-exact", FAIL, "gamma is not a multiple of 1/s^2"))
        return run
    X, mode = _points(fmt, net.d, budget)
    _, Z = forward(net, X)
    lo = np.asarray(cube.lo, dtype=np.int64)[:, None]
    hi = np.asarray(cube.hi, dtype=np.int64)[:, None]
    inside = np.all((X >= lo) & (X <= hi), axis=0)
    want = np.where(inside, int(target), 0)
    bad = np.nonzero(np.asarray(Z != want, dtype=bool))[0]
    chk = Check("indicator-exact", mode if len(bad) == 0 else FAIL, count=X.shape[1])
    if len(bad):
        j = int(bad[0])
        chk.witness = [int(v) for v in X[:, j]]
        chk.detail = f"output {Z[j]}/s^2, expected {want[j]}/s^2"
    chk.seconds = time.perf_counter() - t0
    run.add(chk)
    return run


def mutate_weight(net: QuantizedNet, layer: int, neuron: int, entry: int, delta: int = 1) -> QuantizedNet:
    """Copy of ``net`` with one weight moved by delta/s (kept inside Q_{p,s})."""
    layers = [list(l) for l in net.layers]
    n = layers[layer][neuron]
    ws = list(n.weights)
    w = ws[entry] + delta
    if abs(w) > net.fmt.qmax_num:
        w = ws[entry] - delta
    ws[entry] = w
    layers[layer][neuron] = AffineNeuron(n.indices, tuple(ws), n.bias, n.counts)
    return QuantizedNet(net.fmt, net.table, tuple(tuple(l) for l in layers), net.d, False, dict(net.meta))


def mutation_check(ind: Indicator, seed: int = 0, tries: int = 16) -> Check:
    """Perturb single output weights until the exactness check fails.

    Mutants that leave every grid output unchanged (weights on neurons whose
    activation is zero everywhere) are equivalent and skipped.
    """
    out = ind.net.layers[-1][0]
    L = len(ind.net.layers) - 1
    order = list(range(len(out.weights)))
    random.Random(seed).shuffle(order)
    skipped = 0
    for e in order[:tries]:
        mutant = mutate_weight(ind.net, L, 0, e)
        r = verify_indicator(mutant, ind.cube, ind.gamma)
        c = r.checks[0]
        if not c.ok:
            return Check("mutation-detected", PASS, f"entry {e} detected, {skipped} equivalent",
                         c.witness, c.count)
        skipped += 1
    if not out.weights:
        # empty indicator: perturb the output bias instead
        net = ind.net
        layers = list(net.layers)
        layers[-1] = (AffineNeuron(out.indices, out.weights, out.bias + 1, out.counts),)
        mutant = QuantizedNet(net.fmt, net.table, tuple(layers), net.d, False)
        c = verify_indicator(mutant, ind.cube, ind.gamma).checks[0]
        if not c.ok:
            return Check("mutation-detected", PASS, "bias mutant detected", c.witness, c.count)
    return Check("mutation-detected", FAIL, f"{skipped} mutants all undetected")


# ------------------------------------------------------------ approximation

def _bound_ok(y: Fraction, lo: Fraction, hi: Fraction, t: Fraction, eps: Fraction) -> bool:
    lhs = max(abs(y - lo), abs(y - hi))
    rhs = Fraction(0) if lo <= t <= hi else min(abs(lo - t), abs(hi - t))
    return lhs <= rhs + eps


def _approx_chunk(args):
    X, Y, target, fmt, eps = args
    s = fmt.s
    worst = Fraction(0)
    bound_fail = eq_fail = None
    for j in range(X.shape[1]):
        x = tuple(int(v) for v in X[:, j])
        y = Fraction(int(Y[j]), s)
        t = target.rounded(fmt, x)
        lo, hi = target.value_bounds(fmt, x)
        worst = max(worst, abs(y - lo), abs(y - hi))
        if bound_fail is None and not _bound_ok(y, lo, hi, Fraction(t, s), eps):
            bound_fail = (list(x), f"net {y}, target in [{float(lo)}, {float(hi)}]")
        if eq_fail is None and int(Y[j]) != t:
            eq_fail = (list(x), f"net {int(Y[j])}/s, rounded target {t}/s")
    return worst, bound_fail, eq_fail


def verify_approximation(net: QuantizedNet, target: Target, eps, budget: int | None = None,
                         exact: bool = False, subject: str = "approximator",
                         jobs: int = 1) -> VerificationRun:
    """|net(x) - f*(x)| <= |f*(x) - round f*(x)| + eps on the grid (and optionally net = round f*)."""
    t0 = time.perf_counter()
    fmt = net.fmt
    eps = Fraction(eps)
    X, mode = _points(fmt, net.d, budget)
    Y, _ = forward(net, X)
    run = VerificationRun(subject, meta={"target": target.name, "eps": str(eps)})
    n = X.shape[1]
    parts = max(1, min(jobs, n))
    cuts = np.linspace(0, n, parts + 1).astype(int)
    tasks = [(X[:, a:b], Y[a:b], target, fmt, eps) for a, b in zip(cuts, cuts[1:])]
    if parts > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(parts) as ex:
            results = list(ex.map(_approx_chunk, tasks))
    else:
        results = [_approx_chunk(tasks[0])]
    worst = max(r[0] for r in results)
    bf = next((r[1] for r in results if r[1]), None)
    ef = next((r[2] for r in results if r[2]), None)
    bound = Check("approximation-bound", FAIL if bf else mode, count=n)
    bound.witness, bound.detail = bf if bf else (None, f"max |net - f*| <= {float(worst):.6g}")
    eq = Check("intrinsic-error-attained", FAIL if ef else mode, count=n)
    if ef:
        eq.witness, eq.detail = ef
    bound.seconds = eq.seconds = time.perf_counter() - t0
    run.add(bound)
    if exact:
        run.add(eq)
    return run


# ------------------------------------------------------------- audits

def audit_params(net: QuantizedNet, bound_kind: str, context: dict | None = None) -> VerificationRun:
    """Actual (set-form) parameter count against the explicit counting formula."""
    ctx = dict(net.meta)
    ctx.update(context or {})
    actual = expanded_param_count(net)
    run = VerificationRun(f"audit-{bound_kind}", meta={"params": actual, "multiset_params": param_count(net)})
    if bound_kind == "shallow":
        own = ctx["param_bound"]
        run.add(Check("count<=chain", PASS if actual <= own else FAIL, f"{actual} <= {own}"))
        if not ctx.get("binary") and "n" in ctx:
            n, d, s = ctx["n"], len(ctx["cube"][0]), net.fmt.s
            pb = paper_shallow_bound(n, d, s)
            run.add(Check("count<=2n((2s+1)^2 10d+8s+8)", PASS if actual <= pb else FAIL,
                          f"{actual} <= {pb}"))
    elif bound_kind == "deep":
        l = ctx["l"]
        b = ctx.get("param_bound", deep_unary_bound(l))
        run.add(Check("count<=deep-bound", PASS if actual <= b else FAIL, f"{actual} <= {b}"))
        if ctx.get("depth_bound") is not None:
            ok = l <= ctx["depth_bound"]
            run.add(Check("depth<=log-bound", PASS if ok else FAIL, f"l={l} <= {ctx['depth_bound']}"))
    elif bound_kind == "approximator":
        b = ctx["param_bound"]
        run.add(Check("count<=sum-of-cells", PASS if actual <= b else FAIL, f"{actual} <= {b}"))
    else:
        raise ValueError(bound_kind)
    return run


# ------------------------------------------------------ reproductions

NAIVE_FMT = FxFormat(7, 64)


def naive_real_net() -> RealNet:
    def row(n, lead, tail):
        return RealNeuron(tuple(range(n)), (Fraction(lead),) + (Fraction(tail),) * (n - 1))

    hidden = (row(129, 1, Fraction(-1, 256)), row(257, -1, Fraction(1, 256)),
              row(129, -1, Fraction(1, 128)), row(65, -1, Fraction(1, 128)))
    out = RealNeuron((0, 1, 2, 3), tuple(map(Fraction, (2, 1, -3, -2))))
    return RealNet((hidden, (out,)), 257, lambda v: max(v, Fraction(0)))


def naive_quantized_net() -> QuantizedNet:
    """Hidden weights rounded onto Q_{7,64}; output multiples 2, 3 as repeated +-1 terms."""
    real = naive_real_net()
    table = table_for("relu", NAIVE_FMT)
    hidden = quantize_net(RealNet((real.layers[0], (RealNeuron((0,), (Fraction(1),)),)), 257,
                                  real.activation), NAIVE_FMT, table).layers[0]
    s = NAIVE_FMT.s
    out = AffineNeuron.from_terms([(0, s, 2), (1, s, 1), (2, -s, 3), (3, -s, 2)], 0)
    return QuantizedNet(NAIVE_FMT, table, (hidden, (out,)), 257)


def repro_naive_quantization() -> VerificationRun:
    t0 = time.perf_counter()
    run = VerificationRun("naive-quantization")
    real = naive_real_net()
    qnet = naive_quantized_net()
    ones, neg = [1] * 257, [-1] * 257
    rv = (eval_real_net(real, neg), eval_real_net(real, ones))
    s = NAIVE_FMT.s
    X = np.array([[-s] * 257, [s] * 257], dtype=np.int64).T
    Y, _ = forward(qnet, X)
    qv = (Fraction(int(Y[0]), s), Fraction(int(Y[1]), s))
    run.add(Check("real-path", PASS if rv == (-1, 1) else FAIL, f"f(-1)={rv[0]}, f(1)={rv[1]}"))
    run.add(Check("quantized-path", PASS if qv == (1, -1) else FAIL,
                  f"round f(-1)={qv[0]}, round f(1)={qv[1]}"))
    rows = [[Fraction(w, s) for w in n.weights] for n in qnet.layers[0]]
    want = [[1] + [0] * 128, [-1] + [0] * 256, [-1] + [Fraction(1, 64)] * 128,
            [-1] + [Fraction(1, 64)] * 64]
    run.add(Check("quantized-rows", PASS if rows == want else FAIL,
                  "; ".join(f"w{i + 1}=({r[0]}, {r[1]}, ...)" for i, r in enumerate(rows))))
    run.meta = {"real": [str(v) for v in rv], "quantized": [str(v) for v in qv],
                "params": param_count(qnet)}
    run.checks[0].seconds = time.perf_counter() - t0
    return run


def smallest_hardtanh_format(binary: bool) -> FxFormat:
    """Smallest (p, s) (by s, then p) with 5s (general) or 5 (binary) in Q_{p,s}."""
    s = 1
    p = 1
    while 2**p - 1 < (5 if binary else 5 * s):
        p += 1
    return FxFormat(p, s)


def repro_hardtanh(binary: bool = False, n_max: int = 6) -> VerificationRun:
    fmt = smallest_hardtanh_format(binary)
    name = "hardtanh5" if binary else "hardtanh5s"
    table = tabulate(get_activation(name, fmt), fmt)
    kind = "BN" if binary else "N"
    mode = reach.BINARY if binary else reach.GENERAL
    run = VerificationRun(f"hardtanh-{'binary' if binary else 'general'}", meta={"format": str(fmt)})
    scan = reach.scan_bias(table, kind)
    run.add(Check("no-full-bias", PASS if not scan.found else FAIL,
                  f"{len(scan.scanned)} residues scanned, period {scan.period}",
                  None if not scan.found else [scan.witness]))
    agree = True
    for b in scan.scanned:
        lat = reach.SET_FUNCS[kind](table, b)
        bf = reach.brute_force_reach(table.range_nums, mode, b, fmt, n_max=n_max)
        agree &= set(bf.members) <= set(lat.members) and not bf.full
    run.add(Check("brute-force-agrees", PASS if agree else FAIL, f"n_max={n_max}"))
    r = check_necessity_divisor(table, binary)
    run.add(Check("divisor-witness", PASS if r else FAIL, f"r={r}"))
    relu = tabulate(get_activation("relu"), fmt)
    rv = verdict(get_activation("relu"), fmt, binary)
    ok = check_necessity_divisor(relu, binary) is None and rv.verdict == "Universal"
    run.add(Check("relu-control", PASS if ok else FAIL, f"relu verdict {rv.verdict}"))
    run.meta["missing"] = {str(b): m for b, m in scan.missing.items()}
    return run
