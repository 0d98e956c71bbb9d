"""Command-line front end: analyze, build, verify, repro."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from . import conditions
from .activations import ZOO_NAMES, get_activation, table_for
from .construct.approx import DEEP, SHALLOW, NotUniversal, build_approximator
from .construct.decompose import NotRepresentable
from .fxp import FxFormat
from .net import load_net, save_net
from .targets import BUILTIN_TARGETS, Target, make_target, table_target
from .verify import (audit_params, grid_budget, repro_hardtanh, repro_naive_quantization,
                     verify_approximation)

EXIT_FAIL, EXIT_CONFIG = 1, 2
REPROS = ("naive-quantization", "hardtanh", "hardtanh-binary", "all")


@dataclass
class RunConfig:
    command: str
    act: str = "relu"
    p: int = 4
    s: int = 3
    binary: bool = False
    target: str = "sin3"
    d: int = 1
    eps: str = "1/8"
    delta: str | None = None
    strategy: str = SHALLOW
    budget: int = field(default_factory=grid_budget)
    out: str | None = None
    net: str | None = None
    seed: int = 0
    jobs: int = 1
    exact: bool = False
    which: str = "all"
    explicit: tuple = ()  # target flags given on the command line

    def validate(self) -> "RunConfig":
        FxFormat(self.p, self.s)
        if not (self.act in ZOO_NAMES or self.act.startswith("table:")):
            raise ValueError(f"unknown activation {self.act!r}")
        if not (self.target in BUILTIN_TARGETS or self.target.startswith("table:")):
            raise ValueError(f"unknown target {self.target!r}")
        if Fraction(self.eps) <= 0:
            raise ValueError("eps must be positive")
        if self.strategy not in (SHALLOW, DEEP):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.d < 1 or self.jobs < 1:
            raise ValueError("d and jobs must be positive")
        return self

    @property
    def fmt(self) -> FxFormat:
        return FxFormat(self.p, self.s)


def load_target_table(path, fmt: FxFormat) -> Target:
    """Lines of ``x_1 ... x_d y`` (numerators over s); '#' starts a comment."""
    rows = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].split()
        if line:
            nums = [int(t) for t in line]
            rows[tuple(nums[:-1])] = nums[-1]
    d = len(next(iter(rows)))
    return table_target(rows, d, f"table:{path}")


def resolve_target(cfg: RunConfig) -> Target:
    if cfg.target.startswith("table:"):
        return load_target_table(cfg.target[len("table:"):], cfg.fmt)
    return make_target(cfg.target, cfg.fmt, cfg.d, cfg.seed)


def _dump(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"
    if path:
        Path(path).write_text(text)


# ---------------------------------------------------------------- commands

def cmd_analyze(cfg: RunConfig) -> int:
    fmt = cfg.fmt
    table = table_for(cfg.act, fmt)
    act = None if cfg.act.startswith("table:") else get_activation(cfg.act, fmt)
    rep = conditions.analyze_table(table, cfg.binary, act)
    out = rep.to_json()
    out["config"] = asdict(cfg)
    _dump(out, cfg.out)
    print(f"{rep.activation} {rep.format} [{rep.mode}]: {rep.verdict}")
    if rep.condition1:
        print(f"  Condition 1 witness: {rep.condition1}")
    if rep.divisor_r:
        print(f"  divisor witness r = {rep.divisor_r}")
    if rep.sufficiency_items is not None:
        print(f"  sufficiency items: {sorted(rep.sufficiency_items, key=int) or 'none'}")
    for n in rep.notes:
        print(f"  note: {n}")
    return rep.exit_code


def cmd_build(cfg: RunConfig) -> int:
    fmt = cfg.fmt
    table = table_for(cfg.act, fmt)
    act = None if cfg.act.startswith("table:") else get_activation(cfg.act, fmt)
    target = resolve_target(cfg)
    try:
        A = build_approximator(table, target, Fraction(cfg.eps), cfg.strategy, cfg.binary,
                               cfg.delta and Fraction(cfg.delta), act)
    except (NotUniversal, NotRepresentable, conditions.ConditionViolated) as e:
        print(f"build refused: {e}", file=sys.stderr)
        return conditions.EXIT_CODES[conditions.NOT_UNIVERSAL]
    out = Path(cfg.out or "out.qnet")
    save_net(A.net, out)
    man = dict(A.manifest)
    man["config"] = asdict(cfg)
    _dump(man, out.with_suffix(out.suffix + ".json"))
    print(f"wrote {out} ({A.manifest['params']} parameters, {A.manifest['cells']} cells, "
          f"bound {A.manifest['param_bound']})")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    path = Path(cfg.net or "out.qnet")
    net = load_net(path)
    man_path = path.with_suffix(path.suffix + ".json")
    manifest = json.loads(man_path.read_text()) if man_path.exists() else {}
    mc = manifest.get("config", {})
    # fill target details the build recorded unless overridden on the command line
    for key in ("target", "d", "seed"):
        if key in mc and key not in cfg.explicit:
            setattr(cfg, key, mc[key])
    cfg.p, cfg.s = net.fmt.p, net.fmt.s
    target = resolve_target(cfg)
    run = verify_approximation(net, target, Fraction(cfg.eps), cfg.budget, cfg.exact,
                               subject=str(path), jobs=cfg.jobs)
    if manifest.get("param_bound"):
        net.meta.update(manifest)
        for c in audit_params(net, "approximator").checks:
            run.add(c)
    rep = run.to_json()
    rep["config"] = asdict(cfg)
    _dump(rep, cfg.out)
    for c in run.checks:
        w = f" witness={c.witness}" if c.witness else ""
        print(f"{c.id}: {c.status} {c.detail}{w}")
    print("PASS" if run.passed else "FAIL")
    return 0 if run.passed else EXIT_FAIL


def cmd_repro(cfg: RunConfig) -> int:
    runs = []
    if cfg.which in ("naive-quantization", "all"):
        runs.append(repro_naive_quantization())
    if cfg.which in ("hardtanh", "all"):
        runs.append(repro_hardtanh(False))
    if cfg.which in ("hardtanh-binary", "all"):
        runs.append(repro_hardtanh(True))
    for r in runs:
        print(f"[{r.subject}] {'PASS' if r.passed else 'FAIL'}")
        for c in r.checks:
            print(f"  {c.id}: {c.status} {c.detail}")
    _dump({"schema": "quantua.repro/1", "runs": [r.to_json() for r in runs]}, cfg.out)
    return 0 if all(r.passed for r in runs) else EXIT_FAIL


COMMANDS = {"analyze": cmd_analyze, "build": cmd_build, "verify": cmd_verify, "repro": cmd_repro}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quantua", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, target=False):
        p.add_argument("--act", default="relu", help="zoo name or table:<file.qt>")
        p.add_argument("--p", type=int, default=4)
        p.add_argument("--s", type=int, default=3)
        p.add_argument("--binary", action="store_true", help="weights restricted to +-1")
        p.add_argument("--out", help="report / network output path")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--budget", type=int, default=grid_budget(),
                       help="grid evaluations before falling back to sampling")
        if target:
            p.add_argument("--target", default=None, help=f"{'|'.join(BUILTIN_TARGETS)} or table:<file>")
            p.add_argument("--d", type=int, default=None)
            p.add_argument("--eps", default="1/8")
            p.add_argument("--seed", type=int, default=None)

    common(sub.add_parser("analyze", help="decide universality of an activation/format pair"))
    b = sub.add_parser("build", help="compile an approximator network")
    common(b, True)
    b.add_argument("--delta", help="cell side (default eps / Lipschitz constant)")
    b.add_argument("--strategy", choices=(SHALLOW, DEEP), default=SHALLOW)
    v = sub.add_parser("verify", help="check a built network against its target")
    common(v, True)
    v.add_argument("--net", default="out.qnet")
    v.add_argument("--exact", action="store_true", help="also require net == round(target)")
    r = sub.add_parser("repro", help="reproduce the counterexamples")
    r.add_argument("which", choices=REPROS, nargs="?", default="all")
    r.add_argument("--out")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    kw = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    kw["explicit"] = tuple(k for k in ("target", "d", "seed") if getattr(ns, k, None) is not None)
    return RunConfig(**kw).validate()


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return COMMANDS[cfg.command](cfg)


if __name__ == "__main__":
    raise SystemExit(main())
