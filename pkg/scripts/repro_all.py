"""Run the counterexample reproductions and a small end-to-end build/verify."""
import json
import sys
from fractions import Fraction

from quantua.activations import table_for
from quantua.construct.approx import build_approximator
from quantua.fxp import FxFormat
from quantua.targets import make_target
from quantua.verify import audit_params, repro_hardtanh, repro_naive_quantization, verify_approximation


def main():
    runs = [repro_naive_quantization(), repro_hardtanh(False), repro_hardtanh(True)]
    fmt = FxFormat(4, 4)
    for d in (1, 2):
        target = make_target("sin3", fmt, d)
        A = build_approximator(table_for("relu", fmt), target, Fraction(1, 10))
        runs.append(verify_approximation(A.net, target, Fraction(1, 10), exact=True,
                                         subject=f"relu-sin3-d{d}"))
        runs.append(audit_params(A.net, "approximator"))
    for r in runs:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.subject}")
        for c in r.checks:
            print(f"      {c.id}: {c.status} {c.detail}")
    if len(sys.argv) > 1:
        with open(sys.argv[1], "w") as fh:
            json.dump([r.to_json() for r in runs], fh, indent=2, default=str)
    return 0 if all(r.passed for r in runs) else 1


if __name__ == "__main__":
    raise SystemExit(main())
