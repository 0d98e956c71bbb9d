"""Verdict table for the activation zoo over a few formats (general and +-1 weights)."""
import argparse
import json

from quantua.activations import ZOO_NAMES, get_activation
from quantua.conditions import verdict
from quantua.fxp import FxFormat


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--formats", default="3,1 4,3 5,4 6,8", help="space-separated p,s pairs")
    ap.add_argument("--json", help="write rows here")
    args = ap.parse_args()
    rows = []
    print(f"{'activation':12} {'format':10} {'general':13} {'binary':13} items")
    for tok in args.formats.split():
        p, s = map(int, tok.split(","))
        fmt = FxFormat(p, s)
        for name in ZOO_NAMES:
            act = get_activation(name, fmt)
            g, b = verdict(act, fmt), verdict(act, fmt, True)
            items = sorted(g.sufficiency_items or {}, key=int)
            rows.append({"activation": name, "format": str(fmt), "general": g.verdict,
                         "binary": b.verdict, "items": items, "divisor_r": g.divisor_r})
            print(f"{name:12} {str(fmt):10} {g.verdict:13} {b.verdict:13} {','.join(items)}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
