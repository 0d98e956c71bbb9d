"""Recompute the derivative and magnitude bounds quoted for the zoo and audit them numerically."""
from quantua.activations import REFERENCE_BOUNDS, audit_derivative_bounds, derivative_bounds, get_activation, reference_quantity


def main():
    worst = 0.0
    for name, qty, interval, quoted in REFERENCE_BOUNDS:
        act = get_activation(name)
        got = reference_quantity(act, qty, interval)
        worst = max(worst, abs(got - quoted))
        lo, hi = (float(interval[0]), float(interval[1]))
        print(f"{name:9} {qty:8} [{lo:+.3f}, {hi:+.3f}]  quoted {quoted:<5} computed {got:.4f}")
    print(f"largest deviation {worst:.4f}")
    for name in ("relu", "elu", "silu", "mish", "gelu"):
        act = get_activation(name)
        lo, hi = derivative_bounds(act, 0, 20)
        audit = audit_derivative_bounds(act, (0, 20), lo, hi)
        print(f"finite-difference audit {name}: {audit}")


if __name__ == "__main__":
    main()
