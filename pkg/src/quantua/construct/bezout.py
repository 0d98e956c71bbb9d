"""Bezout coefficients with small magnitudes."""
from __future__ import annotations

from typing import Sequence


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, x, y) with a*x + b*y = g = gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def bezout_multi(xs: Sequence[int]) -> list[int]:
    """Coefficients c with sum c_i x_i = gcd(xs), |c_1| <= x_n/d and |c_i| <= x_1/d for i >= 2.

    Starts from any Bezout vector, reduces c_n, ..., c_2 modulo x_1/d and
    chooses each residue's sign against the running partial sum, so the
    tail sum stays within x_1*x_n/d**2; c_1 then absorbs the remainder.
    """
    xs = list(xs)
    if not xs or any(x <= 0 for x in xs) or any(a >= b for a, b in zip(xs, xs[1:])):
        raise ValueError("need strictly increasing positive integers")
    n = len(xs)
    b = [1] + [0] * (n - 1)
    g = xs[0]
    for i in range(1, n):
        g, u, v = egcd(g, xs[i])
        b = [u * c for c in b]
        b[i] = v
    y = [x // g for x in xs]
    y1 = y[0]
    c = [0] * n
    tail = 0
    for j in range(n - 1, 0, -1):
        r = b[j] % y1
        if r == 0:
            cj = 0
        elif tail > 0:
            cj = r - y1
        elif tail < 0:
            cj = r
        else:
            cj = r if r <= y1 - r else r - y1
        c[j] = cj
        tail += cj * y[j]
    c[0] = (1 - tail) // y1
    assert c[0] * y1 + tail == 1
    return c
