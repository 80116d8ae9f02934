"""Independent reference values.

The 2D lattice sums are evaluated row by row: for fixed x the sum over y of
1/(y^2 + c) is pi coth(pi sqrt c)/sqrt c, and the rows decay like |x|^-3, so
the outer sum is truncated with Hurwitz-zeta tails.  No shell counts are used.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import zeta


def _row(c: np.ndarray) -> np.ndarray:
    a = np.sqrt(c.astype(complex))
    return np.pi / (a * np.tanh(np.pi * a))


def spectral_sum_2d(lam: float, X: int = 200_000) -> float:
    """sum over Z^2 of 1/(|xi|^2 - lam) - |xi|^2/(|xi|^4 + 1)."""
    x = np.arange(-X, X + 1, dtype=np.float64)
    rows = _row(x * x - lam) - _row(x * x - 1j).real
    head = math.fsum(np.real(rows).tolist())
    tail = 2 * np.pi * (lam / 2 * zeta(3, X + 1) + 3 * (lam * lam + 1) / 8 * zeta(5, X + 1))
    return head + tail


def spectral_deriv_2d(lam: float, X: int = 200_000) -> float:
    """sum over Z^2 of 1/(|xi|^2 - lam)^2, via d/dlam of the row formula."""
    x = np.arange(-X, X + 1, dtype=np.float64)
    c = (x * x - lam).astype(complex)
    a = np.sqrt(c)
    # d/dc [pi coth(pi a)/a] with a = sqrt c, times dc/dlam = -1
    th = np.tanh(np.pi * a)
    d_da = -np.pi / (a * a * th) + np.pi * np.pi * (1 - 1 / th**2) / a
    rows = -(d_da / (2 * a)).real
    head = math.fsum(rows.tolist())
    tail = 2 * np.pi * (0.5 * zeta(3, X + 1) + 3 * lam / 4 * zeta(5, X + 1))
    return head + tail


def c0_2d(X: int = 200_000) -> float:
    """sum over Z^2 of 1/(|xi|^4 + 1)."""
    x = np.arange(-X, X + 1, dtype=np.float64)
    rows = _row(x * x - 1j).imag
    head = math.fsum(rows.tolist())
    tail = 2 * np.pi * (0.5 * zeta(3, X + 1))
    return head + tail


def direct_sum(r: np.ndarray, lam: float, kernel: str = "value") -> float:
    """Plain compensated sum over a table of shell counts r[0..N]."""
    n = np.arange(len(r), dtype=np.float64)
    if kernel == "value":
        terms = r * (1 / (n - lam) - n / (n * n + 1))
    else:
        terms = r / (n - lam) ** 2
    return math.fsum(terms.tolist())


def brute_r2_table(N: int) -> np.ndarray:
    """Count (x, y) with x^2 + y^2 = n for n <= N by direct enumeration."""
    s = math.isqrt(N)
    x = np.arange(-s, s + 1, dtype=np.int64)
    n = (x[:, None] ** 2 + x[None, :] ** 2).ravel()
    return np.bincount(n[n <= N], minlength=N + 1)


def brute_r3_table(N: int) -> np.ndarray:
    s = math.isqrt(N)
    x = np.arange(-s, s + 1, dtype=np.int64)
    sq = x * x
    out = np.zeros(N + 1, dtype=np.int64)
    for a in sq:
        n = (a + sq[:, None] + sq[None, :]).ravel()
        out += np.bincount(n[n <= N], minlength=N + 1)
    return out


def brute_points(dim: int, n: int) -> set[tuple[int, ...]]:
    s = math.isqrt(n)
    rng = range(-s, s + 1)
    if dim == 2:
        return {(a, b) for a in rng for b in rng if a * a + b * b == n}
    return {(a, b, c) for a in rng for b in rng for c in rng if a * a + b * b + c * c == n}


def r3_deriv_sum(lam: float, skip: int, N: int = 400_000) -> float:
    """sum_{n != skip} r3(n)/(n - lam)^2 from exact enumeration up to N.

    Beyond N the mean density 2 pi sqrt(x) is integrated in closed form.
    """
    r = brute_r3_table_fast(N).astype(np.float64)
    n = np.arange(N + 1, dtype=np.float64)
    t = r / (n - lam) ** 2
    t[skip] = 0.0
    a = N + 0.5
    sa, sl = math.sqrt(a), math.sqrt(lam)
    tail = 2 * np.pi * (sa / (a - lam) - math.log((sa - sl) / (sa + sl)) / (2 * sl))
    return math.fsum(t.tolist()) + tail


def brute_r3_table_fast(N: int) -> np.ndarray:
    """r3 as the convolution of the r2 enumeration with the squares."""
    r2 = brute_r2_table(N)
    s = math.isqrt(N)
    out = np.zeros(N + 1, dtype=np.int64)
    for x in range(-s, s + 1):
        out[x * x:] += r2[: N + 1 - x * x]
    return out


def brute_pair_sum(m: int, delta: float, w: tuple[int, int], L: int = 3000) -> float:
    """sum over the box |x|, |y| <= L of c(v) c(v + w), c(v) = 1/(|v|^2 - m - delta)."""
    x = np.arange(-L, L + 1, dtype=np.float64)
    X, Y = np.meshgrid(x, x, indexing="ij")
    c1 = 1 / ((X * X + Y * Y - m) - delta)
    c2 = 1 / (((X + w[0]) ** 2 + (Y + w[1]) ** 2 - m) - delta)
    return math.fsum((c1 * c2).ravel().tolist())


def brute_negatives(m: int, delta: float, w: tuple[int, int]) -> set[tuple[int, int]]:
    """Every v with c(v) c(v + w) < 0, by scanning a box around the circle."""
    L = math.isqrt(m) + abs(w[0]) + abs(w[1]) + 3
    out = set()
    for a in range(-L, L + 1):
        for b in range(-L, L + 1):
            p = ((a * a + b * b - m) - delta) * (((a + w[0]) ** 2 + (b + w[1]) ** 2 - m) - delta)
            if p < 0:
                out.add((a, b))
    return out
