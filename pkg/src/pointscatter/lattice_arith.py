"""Exact arithmetic for sums of two and three squares.

Scalar functions (``r2``, ``r3``, ``primitive_r3``) work from factorizations
or small enumerations; the ``*_table`` and ``*_range`` functions produce whole
arrays of representation counts for the spectral sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .budget import active_budget
from .errors import DomainError, ResourceError

# ---------------------------------------------------------------------------
# primes and factorization

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def primes_up_to(n: int) -> np.ndarray:
    """All primes <= n as an int64 array (plain Eratosthenes)."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve).astype(np.int64)


_SMALL_PRIMES = [int(p) for p in primes_up_to(1000)]


def is_prime(n: int) -> bool:
    """Miller-Rabin with a fixed witness set; deterministic below 3.3e24."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES[:25]:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _rho(n: int) -> int:
    # Brent's variant; the sequence of constants c is fixed so results are
    # reproducible run to run.
    if n % 2 == 0:
        return 2
    for c in range(1, 200):
        y, r, q, g = 2, 1, 1, 1
        x = ys = y
        f = lambda v: (v * v + c) % n  # noqa: E731
        while g == 1:
            x = y
            for _ in range(r):
                y = f(y)
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(128, r - k)):
                    y = f(y)
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += 128
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = f(ys)
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g
    raise ArithmeticError(f"rho failed to split {n}")


@dataclass(frozen=True)
class Factorization:
    n: int
    factors: tuple[tuple[int, int], ...]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.factors)

    def value(self) -> int:
        out = 1
        for p, e in self.factors:
            out *= p**e
        return out


@lru_cache(maxsize=1 << 16)
def factorize(n: int) -> Factorization:
    """Prime factorization of n >= 1 (trial division, then rho)."""
    if n < 1:
        raise DomainError(f"factorize needs n >= 1, got {n}")
    out: dict[int, int] = {}
    m = n
    for p in _SMALL_PRIMES:
        if p * p > m:
            break
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out[p] = e
    stack = [m] if m > 1 else []
    while stack:
        x = stack.pop()
        if x == 1:
            continue
        if is_prime(x):
            out[x] = out.get(x, 0) + 1
            continue
        d = _rho(x)
        stack.extend((d, x // d))
    return Factorization(n, tuple(sorted(out.items())))


def big_omega(n: int) -> int:
    """Number of prime factors of n counted with multiplicity."""
    if n == 1:
        return 0
    return sum(e for _, e in factorize(n))


# ---------------------------------------------------------------------------
# scalar representation counts


def r2(n: int) -> int:
    """Number of integer points on the circle x^2 + y^2 = n."""
    if n < 0:
        return 0
    if n == 0:
        return 1
    out = 4
    for p, e in factorize(n):
        if p % 4 == 3:
            if e % 2:
                return 0
        elif p % 4 == 1:
            out *= e + 1
    return out


def _strip_fours(n: int) -> int:
    while n and n % 4 == 0:
        n //= 4
    return n


def is_sum_of_three_squares(n: int) -> bool:
    """Legendre: n is a sum of three squares unless n = 4^a (8b + 7)."""
    if n < 0:
        return False
    return n == 0 or _strip_fours(n) % 8 != 7


def in_spectrum(dim: int, n: int) -> bool:
    """Whether n is an old eigenvalue, i.e. r_dim(n) > 0."""
    if dim == 3:
        return is_sum_of_three_squares(n)
    if dim == 2:
        return r2(n) > 0
    raise DomainError(f"dim must be 2 or 3, got {dim}")


def r3(n: int) -> int:
    """Number of integer points on the sphere x^2 + y^2 + z^2 = n."""
    if n < 0:
        return 0
    if n == 0:
        return 1
    n = _strip_fours(n)
    if n % 8 == 7:
        return 0
    total = r2(n)
    for z in range(1, math.isqrt(n) + 1):
        total += 2 * r2(n - z * z)
    return total


def primitive_r3(n: int) -> int:
    """R3(n): representations x^2 + y^2 + z^2 = n with gcd(x, y, z) = 1."""
    if n < 1:
        raise DomainError(f"primitive_r3 needs n >= 1, got {n}")
    s = math.isqrt(n)
    t = np.arange(-s, s + 1, dtype=np.int64)
    x, y = np.meshgrid(t, t, indexing="ij")
    zz = n - x * x - y * y
    ok = zz >= 0
    x, y, zz = x[ok], y[ok], zz[ok]
    z = isqrt_array(zz)
    hit = z * z == zz
    x, y, z = x[hit], y[hit], z[hit]
    prim = np.gcd(np.gcd(x, y), z) == 1
    return int(np.where(z[prim] == 0, 1, 2).sum())


def verify_r3_moebius(n: int) -> bool:
    """Check r3(n) == sum over d^2 | n of R3(n / d^2)."""
    if n < 1:
        raise DomainError(f"verify_r3_moebius needs n >= 1, got {n}")
    rhs = sum(
        primitive_r3(n // (d * d))
        for d in range(1, math.isqrt(n) + 1)
        if n % (d * d) == 0
    )
    return r3(n) == rhs


def gn_class(n: int) -> int:
    """The residue weight G_n in the class-number formula for R3(n)."""
    if n < 1:
        raise DomainError(f"gn_class needs n >= 1, got {n}")
    res = n % 8
    if res in (0, 4, 7):
        return 0
    if res == 3:
        return 16
    return 24


def r_d(dim: int, n: int) -> int:
    if dim == 2:
        return r2(n)
    if dim == 3:
        return r3(n)
    raise DomainError(f"dim must be 2 or 3, got {dim}")


# ---------------------------------------------------------------------------
# vectorized helpers


def isqrt_array(a: np.ndarray) -> np.ndarray:
    """Elementwise floor(sqrt(a)) for nonnegative int64 arrays."""
    a = np.asarray(a, dtype=np.int64)
    s = np.floor(np.sqrt(a.astype(np.float64))).astype(np.int64)
    s = np.maximum(s, 0)
    while True:
        too_big = s * s > a
        if not too_big.any():
            break
        s[too_big] -= 1
    while True:
        too_small = (s + 1) * (s + 1) <= a
        if not too_small.any():
            break
        s[too_small] += 1
    return s


def _ceil_sqrt_array(a: np.ndarray) -> np.ndarray:
    a = np.maximum(np.asarray(a, dtype=np.int64), 0)
    s = isqrt_array(a)
    return s + (s * s < a)


def _expand_ranges(starts: np.ndarray, ends: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For inclusive integer ranges, return (range index, value) per element."""
    lengths = np.maximum(ends - starts + 1, 0)
    idx = np.repeat(np.arange(len(starts)), lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return idx, starts[idx] + offsets


def _square_weights(limit: int) -> np.ndarray:
    w = np.zeros(limit + 1, dtype=np.float64)
    k = np.arange(math.isqrt(limit) + 1)
    w[k * k] = 2.0
    w[0] = 1.0
    return w


# ---------------------------------------------------------------------------
# tables and windows


def _cap_size(n: int) -> int:
    return max(1 << 12, 1 << int(math.ceil(math.log2(max(n, 1) + 1))))


@lru_cache(maxsize=4)
def _r2_table_pow2(size: int) -> np.ndarray:
    limit = size - 1
    xs = np.arange(math.isqrt(limit) + 1, dtype=np.int64)
    ymax = isqrt_array(limit - xs * xs)
    xi, ys = _expand_ranges(np.zeros_like(xs), ymax)
    x = xs[xi]
    n = x * x + ys * ys
    weight = np.where(x > 0, 2, 1) * np.where(ys > 0, 2, 1)
    table = np.bincount(n, weights=weight, minlength=size).astype(np.int64)
    table.setflags(write=False)
    return table


def r2_table(limit: int) -> np.ndarray:
    """r2(n) for 0 <= n <= limit (exact, read-only view)."""
    budget = active_budget()
    if limit > budget.table_cap_2d:
        raise ResourceError(
            f"r2 table up to {limit} exceeds budget '{budget.name}' "
            f"(table_cap_2d={budget.table_cap_2d})"
        )
    return _r2_table_pow2(_cap_size(limit))[: limit + 1]


@lru_cache(maxsize=3)
def _r3_table_pow2(size: int) -> np.ndarray:
    limit = size - 1
    r2t = _r2_table_pow2(size).astype(np.float64)
    raw = fftconvolve(r2t, _square_weights(limit))[:size]
    table = np.rint(raw).astype(np.int64)
    if np.max(np.abs(raw - table)) > 0.25:
        raise ArithmeticError("FFT rounding too large for r3 table")
    table.setflags(write=False)
    return table


def r3_table(limit: int) -> np.ndarray:
    """r3(n) for 0 <= n <= limit (exact, read-only view)."""
    budget = active_budget()
    if limit > budget.table_cap_3d:
        raise ResourceError(
            f"r3 table up to {limit} exceeds budget '{budget.name}' "
            f"(table_cap_3d={budget.table_cap_3d})"
        )
    return _r3_table_pow2(_cap_size(limit))[: limit + 1]


def r_table(dim: int, limit: int) -> np.ndarray:
    if dim == 2:
        return r2_table(limit)
    if dim == 3:
        return r3_table(limit)
    raise DomainError(f"dim must be 2 or 3, got {dim}")


def r2_range(lo: int, hi: int) -> np.ndarray:
    """r2(n) for lo <= n <= hi by a segmented factorization sieve.

    Memory is O(hi - lo + sqrt(hi)).
    """
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    lo = max(lo, 0)
    n = np.arange(lo, hi + 1, dtype=np.int64)
    rem = n.copy()
    out = np.ones(len(n), dtype=np.int64)
    for p in primes_up_to(math.isqrt(hi)):
        p = int(p)
        start = (-lo) % p
        if start >= len(n):
            continue
        sub = rem[start::p]
        if lo == 0 and start == 0:
            sub = sub[1:]  # n = 0 handled below
            first = start + p
        else:
            first = start
        e = np.zeros(len(sub), dtype=np.int64)
        mask = sub % p == 0
        while mask.any():
            sub[mask] //= p
            e[mask] += 1
            mask = sub % p == 0
        rem[first::p] = sub
        if p % 4 == 3:
            out[first::p] *= (e % 2 == 0)
        elif p % 4 == 1:
            out[first::p] *= e + 1
    big = rem > 1
    out[big & (rem % 4 == 3)] = 0
    out[big & (rem % 4 == 1)] *= 2
    out *= 4
    if lo == 0:
        out[0] = 1
    return out


def r3_range(lo: int, hi: int) -> np.ndarray:
    """r3(n) for lo <= n <= hi by scanning (x, y) and solving for z.

    Work is O(hi) and memory O(hi - lo + sqrt(hi)^2 / chunk).
    """
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    lo = max(lo, 0)
    budget = active_budget()
    if hi > budget.scan_cap_3d:
        raise ResourceError(
            f"3D coordinate scan up to {hi} exceeds budget '{budget.name}' "
            f"(scan_cap_3d={budget.scan_cap_3d})"
        )
    counts = np.zeros(hi - lo + 1, dtype=np.int64)
    X = math.isqrt(hi)
    for x in range(0, X + 1):
        wx = 1 if x == 0 else 2
        ys = np.arange(0, math.isqrt(hi - x * x) + 1, dtype=np.int64)
        wy = np.where(ys > 0, 2, 1)
        base = x * x + ys * ys
        zmin = _ceil_sqrt_array(lo - base)
        zmax = isqrt_array(hi - base)
        yi, zs = _expand_ranges(zmin, zmax)
        if len(zs) == 0:
            continue
        vals = base[yi] + zs * zs - lo
        w = wx * wy[yi] * np.where(zs > 0, 2, 1)
        counts += np.bincount(vals, weights=w, minlength=len(counts)).astype(np.int64)
    return counts


def r_range(dim: int, lo: int, hi: int) -> np.ndarray:
    """Exact r_dim(n) for lo <= n <= hi, choosing table, sieve or scan."""
    lo = max(int(lo), 0)
    hi = int(hi)
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    budget = active_budget()
    if dim == 2:
        if hi <= budget.table_cap_2d and (hi < 4 * (hi - lo + 1) or hi <= 1 << 20):
            return np.array(r2_table(hi)[lo:], dtype=np.int64)
        budget.check_window(hi - lo + 1 + math.isqrt(hi))
        return r2_range(lo, hi)
    if dim == 3:
        if hi <= budget.table_cap_3d:
            return np.array(r3_table(hi)[lo:], dtype=np.int64)
        budget.check_window(hi - lo + 1 + math.isqrt(hi))
        return r3_range(lo, hi)
    raise DomainError(f"dim must be 2 or 3, got {dim}")


@lru_cache(maxsize=4096)
def lattice_count(dim: int, x: int) -> int:
    """Number of xi in Z^dim with |xi|^2 <= x (x an integer)."""
    if x < 0:
        return 0
    X = math.isqrt(x)
    ks = np.arange(-X, X + 1, dtype=np.int64)
    if dim == 2:
        return int(np.sum(2 * isqrt_array(x - ks * ks) + 1))
    if dim == 3:
        budget = active_budget()
        if x <= min(budget.table_cap_3d, 1 << 22):
            return int(np.sum(r3_table(x)))
        total = 0
        for z in range(-X, X + 1):
            rest = x - z * z
            Y = math.isqrt(rest)
            ys = np.arange(-Y, Y + 1, dtype=np.int64)
            total += int(np.sum(2 * isqrt_array(rest - ys * ys) + 1))
        return total
    raise DomainError(f"dim must be 2 or 3, got {dim}")


def lattice_points_between(dim: int, lo: int, hi: int) -> np.ndarray:
    """All xi in Z^dim with lo <= |xi|^2 <= hi, as an (N, dim) int64 array.

    Rows are sorted by squared norm, then lexicographically.
    """
    lo = max(int(lo), 0)
    hi = int(hi)
    if hi < lo:
        return np.zeros((0, dim), dtype=np.int64)
    X = math.isqrt(hi)
    if dim == 2:
        xs = np.arange(-X, X + 1, dtype=np.int64)
        base = xs * xs
        heads = [xs]
    elif dim == 3:
        g = np.arange(-X, X + 1, dtype=np.int64)
        gx, gy = np.meshgrid(g, g, indexing="ij")
        gx, gy = gx.ravel(), gy.ravel()
        keep = gx * gx + gy * gy <= hi
        gx, gy = gx[keep], gy[keep]
        base = gx * gx + gy * gy
        heads = [gx, gy]
    else:
        raise DomainError(f"dim must be 2 or 3, got {dim}")
    tmax = isqrt_array(hi - base)
    tmin = _ceil_sqrt_array(lo - base)
    # nonnegative last coordinate in [tmin, tmax], then mirror the positive part
    i_pos, t_pos = _expand_ranges(tmin, tmax)
    neg = t_pos > 0
    i_all = np.concatenate([i_pos, i_pos[neg]])
    t_all = np.concatenate([t_pos, -t_pos[neg]])
    pts = np.stack([h[i_all] for h in heads] + [t_all], axis=1)
    norms = np.sum(pts * pts, axis=1)
    order = np.lexsort(tuple(pts[:, j] for j in range(dim - 1, -1, -1)) + (norms,))
    return pts[order]


def shell_points(dim: int, n: int) -> np.ndarray:
    return lattice_points_between(dim, n, n)


# ---------------------------------------------------------------------------
# public shell types


@dataclass(frozen=True)
class Shell:
    n: int
    dim: int
    count: int
    points: np.ndarray | None = field(default=None, compare=False, repr=False)

    def with_points(self) -> "Shell":
        if self.points is not None:
            return self
        return Shell(self.n, self.dim, self.count, shell_points(self.dim, self.n))


@dataclass(frozen=True)
class DirectionSet:
    """Radial projection of the lattice points on one shell.

    Integer vectors are kept exactly; ``directions`` normalizes on demand.
    """

    n: int
    dim: int
    vectors: np.ndarray = field(compare=False, repr=False)

    @property
    def directions(self) -> np.ndarray:
        return self.vectors / math.sqrt(self.n)

    def __len__(self) -> int:
        return len(self.vectors)

    def key(self) -> frozenset:
        """Exact direction identity: each vector divided by its own content."""
        out = set()
        for v in self.vectors:
            g = math.gcd(*(int(c) for c in v))
            out.add(tuple(int(c) // g for c in v))
        return frozenset(out)


def shells_in_window(dim: int, lo: float, hi: float) -> list[Shell]:
    """All shells with lo <= n <= hi and r_dim(n) > 0, ascending."""
    if lo < 0 or hi < lo:
        raise DomainError(f"need 0 <= lo <= hi, got ({lo}, {hi})")
    a, b = int(math.ceil(lo)), int(math.floor(hi))
    if b < a:
        return []
    counts = r_range(dim, a, b)
    idx = np.flatnonzero(counts)
    return [Shell(a + int(i), dim, int(counts[i])) for i in idx]


def direction_set(dim: int, n: int) -> DirectionSet:
    pts = shell_points(dim, n)
    if len(pts) == 0:
        raise DomainError(f"shell n={n} is empty in dimension {dim}")
    return DirectionSet(n, dim, pts)


def next_in_spectrum(dim: int, x: float) -> int:
    """Smallest n with r_dim(n) > 0 and n > x."""
    n = max(int(math.floor(x)) + 1, 0)
    while not in_spectrum(dim, n):
        n += 1
    return n


def prev_in_spectrum(dim: int, x: float) -> int | None:
    """Largest n with r_dim(n) > 0 and n < x, or None below zero."""
    n = int(math.ceil(x)) - 1
    while n >= 0 and not in_spectrum(dim, n):
        n -= 1
    return n if n >= 0 else None


def spectrum_elements(dim: int, upto: int) -> np.ndarray:
    """Sorted elements of N_dim in [0, upto]."""
    return np.flatnonzero(r_table(dim, upto)).astype(np.int64)


def divisor_square_sum(values: Sequence[int], n: int) -> int:
    return sum(values[n // (d * d)] for d in range(1, math.isqrt(n) + 1) if n % (d * d) == 0)
