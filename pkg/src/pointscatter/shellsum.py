"""Windowed lattice-shell sums with a density tail.

A :class:`ShellPlan` fixes an integer center ``m`` and a set of exactly
summed shells; the remaining shells are replaced by the mean lattice density
through a Stieltjes integration by parts against the exact lattice count, so
the only modeled quantity is the remainder integral of E(x) g'(x), where
E = A - V is the lattice-count discrepancy.  The plan evaluates, for any offset
delta with lambda = m + delta,

    S(delta)  = sum_n r(n) (1/(n - lambda) - n/(n^2 + 1))
    S'(delta) = sum_n r(n) / (n - lambda)^2

Exact shells far from the center are folded into power moments
P_j = sum r(n) (n - m)^-j, so repeated evaluation inside one gap costs only
the near block of shells.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import lattice_arith as la

EPS = np.finfo(float).eps

# |E(x)| <= KAPPA * x^THETA for x >= 2^14, observed on x <= 2^23 (d=2) and
# x <= 2^22 (d=3) with margin; frozen.
THETA = {2: 1.0 / 3.0, 3: 0.75}
KAPPA = {2: 3.0, 3: 2.0}
SAFETY = 2.0

NEAR = 2048  # shells with |n - m| <= NEAR are summed directly
MOMENTS = 26
BLOCK = 1024


def volume(dim: int, x: float) -> float:
    """Mean lattice count V(x) ~ #{xi : |xi|^2 <= x}."""
    if dim == 2:
        return math.pi * x
    return 4.0 / 3.0 * math.pi * x**1.5


def _blocked_sum(a: np.ndarray) -> float:
    # pairwise numpy sums per fixed block, merged exactly; deterministic
    if len(a) <= BLOCK:
        return math.fsum(a.tolist())
    pad = (-len(a)) % BLOCK
    if pad:
        a = np.concatenate([a, np.zeros(pad)])
    return math.fsum(a.reshape(-1, BLOCK).sum(axis=1).tolist())


def _log1p_c(z: complex) -> complex:
    w = 1.0 + z
    if w == 1.0:
        return z
    return cmath.log(w) * z / (w - 1.0)


# ---------------------------------------------------------------------------
# closed-form density integrals over [a, b] (b may be inf); lam off [a, b]


def _int2_value(a: float, b: float, lam: float) -> float:
    """int_a^b pi (1/(x-lam) - x/(x^2+1)) dx."""

    def F(x: float) -> float:
        # log|x - lam| - log sqrt(x^2 + 1), arranged to avoid cancellation
        if x == math.inf:
            return 0.0
        return math.log1p(-lam / x) + math.log(abs(x) / math.hypot(x, 1.0)) if x > lam else (
            math.log(lam - x) - 0.5 * math.log1p(x * x)
        )

    return math.pi * (F(b) - F(a))


def _int2_deriv(a: float, b: float, lam: float) -> float:
    """int_a^b pi / (x-lam)^2 dx."""
    fb = 0.0 if b == math.inf else -1.0 / (b - lam)
    return math.pi * (fb + 1.0 / (a - lam))


def _L(x: float, c: complex) -> complex:
    # log((sqrt x - sqrt c) / (sqrt x + sqrt c)), with |.| inside for real c
    sx = math.sqrt(x)
    if isinstance(c, (int, float)):
        sc = math.sqrt(c)
        if x > c:
            return complex(math.log1p(-2.0 * sc / (sx + sc)))
        return complex(math.log1p(-2.0 * sx / (sx + sc)))
    sc = cmath.sqrt(c)
    return _log1p_c(-2.0 * sc / (sx + sc))


def _int3_value(a: float, b: float, lam: float) -> float:
    """int_a^b 2 pi sqrt(x) (1/(x-lam) - x/(x^2+1)) dx; a, b > 0."""
    # antiderivatives 2 sqrt x + sqrt c L(x, c); the 2 sqrt x parts cancel
    si = cmath.sqrt(1j)

    def F(x: float) -> float:
        if x == math.inf:
            return 0.0
        return math.sqrt(lam) * _L(x, lam).real - (si * _L(x, 1j)).real

    return 2.0 * math.pi * (F(b) - F(a))


def _int3_deriv(a: float, b: float, lam: float) -> float:
    """int_a^b 2 pi sqrt(x) / (x-lam)^2 dx; a, b > 0."""
    sl = math.sqrt(lam) if lam > 0 else 0.0

    def F(x: float) -> float:
        if x == math.inf:
            return 0.0
        out = -math.sqrt(x) / (x - lam)
        if sl > 0:
            out += _L(x, lam).real / (2.0 * sl)
        return out

    return 2.0 * math.pi * (F(b) - F(a))


def _kernel(x: float, lam: float) -> float:
    return (1.0 + x * lam) / ((x - lam) * (x * x + 1.0))


def _kernel_d(x: float, lam: float) -> float:
    # derivative of _kernel in x
    return -1.0 / (x - lam) ** 2 + (x * x - 1.0) / (x * x + 1.0) ** 2


def _abs_int(f, a: float, b: float, lam: float) -> float:
    """int_a^b f for a positive f peaked near lam, which lies outside [a, b]."""
    d0 = min(abs(a - lam), abs(b - lam))
    cuts = [a, b]
    for j in (1, 2, 3):
        for x in (lam + d0 * 8**j, lam - d0 * 8**j):
            if a < x < b:
                cuts.append(x)
    cuts = sorted(cuts)
    total = 0.0
    for lo, up in zip(cuts[:-1], cuts[1:]):
        if up == math.inf:
            # x = lo / t maps [lo, inf) onto (0, 1]
            g = lambda t, lo=lo: f(lo / t) * lo / (t * t) if t > 0 else 0.0  # noqa: E731
            total += quad(g, 0.0, 1.0, limit=200, epsabs=0.0, epsrel=1e-6)[0]
        else:
            total += quad(f, lo, up, limit=200, epsabs=0.0, epsrel=1e-6)[0]
    return total


@dataclass(frozen=True)
class TailPiece:
    """Integers lo..hi (hi=None for infinity) replaced by the density model."""

    lo: int
    hi: int | None
    e_lo: float  # E at lo - 1/2
    e_hi: float  # E at hi + 1/2 (0 for the infinite piece)

    @property
    def a(self) -> float:
        return self.lo - 0.5

    @property
    def b(self) -> float:
        return math.inf if self.hi is None else self.hi + 0.5


def _discrepancy(dim: int, n: int) -> float:
    """E(n + 1/2) = A(n) - V(n + 1/2)."""
    if n < 0:
        return -volume(dim, 0.0)
    return la.lattice_count(dim, n) - volume(dim, n + 0.5)


def make_tail(dim: int, lo: int, hi: int | None) -> TailPiece:
    e_lo = _discrepancy(dim, lo - 1)
    e_hi = 0.0 if hi is None else _discrepancy(dim, hi)
    return TailPiece(lo, hi, e_lo, e_hi)


def tail_value(dim: int, piece: TailPiece, lam: float) -> float:
    a, b = piece.a, piece.b
    integral = _int2_value(a, b, lam) if dim == 2 else _int3_value(a, b, lam)
    gb = 0.0 if b == math.inf else _kernel(b, lam)
    return integral + gb * piece.e_hi - _kernel(a, lam) * piece.e_lo


def tail_deriv(dim: int, piece: TailPiece, lam: float) -> float:
    a, b = piece.a, piece.b
    integral = _int2_deriv(a, b, lam) if dim == 2 else _int3_deriv(a, b, lam)
    gb = 0.0 if b == math.inf else 1.0 / (b - lam) ** 2
    return integral + gb * piece.e_hi - piece.e_lo / (a - lam) ** 2


def tail_bounds(dim: int, piece: TailPiece, lam: float) -> tuple[float, float]:
    """Safety-scaled model error for (value, derivative) on one piece."""
    k, th = KAPPA[dim], THETA[dim]
    a, b = piece.a, piece.b
    bv = _abs_int(lambda x: x**th * abs(_kernel_d(x, lam)), a, b, lam)
    bd = _abs_int(lambda x: x**th * 2.0 / abs(x - lam) ** 3, a, b, lam)
    return SAFETY * k * bv, SAFETY * k * bd


# ---------------------------------------------------------------------------


def _merge(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for lo, hi in sorted(i for i in intervals if i[1] >= i[0]):
        if out and lo <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


@dataclass
class ShellPlan:
    dim: int
    m: int
    exact: tuple[tuple[int, int], ...]
    tails: tuple[TailPiece, ...]
    near_k: np.ndarray = field(repr=False)
    near_r: np.ndarray = field(repr=False)
    moments: np.ndarray = field(repr=False)  # P_j, j = 0..MOMENTS (P_0 unused)
    abs_moment: float  # sum r/|k| over the far exact shells
    const_part: float  # sum over exact shells of r n/(n^2+1)
    r_center: int  # r(m) if m is an exact shell, else 0
    _bounds: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, dim: int, m: int, exact: list[tuple[int, int]],
              tails: list[tuple[int, int | None]]) -> "ShellPlan":
        exact = _merge([(max(lo, 0), hi) for lo, hi in exact])
        near_k, near_r = [], []
        moments = np.zeros(MOMENTS + 1)
        mparts: list[list[float]] = [[] for _ in range(MOMENTS + 1)]
        abs_parts, const_parts = [], []
        r_center = 0
        for lo, hi in exact:
            r = la.r_range(dim, lo, hi).astype(np.float64)
            n = np.arange(lo, hi + 1, dtype=np.float64)
            const_parts.append(_blocked_sum(r * n / (n * n + 1.0)))
            k = np.arange(lo - m, hi - m + 1, dtype=np.int64)
            if lo <= m <= hi:
                r_center = int(r[m - lo])
            near = np.abs(k) <= NEAR
            near_k.append(k[near])
            near_r.append(r[near])
            far = ~near & (r > 0)
            kf = k[far].astype(np.float64)
            rf = r[far]
            if len(kf):
                inv = 1.0 / kf
                term = rf.copy()
                abs_parts.append(_blocked_sum(rf / np.abs(kf)))
                for j in range(1, MOMENTS + 1):
                    term = term * inv
                    mparts[j].append(_blocked_sum(term))
        for j in range(1, MOMENTS + 1):
            moments[j] = math.fsum(mparts[j])
        nk = np.concatenate(near_k) if near_k else np.zeros(0, dtype=np.int64)
        nr = np.concatenate(near_r) if near_r else np.zeros(0)
        keep = nr > 0
        pieces = tuple(make_tail(dim, lo, hi) for lo, hi in tails)
        return cls(dim, m, tuple(exact), pieces, nk[keep], nr[keep], moments,
                   math.fsum(abs_parts), math.fsum(const_parts), r_center)

    # -- evaluation ---------------------------------------------------------

    def _far(self, delta: float, order: int) -> float:
        # order 1: sum r/(k - delta); order 2: sum r/(k - delta)^2
        if not self.moments.any():
            return 0.0
        terms = []
        dj = 1.0
        for j in range(0, MOMENTS - order + 1):
            c = dj * self.moments[j + order] * (1 if order == 1 else j + 1)
            terms.append(c)
            dj *= delta
            if dj == 0.0:
                break
        return math.fsum(terms)

    def max_delta(self) -> float:
        return NEAR / 8.0

    def _check(self, delta: float) -> None:
        if abs(delta) > self.max_delta():
            raise ValueError(f"offset {delta} too large for plan centered at {self.m}")

    def _tail_bound(self, delta: float) -> tuple[float, float]:
        if not self.tails:
            return 0.0, 0.0
        bucket = math.ceil(abs(delta) * 4.0) / 4.0
        if bucket not in self._bounds:
            bv = bd = 0.0
            for s in (-bucket, bucket) if bucket else (0.0,):
                lam = self.m + s
                v = d = 0.0
                for p in self.tails:
                    pv, pd = tail_bounds(self.dim, p, lam)
                    v += pv
                    d += pd
                bv, bd = max(bv, v), max(bd, d)
            self._bounds[bucket] = (bv, bd)
        return self._bounds[bucket]

    def value(self, delta: float, exclude_center: bool = False,
              with_tail: bool = True) -> tuple[float, float]:
        """S(m + delta) (or with the n = m term dropped) and its error bound."""
        self._check(delta)
        k, r = self.near_k, self.near_r
        if exclude_center or delta == 0.0:
            mask = k != 0
            if delta == 0.0 and not exclude_center and self.r_center:
                raise ZeroDivisionError("pole at the plan center")
            k, r = k[mask], r[mask]
        near = r / (k - delta)
        parts = near.tolist()
        parts.append(self._far(delta, 1))
        parts.append(-self.const_part)
        if exclude_center and self.r_center:
            parts.append(self.r_center * self.m / (self.m * self.m + 1.0))
        lam = self.m + delta
        tb_v, _ = self._tail_bound(delta)
        if with_tail:
            parts.extend(tail_value(self.dim, p, lam) for p in self.tails)
        total = math.fsum(parts)
        rounding = 8 * EPS * (float(np.sum(np.abs(near))) + self.abs_moment + abs(self.const_part))
        return total, tb_v + rounding

    def deriv(self, delta: float, exclude_center: bool = False,
              with_tail: bool = True) -> tuple[float, float]:
        """S'(m + delta) (or with the n = m term dropped) and its error bound."""
        self._check(delta)
        k, r = self.near_k, self.near_r
        if exclude_center or delta == 0.0:
            mask = k != 0
            if delta == 0.0 and not exclude_center and self.r_center:
                raise ZeroDivisionError("pole at the plan center")
            k, r = k[mask], r[mask]
        near = r / (k - delta) ** 2
        parts = near.tolist()
        parts.append(self._far(delta, 2))
        lam = self.m + delta
        _, tb_d = self._tail_bound(delta)
        if with_tail:
            parts.extend(tail_deriv(self.dim, p, lam) for p in self.tails)
        total = math.fsum(parts)
        return total, tb_d + 8 * EPS * total

    def exact_shells(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """(n, r) for the exact shells of the plan intersected with [lo, hi]."""
        ns, rs = [], []
        for a, b in self.exact:
            a, b = max(a, lo), min(b, hi)
            if b < a:
                continue
            r = la.r_range(self.dim, a, b)
            nz = np.flatnonzero(r)
            ns.append(a + nz)
            rs.append(r[nz])
        if not ns:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(ns).astype(np.int64), np.concatenate(rs)


def weak_layout(dim: int, m: int, T: float, halfwidth: int, cap: int
                ) -> tuple[list[tuple[int, int]], list[tuple[int, int | None]]]:
    """Exact core [0, N0] plus window [m - W, m + W]; density tail elsewhere."""
    need = 4 * (abs(m) + T + 1)
    core = 1 << max(14, math.ceil(math.log2(need)))
    core = min(core, cap)
    lo, hi = m - halfwidth, m + halfwidth
    if lo <= core + 1:
        top = max(core, hi)
        return [(0, top)], [(top + 1, None)]
    return ([(0, core), (lo, hi)], [(core + 1, lo - 1), (hi + 1, None)])


def series_c0(dim: int) -> tuple[float, float]:
    """sum_{n >= 0} r(n)/(n^2 + 1) and its model error bound."""
    from .budget import active_budget

    cap = active_budget().table_cap_2d if dim == 2 else active_budget().table_cap_3d
    N = min(cap, 1 << 23 if dim == 2 else 1 << 22)
    table = la.r_table(dim, N).astype(np.float64)
    n = np.arange(N + 1, dtype=np.float64)
    head = _blocked_sum(table / (n * n + 1.0))
    piece = make_tail(dim, N + 1, None)
    a = piece.a
    if dim == 2:
        integral = math.pi * math.atan2(1.0, a)  # pi (pi/2 - atan a)
    else:
        si = cmath.sqrt(1j)
        # int_a^inf 2 pi sqrt x /(x^2+1) = -2 pi Im(sqrt(i) L(a, i))
        integral = -2.0 * math.pi * (si * _L(a, 1j)).imag
    g = lambda x: 1.0 / (x * x + 1.0)  # noqa: E731
    tail = integral - g(a) * piece.e_lo
    k, th = KAPPA[dim], THETA[dim]
    bound = SAFETY * k * _abs_int(lambda x: x**th * 2 * x / (x * x + 1.0) ** 2, a, math.inf, 0.0)
    return head + tail, bound + 8 * EPS * head
