"""Constructive searches for integers m that force a new eigenvalue near m.

Three families: m = 4^k l in dimension 3 (few lattice points on m, many on a
neighbour), m = x^2 + 1 along a CRT progression that loads m + 3 with small
primes = 1 mod 4, and general boost pairs m, m + h.  The admissible-tuple
construction is provided with its admissibility check and a direct search
for almost-prime values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np

from . import lattice_arith as la
from .errors import ConsistencyError, DomainError
from .spectral_core import (NewEigenvalue, SpectralProblem, count_new_eigenvalues,
                            delta_bound_2d, delta_bound_3d, h_m_prime, solve_near)

__all__ = [
    "ScarCandidate", "CrtProgression", "TupleSystem", "TupleHit",
    "power4_sequence", "crt_progression", "scan_n2_plus_1", "boost_pair_scan",
    "boost_pair_count", "build_tuple_system", "almost_prime_scan",
    "count_new_eigenvalues", "solve_candidate",
]

K_MAX_POWER4 = 15
DEFAULT_R_CAP = 32


@dataclass(frozen=True)
class ScarCandidate:
    dim: int
    m: int
    form: tuple  # ("power4_times_l", l, k) | ("n2_plus_1", n) | ("boost_pair", h)
    r_m: int
    boost_neighbor: tuple[int, int] | None  # (h, r_boost)
    predicted_delta_bound: float
    certified: bool  # the B estimate holds on the whole predicted interval
    solved: NewEigenvalue | None = None
    scar_masses: tuple | None = None  # (momentum atom mass, position element)

    @property
    def boost_ratio(self) -> float | None:
        if self.boost_neighbor is None:
            return None
        return self.boost_neighbor[1] / self.r_m

    def violates(self) -> bool:
        return self.solved is not None and abs(self.solved.delta) > self.predicted_delta_bound

    def empirical_constant(self, problem: SpectralProblem) -> float:
        """|delta| sqrt(f'/r(m)), the constant the 3D bound leaves open."""
        if self.solved is None:
            raise DomainError("candidate has not been solved")
        fp, _ = h_m_prime(problem, self.m, delta=self.solved.delta)
        return abs(self.solved.delta) * math.sqrt(fp / self.r_m)


def solve_candidate(problem: SpectralProblem, cand: ScarCandidate) -> ScarCandidate:
    if problem.dim != cand.dim:
        raise DomainError("problem and candidate dimensions differ")
    # offsets are measured from the candidate even when a neighbour shell is closer
    return replace(cand, solved=solve_near(problem, cand.m).centered_at(cand.m))


# ---------------------------------------------------------------------------
# dimension 3


def _omega_key(l: int, k: int):
    """Direction data of 4^k l, by enumeration when the shell is small."""
    m = 4**k * l
    if m <= 1 << 22:
        return la.direction_set(3, m).key()
    # r3 equal and 2^k Omega(l) inside the shell forces equality
    pts = la.shell_points(3, l) * (1 << k)
    if not np.all(np.sum(pts.astype(object) ** 2, axis=1) == m):
        raise ConsistencyError(f"scaled points of {l} miss the shell {m}")
    return la.direction_set(3, l).key()


def power4_sequence(l: int, k_max: int, k_min: int = 0) -> list[ScarCandidate]:
    if not 0 <= k_min <= k_max <= K_MAX_POWER4:
        raise DomainError(f"need 0 <= k_min <= k_max <= {K_MAX_POWER4}")
    rl = la.r3(l)
    if l <= 0 or rl == 0:
        raise DomainError(f"r3({l}) = 0")
    base = la.direction_set(3, l).key()
    out = []
    for k in range(k_min, k_max + 1):
        m = 4**k * l
        rm = la.r3(m)
        if rm != rl:
            raise ConsistencyError(f"r3({m}) = {rm} != r3({l}) = {rl}")
        if _omega_key(l, k) != base:
            raise ConsistencyError(f"direction set of {m} differs from that of {l}")
        db = delta_bound_3d(m)
        out.append(ScarCandidate(3, m, ("power4_times_l", l, k), rm, None,
                                 db.radius, db.certified))
    return out


# ---------------------------------------------------------------------------
# dimension 2: CRT progression for x^2 + 1


@dataclass(frozen=True)
class CrtProgression:
    K: int
    P: int
    r: int
    stride: int
    primes: tuple[int, ...]

    def members(self, lo: int, hi: int) -> np.ndarray:
        """x in [lo, hi) with x = r mod stride."""
        first = lo + ((self.r - lo) % self.stride)
        return np.arange(first, hi, self.stride, dtype=np.int64)


def _sqrt_minus_one(p: int) -> int:
    for c in range(2, p):
        if pow(c, (p - 1) // 2, p) == p - 1:
            return pow(c, (p - 1) // 4, p)
    raise ArithmeticError(f"no non-residue mod {p}")


def _crt(residues: list[int], moduli: list[int]) -> int:
    x, M = 0, 1
    for a, q in zip(residues, moduli):
        t = ((a - x) * pow(M, -1, q)) % q
        x, M = x + M * t, M * q
    return x % M


def crt_progression(K: int) -> CrtProgression:
    if K < 5:
        raise DomainError("K must be at least 5")
    primes = [int(p) for p in la.primes_up_to(K) if p % 4 == 1]
    P = reduce(lambda a, b: a * b, primes, 1)
    # square roots of -4 are +-2i mod p
    roots = [(2 * _sqrt_minus_one(p) % p, (-2 * _sqrt_minus_one(p)) % p) for p in primes]
    best = None
    for mask in range(1 << len(primes)):
        rho = _crt([roots[j][(mask >> j) & 1] for j in range(len(primes))], primes)
        r = rho if rho % 2 == 0 else rho + P
        best = r if best is None else min(best, r)
    prog = CrtProgression(K, P, best, 2 * P, tuple(primes))
    if not all((best * best + 4) % p == 0 for p in primes) or best % 2:
        raise ConsistencyError("CRT residue fails its congruences")
    return prog


def scan_n2_plus_1(progression: CrtProgression, n_range: tuple[int, int],
                   r_cap: int = DEFAULT_R_CAP, min_ratio: float | None = None
                   ) -> list[ScarCandidate]:
    """m = x^2 + 1 for progression members x in [lo, hi), with r2(m) <= r_cap."""
    if r_cap < 4:
        raise DomainError("r_cap must be at least 4")
    out = []
    for x in progression.members(*n_range).tolist():
        if x <= 0:
            continue
        m = x * x + 1
        rm = la.r2(m)
        if rm > r_cap:
            continue
        rb = la.r2(m + 3)
        if min_ratio is not None and rb < min_ratio * rm:
            continue
        db = delta_bound_2d(m, 3)
        out.append(ScarCandidate(2, m, ("n2_plus_1", x), rm, (3, rb),
                                 math.sqrt(10 * rm / rb), db.certified))
    return out


# ---------------------------------------------------------------------------
# dimension 2: boost pairs


SEGMENT = 1 << 20


def _boost_pairs(x_max: int, R_ratio: float, H_span: int, r_cap: int):
    """Yield (m, h, r2(m), r2(m + h)) arrays segment by segment, in order."""
    hmax = H_span * H_span - 1
    for lo in range(1, x_max + 1, SEGMENT):
        hi = min(lo + SEGMENT - 1, x_max)
        r = la.r2_range(lo, hi + hmax)
        base = r[: hi - lo + 1]
        ok = (base > 0) & (base <= r_cap)
        h_found = np.zeros(len(base), dtype=np.int64)
        for h in range(hmax, 0, -1):  # smallest h wins
            hit = ok & (r[h: h + len(base)] >= R_ratio * base)
            h_found[hit] = h
        idx = np.flatnonzero(h_found)
        if len(idx):
            yield (lo + idx, h_found[idx], base[idx], r[idx + h_found[idx]])


def boost_pair_scan(x_max: int, R_ratio: float, H_span: int,
                    r_cap: int = DEFAULT_R_CAP) -> list[ScarCandidate]:
    if H_span < 1 or R_ratio < 2:
        raise DomainError("need H_span >= 1 and R_ratio >= 2")
    out = []
    for ms, hs, rm, rh in _boost_pairs(x_max, R_ratio, H_span, r_cap):
        for m, h, a, b in zip(ms.tolist(), hs.tolist(), rm.tolist(), rh.tolist()):
            db = delta_bound_2d(m, h)
            out.append(ScarCandidate(2, m, ("boost_pair", h), a, (h, b),
                                     db.radius, db.certified))
    return out


def boost_pair_count(x_max: int, R_ratio: float, H_span: int,
                     r_cap: int = DEFAULT_R_CAP) -> int:
    if H_span < 1 or R_ratio < 2:
        raise DomainError("need H_span >= 1 and R_ratio >= 2")
    return sum(len(ms) for ms, *_ in _boost_pairs(x_max, R_ratio, H_span, r_cap))


# ---------------------------------------------------------------------------
# admissible tuples


@dataclass(frozen=True)
class TupleSystem:
    H: int
    exponents: tuple[int, ...]
    Q1: int
    Q2: int
    Q: int
    gamma: int
    q: tuple[int, ...]
    d: tuple[int, ...]
    polys: tuple[tuple[int, int, int], ...]  # G_i(t) = c2 t^2 + c1 t + c0
    verified_up_to: int = field(default=0)

    def G(self, i: int, t: int) -> int:
        c2, c1, c0 = self.polys[i - 1]
        return c2 * t * t + c1 * t + c0

    def a(self, i: int, t: int) -> int:
        return (self.Q * t + self.gamma) ** 2 + i * i


def _exponent_above(p: int, bound: int) -> int:
    e, v = 1, p
    while v <= bound:
        e, v = e + 1, v * p
    return e


def _admissible_at(polys, p: int) -> bool:
    for n in range(p):
        prod = 1
        for c2, c1, c0 in polys:
            prod = prod * ((c2 * n * n + c1 * n + c0) % p) % p
            if prod == 0:
                break
        if prod:
            return True
    return False


def build_tuple_system(H: int, exponents, verify_bound: int = 1000) -> TupleSystem:
    e = tuple(int(x) for x in exponents)
    if H < 2 or len(e) != H or min(e) < 1:
        raise DomainError("need H >= 2 and H exponents, all >= 1")
    small = [int(p) for p in la.primes_up_to(2 * H - 1)]
    E = {p: 1 if p % 4 == 3 else _exponent_above(p, H * H) for p in small}
    Q1 = reduce(lambda a, p: a * p ** E[p], small, 1)
    q, c = [], 2 * H + 1
    while len(q) < H:
        if c % 4 == 1 and la.is_prime(c):
            q.append(c)
        c += 1
    Q2 = reduce(lambda a, j: a * q[j] ** e[j], range(H), 1)
    Q = Q1 * Q2
    # gamma mod Q1 from the fixed congruences, mod each q_i^e_i by search
    res, mods = [], []
    for p in small:
        res.append(1 if p % 4 == 3 else 0)
        mods.append(p ** E[p])
    for j, qi in enumerate(q):
        i = j + 1
        # root of g^2 = -i^2 mod q, Hensel-lifted to q^e
        g = (i * _sqrt_minus_one(qi)) % qi
        for k in range(2, e[j] + 1):
            cur = qi**k
            g = (g - (g * g + i * i) * pow(2 * g, -1, cur)) % cur
        res.append(g)
        mods.append(qi ** e[j])
    gamma0 = _crt(res, mods)
    # exact divisibility is a condition mod q^(e+1): shift the representative by Q
    shifts = []
    for j, qi in enumerate(q):
        i, top = j + 1, qi ** (e[j] + 1)
        shifts.append(next(s for s in range(qi)
                           if ((gamma0 + s * Q) ** 2 + i * i) % top))
    gamma = gamma0 + Q * _crt(shifts, q)
    d = tuple(math.gcd(Q1 * Q1, gamma * gamma + i * i) for i in range(1, H + 1))
    polys = []
    for j in range(H):
        i = j + 1
        den = q[j] ** e[j] * d[j]
        coeffs = (Q * Q, 2 * Q * gamma, gamma * gamma + i * i)
        if any(cf % den for cf in coeffs):
            raise ConsistencyError(f"G_{i} does not have integer coefficients")
        polys.append(tuple(cf // den for cf in coeffs))
    bound = max(2 * H, max(q), verify_bound)
    for p in la.primes_up_to(bound).tolist():
        if not _admissible_at(polys, int(p)):
            raise ConsistencyError(f"prod G_i has fixed prime divisor {p}")
    return TupleSystem(H, e, Q1, Q2, Q, gamma, tuple(q), d, tuple(polys), bound)


@dataclass(frozen=True)
class TupleHit:
    t: int
    omegas: tuple[int, ...]  # Omega(G_i(t))
    a: tuple[int, ...]
    r2: tuple[int, ...]


def almost_prime_scan(system: TupleSystem, t_range: tuple[int, int], r_limit: int
                      ) -> list[TupleHit]:
    """t in [lo, hi) with Omega(prod G_i(t)) <= r_limit."""
    if r_limit < system.H:
        raise DomainError("r_limit must be at least H")
    hits = []
    for t in range(*t_range):
        total, om = 0, []
        for i in range(1, system.H + 1):
            g = system.G(i, t)
            if g <= 0:
                break
            w = la.big_omega(g)
            om.append(w)
            total += w
            if total > r_limit:
                break
        else:
            a = tuple(system.a(i, t) for i in range(1, system.H + 1))
            hits.append(TupleHit(t, tuple(om), a, tuple(la.r2(x) for x in a)))
    return hits
