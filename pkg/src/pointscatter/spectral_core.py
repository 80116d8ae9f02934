"""Spectral function of the point scatterer and its new eigenvalues.

New eigenvalues are the zeros of

    S(lambda) - RHS,   S(lambda) = sum_n r_d(n) (1/(n - lambda) - n/(n^2 + 1)),

which is strictly increasing between consecutive old eigenvalues.  All
evaluations go through an integer center m and an offset delta, so that
lambda = m + delta is never formed in floating point when it matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

from scipy.optimize import brentq

from . import lattice_arith as la
from .budget import active_budget
from .errors import DomainError, NoSignChangeError, PoleProximityError, PreconditionError
from .shellsum import EPS, ShellPlan, series_c0, weak_layout

ETA_MIN = 131.0 / 146.0
POLE_GUARD = 1e-12
START_FRACTION = 2.0**-20


@dataclass(frozen=True)
class CouplingMode:
    """Weak coupling (constant right-hand side) or strong coupling (window).

    ``weak_constant`` is the right-hand side in both cases; strong coupling
    defaults it to 0.
    """

    kind: str = "weak"
    weak_constant: float = 0.0
    eta: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("weak", "strong"):
            raise DomainError(f"coupling kind must be 'weak' or 'strong', got {self.kind!r}")
        if not math.isfinite(self.weak_constant):
            raise DomainError("right-hand side must be finite")
        if self.kind == "strong":
            if self.eta is None or not (ETA_MIN < self.eta < 1.0):
                raise DomainError(f"strong coupling needs eta in (131/146, 1), got {self.eta}")

    @classmethod
    def weak(cls, constant: float = 0.0) -> "CouplingMode":
        return cls("weak", float(constant))

    @classmethod
    def strong(cls, eta: float, rhs: float = 0.0) -> "CouplingMode":
        return cls("strong", float(rhs), float(eta))

    @property
    def rhs(self) -> float:
        return self.weak_constant


@dataclass(frozen=True)
class SpectralProblem:
    dim: int
    coupling: CouplingMode = field(default_factory=CouplingMode.weak)
    T: float = 64.0
    tail_model: str = "density"
    x0: tuple[float, ...] = ()
    exact_halfwidth: int | None = None

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise DomainError(f"dim must be 2 or 3, got {self.dim}")
        if self.coupling.kind == "strong" and self.dim != 2:
            raise DomainError("strong coupling is defined for dim = 2 only")
        if not self.T >= 8:
            raise DomainError(f"window half-width T must be >= 8, got {self.T}")
        if self.tail_model not in ("density", "none"):
            raise DomainError(f"tail_model must be 'density' or 'none', got {self.tail_model!r}")
        x0 = tuple(float(t) for t in self.x0) or (0.0,) * self.dim
        if len(x0) != self.dim:
            raise DomainError(f"x0 must have {self.dim} coordinates")
        object.__setattr__(self, "x0", tuple(t % (2 * math.pi) for t in x0))
        if self.exact_halfwidth is not None and self.exact_halfwidth < self.T:
            raise DomainError("exact_halfwidth must be at least T")

    @property
    def halfwidth(self) -> int:
        if self.exact_halfwidth is not None:
            return int(self.exact_halfwidth)
        return max(int(math.ceil(self.T)), 1 << 15)

    @property
    def rhs(self) -> float:
        return self.coupling.rhs


@dataclass(frozen=True)
class NewEigenvalue:
    bracket: tuple[int, int]
    nearest_m: int
    delta: float
    residual: float
    tail_bound: float

    @property
    def lam(self) -> float:
        return self.nearest_m + self.delta

    @property
    def m_lo(self) -> int:
        return self.bracket[0]

    @property
    def m_hi(self) -> int:
        return self.bracket[1]

    def centered_at(self, m: int) -> "NewEigenvalue":
        """Same eigenvalue, with the offset measured from another old eigenvalue m."""
        m = int(m)
        if m == self.nearest_m:
            return self
        return replace(self, nearest_m=m, delta=(self.nearest_m - m) + self.delta)


# ---------------------------------------------------------------------------
# planning


def _next_above(dim: int, x: int) -> int:
    return la.next_in_spectrum(dim, x)


def n_plus(dim: int, lam: float) -> int:
    """Smallest old eigenvalue strictly larger than lam."""
    if lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    return la.next_in_spectrum(dim, lam)


def n_plus_offset(dim: int, m: int, delta: float) -> int:
    """n_plus(m + delta) without forming m + delta."""
    return _next_above(dim, m + math.floor(delta))


def strong_window(n_p: int, eta: float) -> tuple[int, int]:
    """Integers n with |n - n_p| < n_p^eta."""
    w = float(n_p) ** eta
    return max(0, math.floor(n_p - w) + 1), math.ceil(n_p + w) - 1


def _subtract(intervals: list[tuple[int, int]], lo: int, hi: int) -> list[tuple[int, int]]:
    out = []
    for a, b in intervals:
        if b < lo or a > hi:
            out.append((a, b))
            continue
        if a < lo:
            out.append((a, lo - 1))
        if b > hi:
            out.append((hi + 1, b))
    return out


def _caps(dim: int) -> int:
    b = active_budget()
    return b.table_cap_2d if dim == 2 else b.table_cap_3d


@lru_cache(maxsize=4096)
def _weak_plan(dim: int, m: int, T: float, W: int, budget: str) -> ShellPlan:
    exact, tails = weak_layout(dim, m, T, W, _caps(dim))
    return ShellPlan.build(dim, m, exact, tails)


@lru_cache(maxsize=1024)
def _strong_plan(dim: int, m: int, n_p: int, eta: float, budget: str) -> ShellPlan:
    lo, hi = strong_window(n_p, eta)
    active_budget().check_window(hi - lo + 1, "strong-coupling window")
    return ShellPlan.build(dim, m, [(lo, hi)], [])


@lru_cache(maxsize=256)
def _complement_plan(dim: int, m: int, n_p: int, eta: float, T: float, W: int,
                     budget: str) -> ShellPlan:
    lo, hi = strong_window(n_p, eta)
    exact, tails = weak_layout(dim, m, T, max(W, hi - m), _caps(dim))
    return ShellPlan.build(dim, m, _subtract(exact, lo, hi), tails)


def plan_for(problem: SpectralProblem, m: int, n_p: int | None = None) -> ShellPlan:
    """Summation plan centered at m (strong coupling also needs n_plus)."""
    budget = active_budget().name
    if problem.coupling.kind == "weak":
        return _weak_plan(problem.dim, int(m), float(problem.T), problem.halfwidth, budget)
    if n_p is None:
        raise DomainError("strong-coupling plans need n_plus")
    return _strong_plan(problem.dim, int(m), int(n_p), float(problem.coupling.eta), budget)


def _evaluate(problem: SpectralProblem, m: int, delta: float, *, deriv: bool,
              exclude_center: bool = False) -> tuple[float, float]:
    n_p = n_plus_offset(problem.dim, m, delta) if problem.coupling.kind == "strong" else None
    plan = plan_for(problem, m, n_p)
    fn = plan.deriv if deriv else plan.value
    value, bound = fn(delta, exclude_center=exclude_center)
    if problem.tail_model == "none" and plan.tails:
        bare, _ = fn(delta, exclude_center=exclude_center, with_tail=False)
        bound += abs(value - bare)
        value = bare
    return value, bound


def _split(lam: float) -> tuple[int, float]:
    m = math.floor(lam + 0.5)
    return m, lam - m


def _pole_check(dim: int, m: int, delta: float) -> None:
    base = m + math.floor(delta)
    hi = _next_above(dim, base)
    lo = base if la.in_spectrum(dim, base) else la.prev_in_spectrum(dim, base)
    gap = hi - (lo if lo is not None else 0)
    d_lo = math.inf if lo is None else (m - lo) + delta
    d_hi = (hi - m) - delta
    if min(d_lo, d_hi) < POLE_GUARD * gap:
        raise PoleProximityError(
            f"lambda = {m} + {delta} lies within {POLE_GUARD:g} gap widths of an old "
            "eigenvalue; evaluate with offset_form(problem, m, delta) instead"
        )


# ---------------------------------------------------------------------------
# public evaluation


def spectral_value(problem: SpectralProblem, lam: float) -> tuple[float, float]:
    """S(lambda) - RHS with its error bound."""
    m, delta = _split(lam)
    _pole_check(problem.dim, m, delta)
    value, bound = _evaluate(problem, m, delta, deriv=False)
    return value - problem.rhs, bound


def spectral_derivative(problem: SpectralProblem, lam: float) -> tuple[float, float]:
    """dS/dlambda = sum r(n)/(n - lambda)^2 over the same window."""
    m, delta = _split(lam)
    _pole_check(problem.dim, m, delta)
    return _evaluate(problem, m, delta, deriv=True)


def offset_form(problem: SpectralProblem, m: int, delta: float) -> tuple[float, float]:
    """Spectral value at m + delta with the m-shell term kept separate.

    Equals f_m(delta) - r(m)/delta, where f_m collects every other term.
    """
    if delta == 0:
        raise DomainError("offset_form needs delta != 0")
    if not la.in_spectrum(problem.dim, m):
        raise DomainError(f"m = {m} is not an old eigenvalue in dimension {problem.dim}")
    value, bound = _evaluate(problem, m, delta, deriv=False)
    return value - problem.rhs, bound


def h_m(problem: SpectralProblem, m: int, lam: float | None = None, *,
        delta: float | None = None) -> tuple[float, float]:
    """H_m: the spectral sum without the n = m term, minus the coupling F."""
    delta = _offset(m, lam, delta)
    value, bound = _evaluate(problem, m, delta, deriv=False, exclude_center=True)
    return value - problem.rhs, bound


def h_m_prime(problem: SpectralProblem, m: int, lam: float | None = None, *,
              delta: float | None = None) -> tuple[float, float]:
    delta = _offset(m, lam, delta)
    return _evaluate(problem, m, delta, deriv=True, exclude_center=True)


def _offset(m: int, lam: float | None, delta: float | None) -> float:
    if (lam is None) == (delta is None):
        raise DomainError("pass exactly one of lam or delta")
    return float(delta) if delta is not None else float(lam) - m


def coupling_function(problem: SpectralProblem, lam: float) -> tuple[float, float]:
    """F(lambda): the weak constant, or the sum over shells outside the window."""
    if problem.coupling.kind == "weak":
        return problem.rhs, 0.0
    m, delta = _split(lam)
    n_p = n_plus_offset(problem.dim, m, delta)
    plan = _complement_plan(problem.dim, m, n_p, float(problem.coupling.eta),
                            float(problem.T), problem.halfwidth, active_budget().name)
    return plan.value(delta)


# ---------------------------------------------------------------------------
# root finding


def _require_gap(dim: int, m_lo: int, m_hi: int) -> None:
    if not (la.in_spectrum(dim, m_lo) and la.in_spectrum(dim, m_hi)):
        raise PreconditionError(f"({m_lo}, {m_hi}) are not both old eigenvalues")
    if m_hi <= m_lo or _next_above(dim, m_lo) != m_hi:
        raise PreconditionError(f"({m_lo}, {m_hi}) are not consecutive old eigenvalues")


def solve_gap(problem: SpectralProblem, m_lo: int, m_hi: int) -> NewEigenvalue:
    """The new eigenvalue strictly between consecutive old eigenvalues."""
    dim = problem.dim
    _require_gap(dim, m_lo, m_hi)
    gap = m_hi - m_lo
    half = gap / 2.0
    n_p = m_hi if problem.coupling.kind == "strong" else None
    rhs = problem.rhs

    def side(m: int):
        plan = plan_for(problem, m, n_p)
        return plan, (lambda d: plan.value(d)[0] - rhs)

    plan_lo, f_lo = side(m_lo)
    v_mid = f_lo(half)
    if v_mid == 0.0:
        return _finish(problem, plan_lo, (m_lo, m_hi), m_lo, half)
    if v_mid > 0:
        # root in (m_lo, midpoint]
        if plan_lo.r_center == 0:
            if f_lo(0.0) >= 0:
                raise NoSignChangeError(
                    f"no root in gap ({m_lo}, {m_hi}): spectral function is "
                    "nonnegative at the lower end")
            a = 0.0
        else:
            a = START_FRACTION * gap
            while f_lo(a) >= 0:
                a /= 2
                if a < 1e-300:
                    raise NoSignChangeError(f"no sign change near {m_lo}")
        d = brentq(f_lo, a, half, xtol=1e-300, rtol=4 * EPS, maxiter=500)
        return _finish(problem, plan_lo, (m_lo, m_hi), m_lo, d)
    plan_hi, f_hi = side(m_hi)
    if f_hi(-half) >= 0:
        return _finish(problem, plan_lo, (m_lo, m_hi), m_lo, half)
    b = -START_FRACTION * gap
    while f_hi(b) <= 0:
        b /= 2
        if b > -1e-300:
            raise NoSignChangeError(f"no sign change near {m_hi}")
    d = brentq(f_hi, -half, b, xtol=1e-300, rtol=4 * EPS, maxiter=500)
    return _finish(problem, plan_hi, (m_lo, m_hi), m_hi, d)


def _finish(problem: SpectralProblem, plan: ShellPlan, bracket: tuple[int, int],
            m: int, delta: float) -> NewEigenvalue:
    value, bound = plan.value(delta)
    return NewEigenvalue(bracket, m, float(delta), value - problem.rhs, bound)


def gaps_between(dim: int, lo: int, hi: int) -> list[tuple[int, int]]:
    """Consecutive pairs of old eigenvalues inside [lo, hi]."""
    els = [int(n) for n in la.spectrum_elements(dim, hi) if n >= lo]
    return list(zip(els[:-1], els[1:]))


def solve_near(problem: SpectralProblem, m: int) -> NewEigenvalue:
    """Of the (up to two) new eigenvalues adjacent to m, the one closest to m."""
    out = []
    prev = la.prev_in_spectrum(problem.dim, m)
    if prev is not None:
        try:
            out.append(solve_gap(problem, prev, m))
        except NoSignChangeError:
            pass
    try:
        out.append(solve_gap(problem, m, _next_above(problem.dim, m)))
    except NoSignChangeError:
        pass
    if not out:
        raise NoSignChangeError(f"no new eigenvalue adjacent to {m}")
    out.sort(key=lambda e: (abs(e.lam - m) if e.nearest_m != m else abs(e.delta), e.bracket))
    return out[0]


# ---------------------------------------------------------------------------
# localization bounds


def nearby_zero_bound(A: float, B: float) -> float:
    """Radius sqrt(A/B) within which f(delta) = A/delta has a solution."""
    if not (A > 0 and B > 0):
        raise DomainError(f"nearby_zero_bound needs A, B > 0, got ({A}, {B})")
    return math.sqrt(A / B)


@dataclass(frozen=True)
class DeltaBound:
    A: float
    B: float
    radius: float
    interval: float  # half-width of the interval on which B bounds f'
    certified: bool  # radius <= interval, so the localization is guaranteed
    witness: int  # shell whose single term gives B


def nearest_good_residue(m: int) -> int:
    """Closest n != m with n not 0, 4, 7 mod 8; ties go to the larger r3."""
    for d in range(1, 64):
        cands = [n for n in (m - d, m + d) if n >= 0 and n % 8 not in (0, 4, 7)]
        if cands:
            return max(cands, key=lambda n: (la.r3(n), n))
    raise ArithmeticError("unreachable")


def delta_bound_3d(m: int) -> DeltaBound:
    """A = r3(m); B = r3(m')/(|m' - m| + 1/2)^2 bounds f_m' on |delta| <= 1/2."""
    A = la.r3(m)
    if A == 0:
        raise DomainError(f"r3({m}) = 0")
    mp = nearest_good_residue(m)
    B = la.r3(mp) / (abs(mp - m) + 0.5) ** 2
    rad = nearby_zero_bound(A, B)
    return DeltaBound(A, B, rad, 0.5, rad <= 0.5, mp)


def delta_bound_2d(m: int, h: int = 3) -> DeltaBound:
    """A = r2(m); B = r2(m+h)/(h + 1/10)^2 bounds f_m' on |delta| <= 1/10.

    For h = 3 the constant is rounded up to 10.
    """
    A = la.r2(m)
    rb = la.r2(m + h)
    if A == 0 or rb == 0:
        raise DomainError(f"r2({m}) and r2({m + h}) must be positive")
    c = 10.0 if h == 3 else (h + 0.1) ** 2
    rad = nearby_zero_bound(A, rb / c)
    return DeltaBound(A, rb / c, rad, 0.1, rad <= 0.1, m + h)


def c0(dim: int) -> tuple[float, float]:
    """sum_{n >= 0} r_d(n)/(n^2 + 1), including n = 0, with its error bound."""
    return _c0(dim, active_budget().name)


@lru_cache(maxsize=4)
def _c0(dim: int, budget: str) -> tuple[float, float]:
    return series_c0(dim)


def weak_constant_from_phi(dim: int, phi: float) -> float:
    """C(phi) = tan(phi/2) * c0."""
    if not (-math.pi < phi < math.pi):
        raise DomainError(f"phi must lie in (-pi, pi), got {phi}")
    if phi == 0:
        return 0.0
    return math.tan(phi / 2.0) * c0(dim)[0]


def count_new_eigenvalues(dim: int, x: float) -> int:
    """Number of gaps between consecutive old eigenvalues below x."""
    if x > 1e4:
        raise DomainError("exact gap counting is limited to x <= 1e4")
    if x <= 0:
        return 0
    els = la.spectrum_elements(dim, int(math.floor(x)))
    els = els[els < x]
    return max(len(els) - 1, 0)
