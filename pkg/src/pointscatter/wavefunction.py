"""Green's-function eigenstates: L2 norm, shell masses and tail accounting.

The eigenstate attached to a new eigenvalue lambda has Fourier coefficients
c(xi) = exp(-i xi.x0) / (|xi|^2 - lambda); only the shell masses
r(n) / (n - lambda)^2 / norm_sq are stored, since they do not depend on x0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lattice_arith as la
from .budget import active_budget
from .errors import DomainError
from .shellsum import ShellPlan
from .spectral_core import NewEigenvalue, SpectralProblem, _split, _weak_plan


def full_plan(problem: SpectralProblem, m: int) -> ShellPlan:
    """Plan over all of Z^d; the eigenfunction never sees the coupling window."""
    return _weak_plan(problem.dim, int(m), float(problem.T), problem.halfwidth,
                      active_budget().name)


def _center(lam_or_eig: float | NewEigenvalue) -> tuple[int, float]:
    if isinstance(lam_or_eig, NewEigenvalue):
        return lam_or_eig.nearest_m, lam_or_eig.delta
    return _split(float(lam_or_eig))


def norm_sq(problem: SpectralProblem, lam: float | NewEigenvalue) -> tuple[float, float]:
    """sum_n r(n)/(n - lambda)^2 with its error bound."""
    m, delta = _center(lam)
    if delta == 0 and la.in_spectrum(problem.dim, m):
        raise DomainError(f"lambda = {m} is an old eigenvalue")
    return full_plan(problem, m).deriv(delta)


@dataclass(frozen=True)
class EigenstateMass:
    dim: int
    nearest_m: int
    delta: float
    norm_sq: float
    norm_bound: float
    shells: np.ndarray  # n, ascending
    counts: np.ndarray  # r(n)
    masses: np.ndarray  # r(n)/(n - lambda)^2 / norm_sq
    tail_mass_bound: float
    x0: tuple[float, ...]
    T: float

    @property
    def lam(self) -> float:
        return self.nearest_m + self.delta

    @property
    def shell_mass(self) -> dict[int, float]:
        return {int(n): float(w) for n, w in zip(self.shells, self.masses)}

    def mass_of(self, n: int) -> float:
        i = np.searchsorted(self.shells, n)
        if i < len(self.shells) and self.shells[i] == n:
            return float(self.masses[i])
        return 0.0

    def total_mass(self) -> float:
        return math.fsum(self.masses.tolist())

    def weights(self) -> np.ndarray:
        """Per-shell 1/(n - lambda)^2 / norm_sq (mass divided by r(n))."""
        return self.masses / self.counts


def listed_ranges(m: int, delta: float, T: float) -> list[tuple[int, int]]:
    """Integer n with n <= T or |n - lambda| <= T, as merged ranges."""
    lo = m + math.ceil(delta - T)
    hi = m + math.floor(delta + T)
    out = [(0, int(math.floor(T)))]
    lo = max(lo, 0)
    if lo <= out[0][1] + 1:
        out = [(0, max(hi, out[0][1]))]
    else:
        out.append((lo, hi))
    return out


def eigenstate(problem: SpectralProblem, new_eig: NewEigenvalue) -> EigenstateMass:
    m, delta = new_eig.nearest_m, new_eig.delta
    N, Nb = norm_sq(problem, new_eig)
    ns, rs = [], []
    for lo, hi in listed_ranges(m, delta, problem.T):
        r = la.r_range(problem.dim, lo, hi)
        nz = np.flatnonzero(r)
        ns.append(lo + nz)
        rs.append(r[nz])
    shells = np.concatenate(ns).astype(np.int64)
    counts = np.concatenate(rs).astype(np.int64)
    k = (shells - m).astype(np.float64)
    terms = counts / (k - delta) ** 2
    listed = math.fsum(terms.tolist())
    masses = terms / N
    tail = max(N - listed, 0.0) + Nb
    return EigenstateMass(problem.dim, m, delta, N, Nb, shells, counts, masses,
                          tail / N, problem.x0, float(problem.T))


def a_l_estimate(problem: SpectralProblem, new_eig: NewEigenvalue, m: int | None = None
                 ) -> float:
    """A_l = delta^2 * sum_{n != m} r3(n)/(n - lambda)^2."""
    if problem.dim != 3:
        raise DomainError("a_l_estimate is defined for dim = 3")
    m = new_eig.nearest_m if m is None else int(m)
    delta = (new_eig.nearest_m - m) + new_eig.delta
    value, _ = full_plan(problem, m).deriv(delta, exclude_center=True)
    return delta * delta * value


def a_l_bound(problem: SpectralProblem, new_eig: NewEigenvalue, m: int | None = None
              ) -> float:
    m = new_eig.nearest_m if m is None else int(m)
    delta = (new_eig.nearest_m - m) + new_eig.delta
    _, bound = full_plan(problem, m).deriv(delta, exclude_center=True)
    return delta * delta * bound
