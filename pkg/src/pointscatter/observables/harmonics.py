"""Real harmonic bases on S^1 and S^2 and smooth bump atoms.

Harmonics are orthonormal for the uniform probability measure nu.  Both the
azimuthal factor and the Legendre factor are built by recurrences that map
u -> -u to an exact sign flip, so Weyl sums of odd harmonics over symmetric
direction sets cancel exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad

from ..errors import DomainError

L_MAX = 8
BUMP_RADIUS = 0.05


def _azimuthal(x: np.ndarray, y: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    # Re and Im of (x + i y)^k
    c, s = np.ones_like(x), np.zeros_like(x)
    for _ in range(k):
        c, s = x * c - y * s, x * s + y * c
    return c, s


def _legendre_q(l: int, m: int, z: np.ndarray) -> np.ndarray:
    # Q with P_l^m(z) = (1 - z^2)^(m/2) Q_l^m(z), no Condon-Shortley phase
    q_mm = np.full_like(z, float(math.prod(range(1, 2 * m, 2))) if m else 1.0)
    if l == m:
        return q_mm
    q_prev, q = q_mm, z * (2 * m + 1) * q_mm
    for ll in range(m + 2, l + 1):
        q_prev, q = q, (z * (2 * ll - 1) * q - (ll + m - 1) * q_prev) / (ll - m)
    return q


def _norm(l: int, m: int) -> float:
    return math.sqrt((2 * l + 1) * math.factorial(l - m) / math.factorial(l + m))


def spherical_harmonic_eval(l: int, m_order: int, u: np.ndarray, l_max: int = L_MAX
                            ) -> np.ndarray:
    """Real orthonormal harmonic of degree l, order m_order at unit vectors u.

    For 3-vectors this is the spherical harmonic; for 2-vectors the circle
    basis 1 (l = 0), sqrt2 cos(l theta) (m_order = l), sqrt2 sin(l theta)
    (m_order = -l).
    """
    if not (0 <= abs(m_order) <= l):
        raise DomainError(f"need 0 <= |m| <= l, got l={l}, m={m_order}")
    if l > l_max:
        raise DomainError(f"degree {l} exceeds L_max = {l_max}")
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[1] == 2:
        if l and abs(m_order) != l:
            raise DomainError("on the circle the order must be +-l")
        c, s = _azimuthal(u[:, 0], u[:, 1], l)
        out = np.ones(len(u)) if l == 0 else math.sqrt(2.0) * (c if m_order > 0 else s)
    elif u.shape[1] == 3:
        am = abs(m_order)
        q = _legendre_q(l, am, u[:, 2]) * _norm(l, am)
        if am == 0:
            out = q
        else:
            c, s = _azimuthal(u[:, 0], u[:, 1], am)
            out = math.sqrt(2.0) * q * (c if m_order > 0 else s)
    else:
        raise DomainError("unit vectors must have 2 or 3 components")
    return out[0] if single else out


def harmonic_indices(dim: int, l_max: int) -> list[tuple[int, int]]:
    if dim == 3:
        return [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]
    return [(0, 0)] + [(l, s * l) for l in range(1, l_max + 1) for s in (1, -1)]


def chord_angle(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Pairwise great-circle angles between rows of u and rows of w."""
    d = np.linalg.norm(u[:, None, :] - w[None, :, :], axis=2)
    return 2.0 * np.arcsin(np.minimum(d / 2.0, 1.0))


def bump_profile(t: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - t^2)) on |t| < 1, zero outside; equals 1 at t = 0."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=32)
def bump_nu_mass(dim: int, radius: float) -> float:
    """nu of a single bump of the given angular radius."""
    prof = lambda th: bump_profile(np.array([th / radius]))[0]  # noqa: E731
    if dim == 3:
        return 0.5 * quad(lambda th: prof(th) * math.sin(th), 0.0, radius,
                          epsabs=0, epsrel=1e-12)[0]
    return quad(prof, 0.0, radius, epsabs=0, epsrel=1e-12)[0] / math.pi


@dataclass(frozen=True)
class MomentumObservable:
    """A function on the unit sphere or circle, evaluated at directions."""

    dim: int
    kind: str
    params: tuple = ()
    sup: float = 1.0
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False,
                                                          repr=False)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        if self.kind == "constant":
            return np.ones(len(u))
        if self.kind == "spherical_harmonic":
            l, m = self.params
            return spherical_harmonic_eval(l, m, u)
        if self.kind == "circle_fourier":
            (k,) = self.params
            c, s = _azimuthal(u[:, 0], u[:, 1], abs(k))
            return c + 1j * (s if k >= 0 else -s)
        return np.asarray(self.func(u))

    def nu_mean(self) -> float:
        """Mean of the observable under the uniform probability measure."""
        if self.kind == "constant":
            return 1.0
        if self.kind == "spherical_harmonic":
            return 1.0 if self.params[0] == 0 else 0.0
        if self.kind == "circle_fourier":
            return 1.0 if self.params[0] == 0 else 0.0
        if self.params and self.params[0] == "bumps":
            _, radius, count = self.params
            return count * bump_nu_mass(self.dim, radius)
        return float(np.mean(self(sphere_samples(self.dim, 1 << 14, 0))))

    # constructors

    @classmethod
    def constant(cls, dim: int) -> "MomentumObservable":
        return cls(dim, "constant")

    @classmethod
    def harmonic(cls, dim: int, l: int, m: int) -> "MomentumObservable":
        spherical_harmonic_eval(l, m, np.eye(dim)[0])  # validates
        sup = 1.0 if l == 0 else (math.sqrt(2 * l + 1) if dim == 3 else math.sqrt(2.0))
        return cls(dim, "spherical_harmonic", (l, m), sup)

    @classmethod
    def fourier(cls, k: int) -> "MomentumObservable":
        return cls(2, "circle_fourier", (int(k),), 1.0)

    @classmethod
    def pointwise(cls, dim: int, func: Callable[[np.ndarray], np.ndarray], sup: float,
                  name: str = "pointwise") -> "MomentumObservable":
        return cls(dim, "pointwise", (name,), float(sup), func)

    @classmethod
    def bumps(cls, centers: np.ndarray, radius: float = BUMP_RADIUS) -> "MomentumObservable":
        """Sum of bumps of the given angular radius around each center."""
        centers = np.asarray(centers, dtype=np.float64)
        dim = centers.shape[1]
        sep = chord_angle(centers, centers)
        np.fill_diagonal(sep, np.inf)
        overlap = bool(len(centers) > 1 and sep.min() < 2 * radius)
        sup = float(len(centers)) if overlap else 1.0

        def f(u: np.ndarray) -> np.ndarray:
            return bump_profile(chord_angle(u, centers) / radius).sum(axis=1)

        return cls(dim, "pointwise", ("bumps", radius, len(centers)), sup, f)


def sphere_samples(dim: int, n: int, seed: int) -> np.ndarray:
    """Scrambled Sobol points pushed to the uniform measure on S^{dim-1}."""
    from scipy.stats import qmc

    pts = qmc.Sobol(d=dim - 1, scramble=True, seed=seed).random(n)
    if dim == 2:
        th = 2 * np.pi * pts[:, 0]
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    z = 2 * pts[:, 0] - 1
    ph = 2 * np.pi * pts[:, 1]
    rho = np.sqrt(np.maximum(1 - z * z, 0))
    return np.stack([rho * np.cos(ph), rho * np.sin(ph), z], axis=1)


def gram_matrix(dim: int, l_max: int, n: int = 1 << 16, seed: int = 0
                ) -> tuple[list[tuple[int, int]], np.ndarray, np.ndarray]:
    """Sampled <Y_a, Y_b>_nu and per-entry standard errors."""
    idx = harmonic_indices(dim, l_max)
    u = sphere_samples(dim, n, seed)
    vals = np.stack([spherical_harmonic_eval(l, m, u, l_max=max(l_max, L_MAX))
                     for l, m in idx])
    mean = vals @ vals.T / n
    second = (vals * vals) @ (vals * vals).T / n
    var = np.maximum(second - mean * mean, 0.0) * n / (n - 1)
    return idx, mean, np.sqrt(var / n)
