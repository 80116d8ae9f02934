"""Momentum-space matrix elements, Weyl sums and atom masses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import lattice_arith as la
from ..errors import DomainError
from ..wavefunction import EigenstateMass, listed_ranges
from .harmonics import BUMP_RADIUS, MomentumObservable, bump_nu_mass


def weyl_sum(dim: int, n: int, observable: MomentumObservable) -> float | complex:
    """Exact sum of the observable over the directions of shell n."""
    if n <= 0:
        raise DomainError("shell n=0 has no directions")
    pts = la.shell_points(dim, n)
    if len(pts) == 0:
        raise DomainError(f"shell n={n} is empty in dimension {dim}")
    vals = observable(pts / math.sqrt(n))
    if np.iscomplexobj(vals):
        return complex(math.fsum(vals.real.tolist()), math.fsum(vals.imag.tolist()))
    return math.fsum(vals.tolist())


@lru_cache(maxsize=8)
def _annulus(dim: int, ranges: tuple[tuple[int, int], ...]) -> tuple[np.ndarray, np.ndarray]:
    pts = np.concatenate([la.lattice_points_between(dim, lo, hi) for lo, hi in ranges])
    norms = np.sum(pts * pts, axis=1)
    return pts, norms


def shell_weyl_sums(state: EigenstateMass, observable: MomentumObservable) -> np.ndarray:
    """W_obs(n) for every listed shell of the eigenstate (n = 0 gets obs-free 1)."""
    ranges = tuple(listed_ranges(state.nearest_m, state.delta, state.T))
    pts, norms = _annulus(state.dim, ranges)
    nonzero = norms > 0
    vals = np.zeros(len(pts), dtype=complex if observable.kind == "circle_fourier" else float)
    u = pts[nonzero] / np.sqrt(norms[nonzero])[:, None]
    vals[nonzero] = observable(u)
    # xi = 0 has no direction; it carries the mean nu(obs)
    vals[~nonzero] = observable.nu_mean()
    pos = np.searchsorted(state.shells, norms)
    out = np.zeros(len(state.shells), dtype=vals.dtype)
    order = np.argsort(pos, kind="stable")
    pos, vals = pos[order], vals[order]
    bounds = np.searchsorted(pos, np.arange(len(state.shells) + 1))
    for i in range(len(state.shells)):
        seg = vals[bounds[i]:bounds[i + 1]]
        if np.iscomplexobj(seg):
            out[i] = complex(math.fsum(seg.real.tolist()), math.fsum(seg.imag.tolist()))
        else:
            out[i] = math.fsum(seg.tolist())
    return out


def momentum_matrix_element(problem, state: EigenstateMass, observable: MomentumObservable
                            ) -> tuple[float | complex, float]:
    """<Op(a) g, g> = sum_n W_a(n) / (n - lambda)^2 / norm_sq, with error bound."""
    if observable.dim != state.dim:
        raise DomainError("observable and eigenstate dimensions differ")
    W = shell_weyl_sums(state, observable)
    terms = W * state.weights()
    if np.iscomplexobj(terms):
        val = complex(math.fsum(terms.real.tolist()), math.fsum(terms.imag.tolist()))
    else:
        val = math.fsum(terms.tolist())
    return val, observable.sup * state.tail_mass_bound


@dataclass(frozen=True)
class AtomMass:
    weight: float  # a with M = a delta_Omega(f) + (1 - a) nu(f)
    element: float  # M = <Op(f) g, g>
    delta_f: float  # average of f over the atom directions
    nu_f: float  # nu(f)
    bound: float  # error bound on element
    radius: float


def atom_mass(problem, state: EigenstateMass, directions: np.ndarray,
              radius: float = BUMP_RADIUS) -> AtomMass:
    """Mass the eigenstate puts near a finite direction set, via smooth bumps."""
    directions = np.asarray(directions, dtype=np.float64)
    f = MomentumObservable.bumps(directions, radius)
    M, bound = momentum_matrix_element(problem, state, f)
    delta_f = float(np.mean(f(directions)))
    nu_f = len(directions) * bump_nu_mass(state.dim, radius)
    a = (M - nu_f) / (delta_f - nu_f)
    return AtomMass(float(a), float(M), delta_f, nu_f, bound, radius)


def convex_residual(state: EigenstateMass, element: float, delta_y: float, nu_y: float
                    ) -> float:
    """|M - (a delta_Omega(Y) + (1 - a) nu(Y))| with a the nearest-shell mass."""
    a = state.mass_of(state.nearest_m)
    return abs(element - (a * delta_y + (1 - a) * nu_y))
