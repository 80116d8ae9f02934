"""Position-space matrix elements <Op(e_w) g, g> in dimension 2.

The lattice sum over v of c(v) c(v + w), c(v) = 1/(|v|^2 - lambda), is taken
line by line along lines parallel to w.  On each line the summand is a
rational function of the line parameter and the full line sum has a closed
form from the residues of pi cot(pi z); the quadratic's roots are carried as
integer plus fraction so the cotangent factors stay accurate when a lattice
point sits close to the circle |v|^2 = lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import lattice_arith as la
from ..errors import DomainError, PreconditionError
from ..spectral_core import NewEigenvalue, SpectralProblem
from ..wavefunction import norm_sq

DEFAULT_W = (0, 2)
LINE_MIN = 1 << 17  # lines are cheap; push the |x|^-3 tail down


@dataclass(frozen=True)
class PositionObservable:
    dim: int
    w: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.w) != self.dim or not all(isinstance(c, (int, np.integer)) for c in self.w):
            raise DomainError(f"w must be an integer vector of length {self.dim}")
        object.__setattr__(self, "w", tuple(int(c) for c in self.w))


def _frame(w: tuple[int, int]) -> tuple[int, tuple[int, int], tuple[int, int]]:
    """w = g u with u primitive, and p completing u to a basis of Z^2."""
    g = math.gcd(abs(w[0]), abs(w[1]))
    u = (w[0] // g, w[1] // g)
    # extended Euclid: a u1 + b u2 = 1
    old_r, r, old_s, s, old_t, t = u[0], u[1], 1, 0, 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_s, old_t = -old_s, -old_t
    return g, u, (-old_t, old_s)


def _sin_pi_rational(num: np.ndarray, frac: np.ndarray, den: int) -> np.ndarray:
    """sin(pi (num + frac)/den) for integer num, small real frac."""
    q, r0 = np.divmod(num, 2 * den)
    # num = 2 den q + r0, so (num + frac)/den = 2q + (r0 + frac)/den
    return np.sin(np.pi * (r0 + frac) / den)


def line_sums(m: int, delta: float, w: tuple[int, int], X: int
              ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form sums over each line x p + t u, |x| <= X, of c(v) c(v + w)."""
    g, u, p = _frame(w)
    A = u[0] * u[0] + u[1] * u[1]
    beta = 2 * (p[0] * u[0] + p[1] * u[1])
    x = np.arange(-X, X + 1, dtype=np.int64)
    # discriminant of A t^2 + beta x t + |p|^2 x^2 - lambda, in units of 4
    d0 = A * m - x * x  # integer part; full value d0 + A delta
    dfull = d0 + A * delta
    out = np.zeros(len(x))
    real = dfull > 0
    if real.any():
        xr, d0r = x[real], d0[real]
        s_int = la.isqrt_array(d0r)  # sqrt(d0) = s_int + ...
        rem = (d0r - s_int * s_int) + A * delta
        root = np.sqrt(d0r + A * delta)
        eps = rem / (s_int + root)
        # t_pm = (-beta x / 2 +- (s_int + eps)) / A
        n_plus = -beta // 2 * xr + s_int
        n_minus = -beta // 2 * xr - s_int
        sp = _sin_pi_rational(n_plus, eps, A)
        sm = _sin_pi_rational(n_minus, -eps, A)
        D = 2 * (s_int + eps) / A  # t_plus - t_minus
        gd = (g * g * A * A - 4 * (d0r - 0)) - 4 * A * delta  # A^2 (g^2 - D^2)
        small = np.abs(D) < 0.5
        ratio = np.empty(len(xr))  # sin(pi D) / (g^2 - D^2)
        ratio[small] = np.sin(np.pi * D[small]) * A * A / gd[small]
        big = ~small
        E = -gd[big] / (A * A * (D[big] + g))  # D - g
        sinc = np.where(np.abs(E) > 1e-300, np.sin(np.pi * E) / np.where(E == 0, 1, E), np.pi)
        ratio[big] = -((-1) ** g) * sinc / (D[big] + g)
        out[real] = 2 * np.pi * ratio / (sp * sm * A * A * D)
    cplx = ~real
    if cplx.any():
        xc = x[cplx]
        y = np.sqrt(-dfull[cplx]) / A
        # Re t = -beta x/(2A); sin^2(pi Re t) from the exact rational
        num = (-beta // 2 * xc) % A
        s_re = np.sin(np.pi * num / A)
        with np.errstate(over="ignore"):
            sh = np.sinh(np.pi * y)
            ratio = 1.0 / (np.tanh(np.pi * y) * (1.0 + (s_re / sh) ** 2))
        out[cplx] = 2 * np.pi * ratio / (A * A * y * (g * g + 4 * y * y))
    return x, out


def lattice_pair_sum(m: int, delta: float, w: tuple[int, int], R: float | None = None
                     ) -> tuple[float, float]:
    """sum over v in Z^2 of c(v) c(v + w), with a bound on the omitted lines."""
    lam = m + delta
    R = math.sqrt(max(lam, 1.0)) if R is None else R
    _, u, _ = _frame(w)
    A = u[0] * u[0] + u[1] * u[1]
    X = int(math.ceil(math.sqrt(A) * max(4 * R, R + 100, LINE_MIN)))
    x, vals = line_sums(m, delta, w, X)
    total = math.fsum(vals.tolist())
    # lines decay like |x|^-3; omitted part about X L(X) over both sides
    edge = max(abs(vals[0]), abs(vals[-1]))
    return total, 2.0 * X * edge


def position_matrix_element(problem: SpectralProblem, new_eig: NewEigenvalue,
                            observable: PositionObservable) -> tuple[complex, float]:
    """exp(-i w.x0) sum_v c(v) c(v + w) / norm_sq, with error bound."""
    if observable.dim != problem.dim:
        raise DomainError("observable and problem dimensions differ")
    w = observable.w
    if not any(w):
        return 1.0 + 0.0j, 0.0
    if problem.dim != 2:
        raise DomainError("position matrix elements with w != 0 are implemented for dim = 2")
    N, Nb = norm_sq(problem, new_eig)
    total, tb = lattice_pair_sum(new_eig.nearest_m, new_eig.delta, w)
    phase = complex(math.cos(-(w[0] * problem.x0[0] + w[1] * problem.x0[1])),
                    math.sin(-(w[0] * problem.x0[0] + w[1] * problem.x0[1])))
    value = total / N
    bound = tb / N + abs(value) * Nb / N + 1e-14 * abs(value)
    return phase * value, bound


# ---------------------------------------------------------------------------
# negative products for w = (0, 2) around m = n^2 + 1


@dataclass(frozen=True)
class PairSum:
    v: tuple[int, int]
    w: tuple[int, int]
    c_v: float
    c_vw: float
    product: float
    cls: str  # V1, V2, V3, positive or unclassified


def _c(m: int, delta: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return 1.0 / ((x * x + y * y - m) - delta)


def _form_n(m: int) -> int:
    n = math.isqrt(m - 1) if m >= 1 else -1
    if n < 1 or n * n + 1 != m:
        raise DomainError(f"m = {m} is not of the form n^2 + 1")
    return n


def _check_w(w) -> tuple[int, int]:
    w = tuple(int(c) for c in w)
    if w != DEFAULT_W:
        raise DomainError("pair classification is implemented for w = (0, 2)")
    return w


def _negative_points(m: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """All v = (x, y) with c(v) c(v + (0, 2)) < 0."""
    X = math.isqrt(m) + 1
    x = np.arange(-X, X + 1, dtype=np.int64)
    M = m - x * x
    ok = (M + delta) > 0
    x, M = x[ok], M[ok]
    k = la.isqrt_array(np.maximum(M, 0))
    k = k - ((k * k == M) & (delta < 0))  # floor of sqrt(M + delta)
    cand_y = np.stack([k - 1, k, -k - 2, -k - 1], axis=1)
    xs = np.repeat(x, 4)
    ys = cand_y.ravel()
    a1 = (xs * xs + ys * ys - m) - delta
    a2 = (xs * xs + (ys + 2) ** 2 - m) - delta
    neg = (a1 * a2) < 0
    pts = np.unique(np.stack([xs[neg], ys[neg]], axis=1), axis=0)
    return pts[:, 0], pts[:, 1]


def _classify(m: int, n: int, R: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    B = 2 * np.abs(y)
    band = (np.abs(x) == n) & (y >= -3) & (y <= 1)
    on_shell = (x * x + y * y == m) | (x * x + (y + 2) ** 2 == m)
    in_range = (B >= math.sqrt(R) / 2) & (B <= 3 * R)
    cls = np.full(len(x), "unclassified", dtype=object)
    cls[in_range & ~on_shell] = "V2"
    cls[in_range & on_shell] = "V3"
    cls[band] = "V1"
    return cls


def classify_pairs(problem: SpectralProblem, new_eig: NewEigenvalue, w=DEFAULT_W
                   ) -> list[PairSum]:
    """Every v with C(v, w) < 0, tagged V1, V2 or V3."""
    if problem.dim != 2:
        raise DomainError("pair classification is defined for dim = 2")
    w = _check_w(w)
    m, delta = new_eig.nearest_m, new_eig.delta
    n = _form_n(m)
    R = math.sqrt(m + delta)
    x, y = _negative_points(m, delta)
    cv = _c(m, delta, x, y)
    cw = _c(m, delta, x, y + 2)
    cls = _classify(m, n, R, x, y)
    return [PairSum((int(a), int(b)), w, float(p), float(q), float(p * q), str(c))
            for a, b, p, q, c in zip(x, y, cv, cw, cls)]


def _pair_sum(m: int, delta: float, v: tuple[int, int]) -> float:
    x, y = v
    c = lambda yy: 1.0 / ((x * x + yy * yy - m) - delta)  # noqa: E731
    return c(y) * c(y + 2)


def _s_w(m: int, delta: float, v: tuple[int, int]) -> float:
    x, y = v
    here = _pair_sum(m, delta, v)
    left = _pair_sum(m, delta, (x, y - 2)) + here
    right = here + _pair_sum(m, delta, (x, y + 2))
    # smallest value among the minimizers of |.|
    if abs(left) < abs(right):
        return left
    if abs(right) < abs(left):
        return right
    return min(left, right)


def paired_tail(problem: SpectralProblem, new_eig: NewEigenvalue, w, v) -> float:
    """S_w(v): the neighbor-pair sum of least absolute value, for v in V2."""
    w = _check_w(w)
    m, delta = new_eig.nearest_m, new_eig.delta
    n = _form_n(m)
    R = math.sqrt(m + delta)
    vx, vy = int(v[0]), int(v[1])
    if _pair_sum(m, delta, (vx, vy)) >= 0:
        raise DomainError(f"v = {v} has C(v, w) >= 0")
    cls = _classify(m, n, R, np.array([vx]), np.array([vy]))[0]
    if cls != "V2":
        raise DomainError(f"v = {v} is in {cls}, not V2")
    if 2 * abs(vy) < R ** (1 / 3):
        raise DomainError(f"|<v, w>| = {2 * abs(vy)} is below R^(1/3)")
    return _s_w(m, delta, (vx, vy))


@dataclass(frozen=True)
class NegativeSums:
    total: float  # sum over all v of C(v, w)
    v1_term: float  # over all ten points (+-n, y), -3 <= y <= 1
    v3_term: float
    v2_paired: float  # sum of S_w over V2
    v1_constant: float  # max over signs of |delta| |block - 1/delta^2|
    kappa: float  # max |S_w| B^2 / log^2 B over V2 with B >= R^(1/3)
    kappa_prime: float  # max(0, (2/delta^2 - total) |delta|)
    total_bound: float
    counts: dict

    def __iter__(self):
        return iter((self.total, self.v1_term, self.v3_term, self.v2_paired))


def v1_block(delta: float) -> float:
    """sum_{y=-3}^{1} C((n, y), (0, 2)) for m = n^2 + 1, in closed form."""
    return 1 / delta**2 + 2 / ((3 - delta) * (-1 - delta)) - 2 / ((8 - delta) * delta)


def negative_sum_decomposition(problem: SpectralProblem, new_eig: NewEigenvalue,
                               w=DEFAULT_W) -> NegativeSums:
    """Sum of C(v, w) over Z^2 split into the V1 block, V3 and paired V2 terms."""
    if problem.dim != 2:
        raise DomainError("pair classification is defined for dim = 2")
    w = _check_w(w)
    m, delta = new_eig.nearest_m, new_eig.delta
    n = _form_n(m)
    R = math.sqrt(m + delta)
    total, tb = lattice_pair_sum(m, delta, w)
    blocks = []
    for sx in (n, -n):
        ys = np.arange(-3, 2)
        xs = np.full(5, sx)
        blocks.append(math.fsum((_c(m, delta, xs, ys) * _c(m, delta, xs, ys + 2)).tolist()))
    v1 = math.fsum(blocks)
    pairs = classify_pairs(problem, new_eig, w)
    v3 = math.fsum(p.product for p in pairs if p.cls == "V3")
    v2_pts = [p.v for p in pairs if p.cls == "V2"]
    s_vals = [_s_w(m, delta, v) for v in v2_pts]
    v2 = math.fsum(s_vals)
    kappa = 0.0
    for v, s in zip(v2_pts, s_vals):
        B = 2 * abs(v[1])
        if B >= R ** (1 / 3) and B > 1:
            kappa = max(kappa, abs(s) * B * B / math.log(B) ** 2)
    counts = {c: sum(1 for p in pairs if p.cls == c) for c in ("V1", "V2", "V3", "unclassified")}
    v1c = max(abs(delta) * abs(b - 1 / delta**2) for b in blocks)
    kp = max(0.0, (2 / delta**2 - total) * abs(delta))
    return NegativeSums(total, v1, v3, v2, v1c, kappa, kp, tb, counts)


def negative_sum_lower_bound(problem: SpectralProblem, new_eig: NewEigenvalue, w=DEFAULT_W
                             ) -> NegativeSums:
    """The decomposition, in the regime |delta| < 1/10 where the lower bound is claimed."""
    _check_w(w)
    if not abs(new_eig.delta) < 0.1:
        raise PreconditionError(f"|delta| = {abs(new_eig.delta)} is not below 1/10")
    return negative_sum_decomposition(problem, new_eig, w)
