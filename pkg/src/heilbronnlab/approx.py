"""Trigonometric approximation of indicator functions.

* the triangle kernel ``max(0, 1 - ||x||/eps)`` and its Fejer-type Fourier
  coefficients ``eps * sinc(m eps)**2``;
* Vaaler's degree-H polynomial for an interval indicator, built from the
  Beurling-Selberg smoothing of the sawtooth, with the Fejer-weighted
  error majorant;
* products of such polynomials for boxes in [0, 1)^k.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TailTooLarge
from .modarith import Frac128

_TWOPI = 2.0 * math.pi


# ---------------------------------------------------------------- triangle kernel

def triangle_fourier(epsilon: float, m):
    """Fourier coefficient of max(0, 1 - ||x||/eps): eps * (sin(pi m eps)/(pi m eps))**2."""
    if not 0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 1/2]")
    out = epsilon * np.sinc(np.asarray(m, dtype=np.float64) * epsilon) ** 2
    return float(out) if np.ndim(out) == 0 else out


def triangle_value(epsilon: float, x):
    x = np.asarray(x, dtype=np.float64)
    d = np.abs(x - np.round(x))
    out = np.maximum(0.0, 1.0 - d / epsilon)
    return float(out) if out.ndim == 0 else out


def triangle_tail(epsilon: float, M: int) -> float:  # noqa: N803
    """Upper bound for sum_{|m| > M} of the triangle coefficients."""
    return 2.0 / (math.pi ** 2 * epsilon * M)


@dataclass(frozen=True)
class TriangleKernel:
    epsilon: float

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 1/2]")

    def coefficient(self, m):
        return triangle_fourier(self.epsilon, m)

    def __call__(self, x):
        return triangle_value(self.epsilon, x)


def triangle_reconstruct(epsilon: float, G: int, M: int, block: int = 1 << 22) -> tuple[np.ndarray, float]:  # noqa: N803
    """Partial Fourier sum over |m| <= M of the triangle at x = i/G, i < G.

    Coefficients are folded by m mod G, so the cost is O(M + G log G).
    Returns the values and the pointwise truncation bound.
    """
    folded = np.zeros(G)
    for start in range(-M, M + 1, block):
        m = np.arange(start, min(start + block, M + 1))
        folded += np.bincount(m % G, weights=triangle_fourier(epsilon, m), minlength=G)
    values = np.real(np.fft.fft(folded))
    return values, triangle_tail(epsilon, M)


def _cosine_parts(T):
    if isinstance(T, tuple):
        a0, shifts, coeffs = T
    else:
        a0, shifts, coeffs = T.a0, T.shifts, T.coeffs
    shifts = np.asarray(shifts, dtype=np.float64)
    if shifts.ndim == 1:
        shifts = shifts[:, None]
    return float(a0), shifts, np.asarray(coeffs, dtype=np.float64)


def g_lower_bound_check(T, epsilon: float, xi, Mmax: int = 4096, tail_tol: float = 1e-3) -> float:  # noqa: N803
    """g(xi) = a0 + sum_h a_h tri(h . xi), cross-checked against sum_m tri^(m) T(m xi).

    ``T`` is a cosine polynomial (``a0``, ``shifts``, ``coeffs``).  The
    spectral sum is truncated at |m| <= Mmax; TailTooLarge is raised when the
    truncation bound exceeds ``tail_tol``, and ArithmeticError when the two
    evaluations disagree by more than that bound.  The closed form is returned.
    """
    a0, shifts, coeffs = _cosine_parts(T)
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    if xi.size != shifts.shape[1]:
        raise ValueError("xi has the wrong dimension")
    t_max = abs(a0) + float(np.sum(np.abs(coeffs)))
    tail = triangle_tail(epsilon, Mmax) * t_max
    if tail > tail_tol:
        raise TailTooLarge(f"truncation bound {tail!r} exceeds {tail_tol!r}; raise Mmax")
    dots = shifts @ xi
    closed = a0 + float(np.dot(coeffs, triangle_value(epsilon, dots)))
    m = np.arange(-Mmax, Mmax + 1, dtype=np.float64)
    ph = np.outer(m, dots)
    ph -= np.round(ph)
    t_vals = a0 + np.cos(_TWOPI * ph) @ coeffs
    spectral = float(np.dot(triangle_fourier(epsilon, m), t_vals))
    if abs(spectral - closed) > tail + 1e-9:
        raise ArithmeticError(f"spectral {spectral!r} and closed form {closed!r} disagree")
    return closed


# ---------------------------------------------------------------- Vaaler

def _vaaler_weight(t):
    """pi t (1 - t) cot(pi t) + t on (0, 1)."""
    t = np.asarray(t, dtype=np.float64)
    return np.pi * t * (1 - t) / np.tan(np.pi * t) + t


def _unit_frac(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(2j * np.pi * (x - np.floor(x)))


@dataclass(frozen=True)
class VaalerPolynomial:
    """chi*(t) = sum_{|h|<=H} main_coeffs[h + H] e(h t) for an interval [lo, hi)."""

    lo: float
    hi: float
    H: int
    a_coeffs: np.ndarray         # a_H(h), h = -H..H (a_H(0) = 0)
    main_coeffs: np.ndarray      # |I| at h = 0, a_H(h)/(pi |h|) elsewhere
    majorant_coeffs: np.ndarray  # C_h, h = -H..H

    @property
    def interval(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def hs(self) -> np.ndarray:
        return np.arange(-self.H, self.H + 1)

    def indicator(self, t):
        t = np.asarray(t, dtype=np.float64)
        return ((t >= self.lo) & (t < self.hi)).astype(np.float64)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["h", "re", "im", "C_h_re", "C_h_im"])
            for h, c, ch in zip(self.hs, self.main_coeffs, self.majorant_coeffs):
                w.writerow([int(h), repr(float(c.real)), repr(float(c.imag)), repr(float(ch.real)), repr(float(ch.imag))])


def vaaler_build(interval: Sequence[float], H: int) -> VaalerPolynomial:  # noqa: N803
    lo, hi = (float(v) for v in interval)
    H = int(H)  # noqa: N806
    if H < 1:
        raise ValueError("H must be >= 1")
    if not 0 <= lo < hi <= 1:
        raise ValueError("need 0 <= lo < hi <= 1")
    h = np.arange(-H, H + 1)
    nz = h != 0
    ea = _unit_frac(-h * lo)
    eb = _unit_frac(-h * hi)
    a = np.zeros(2 * H + 1, dtype=complex)
    weight = _vaaler_weight(np.abs(h[nz]) / (H + 1))
    a[nz] = -weight * np.abs(h[nz]) / (2j * h[nz]) * (eb[nz] - ea[nz])
    main = np.zeros(2 * H + 1, dtype=complex)
    main[H] = hi - lo
    main[nz] = a[nz] / (np.pi * np.abs(h[nz]))
    majorant = (ea + eb) / 2
    if hi - lo == 1.0:
        main[nz] = 0.0
        a[nz] = 0.0
    return VaalerPolynomial(lo, hi, H, a, main, majorant)


def _as_points(t) -> np.ndarray:
    if isinstance(t, Frac128):
        return np.array([float(t)])
    return np.atleast_1d(np.asarray(t, dtype=np.float64))


def vaaler_eval(vp: VaalerPolynomial, t):
    """(chi*(t), majorant(t)); |chi_I(t) - chi*(t)| <= majorant(t).

    ``t`` may be a Frac128, a float or an array; arrays give arrays back.
    """
    pts = _as_points(t)
    h = vp.hs
    waves = _unit_frac(np.outer(pts, h))
    approx = np.real(waves @ vp.main_coeffs)
    fejer = (1 - np.abs(h) / (vp.H + 1)) / (vp.H + 1)
    majorant = np.real(waves @ (vp.majorant_coeffs * fejer))
    if np.ndim(t) == 0 or isinstance(t, Frac128):
        return float(approx[0]), float(majorant[0])
    return approx, majorant


def product_indicator_error(intervals: Sequence[Sequence[float]], H: int, values):  # noqa: N803
    """Product approximation of a box indicator and its envelope.

    Returns ``(prod chi*_j(t_j), prod (1 + majorant_j(t_j)) - 1)``.
    """
    if not 1 <= len(intervals) <= 4:
        raise ValueError("between 1 and 4 intervals")
    pts = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if pts.shape[1] != len(intervals):
        raise ValueError("points must have one coordinate per interval")
    approx = np.ones(pts.shape[0])
    env = np.zeros(pts.shape[0])
    for j, iv in enumerate(intervals):
        a, m = vaaler_eval(vaaler_build(iv, H), pts[:, j])
        approx *= a
        # (1 + env)(1 + m) - 1 without the cancellation
        env = env + m * (1 + env)
    if np.ndim(values) == 1:
        return float(approx[0]), float(env[0])
    return approx, env


def zero_coordinate_count(h: Sequence[int]) -> int:
    """Number of zero entries of the frequency vector h."""
    return sum(1 for v in h if v == 0)


def product_coefficient(vps: Sequence[VaalerPolynomial], h: Sequence[int]) -> complex:
    """Coefficient of e(h . t) in prod_j chi*_j(t_j).

    Equals prod_{h_j = 0} |I_j| * prod_{h_j != 0} a_j(h_j) / prod_{h_j != 0} (pi |h_j|).
    """
    num = 1.0 + 0j
    norm = 1.0
    for vp, hj in zip(vps, h):
        if hj == 0:
            num *= vp.hi - vp.lo
        else:
            num *= vp.a_coeffs[hj + vp.H]
            norm *= math.pi * abs(hj)
    return num / norm


def product_envelope_series(vps: Sequence[VaalerPolynomial], t: Sequence[float]) -> float:
    """prod_j (1 + majorant_j) - 1 expanded over frequencies h in [-H, H]^k.

    The term for h carries (1/(H+1))**(k - z) * (1 + 1/(H+1))**z with z the
    number of zero coordinates of h.
    """
    H = vps[0].H  # noqa: N806
    if any(vp.H != H for vp in vps):
        raise ValueError("all factors must share H")
    k = len(vps)
    w = 1.0 / (H + 1)
    total = (1 + w) ** k - 1
    for h in itertools.product(range(-H, H + 1), repeat=k):
        if not any(h):
            continue
        z = zero_coordinate_count(h)
        term = w ** (k - z) * (1 + w) ** z + 0j
        for vp, hj, tj in zip(vps, h, t):
            if hj:
                term *= vp.majorant_coeffs[hj + H] * (1 - abs(hj) * w) * np.exp(2j * np.pi * hj * tj)
        total += term.real
    return float(total)
