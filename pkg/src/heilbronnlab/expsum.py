"""Exponential sums, differencing and the bound formulas they are compared against."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ._backend import kernels
from .core import PseudoPolynomial, evaluate, floor_many, to_fraction
from .errors import AmbiguousFloor, ConstraintViolated, HypothesisViolated, IndexOutOfRange, InvalidCase
from .modarith import ONE, Frac128, RationalApprox, divisor_table, mangoldt_table, mobius_table
from .parallel import CHUNK, chunk_bounds, map_ordered

_U = 2.0 ** -53
_TWOPI = 2.0 * math.pi


class ExponentCase(str, enum.Enum):
    LargeInt = "LargeInt"
    MediumInt = "MediumInt"
    LargePrime = "LargePrime"
    MediumPrime = "MediumPrime"
    CorollaryInt = "CorollaryInt"
    CorollaryPrime = "CorollaryPrime"
    TheoremInt = "TheoremInt"
    TheoremPrime = "TheoremPrime"

    def __str__(self):
        return self.value


def _unit(num: int, bits: int = 128) -> complex:
    """e(num / 2**bits) with exact quarter-turn reduction."""
    num %= 1 << bits
    quarter = num >> (bits - 2)
    t = (num & ((1 << (bits - 2)) - 1)) / (1 << bits)
    c, s = math.cos(_TWOPI * t), math.sin(_TWOPI * t)
    return (complex(c, s), complex(-s, c), complex(-c, -s), complex(s, -c))[quarter]


def e(x) -> complex:
    """exp(2 pi i x)."""
    return _unit(Frac128.from_real(x).num)


@dataclass(frozen=True)
class ExpSumReport:
    value: complex
    modulus: float
    terms: int
    kahan_error_bound: float
    predicted_bound: float | None = None
    exponent_case: ExponentCase | None = None
    N: int | None = None
    beta_hex: str = ""

    CSV_HEADER = ("case", "N", "beta_hex", "value_re", "value_im", "modulus", "predicted_bound", "ratio")

    @property
    def ratio(self) -> float | None:
        if self.predicted_bound is None or self.predicted_bound == 0:
            return None
        return self.modulus / self.predicted_bound

    def with_prediction(self, bound: float, case: ExponentCase) -> "ExpSumReport":
        return ExpSumReport(self.value, self.modulus, self.terms, self.kahan_error_bound,
                            float(bound), ExponentCase(case), self.N, self.beta_hex)

    def csv_row(self) -> list[str]:
        fmt = lambda v: "" if v is None else repr(float(v))  # noqa: E731
        return [str(self.exponent_case or "None"), "" if self.N is None else str(self.N), self.beta_hex,
                repr(self.value.real), repr(self.value.imag), repr(self.modulus),
                fmt(self.predicted_bound), fmt(self.ratio)]


def _split_beta(beta) -> tuple[int, Frac128]:
    """beta = big + frac with big an integer and frac a 128-bit fraction."""
    if isinstance(beta, Frac128):
        return 0, beta
    q = to_fraction(beta)
    big = math.floor(q)
    frac = Frac128.from_real(q - big)
    return big, frac


def _summation_bound(absw: float, terms: int, phase_err: float) -> float:
    depth = max(1, math.ceil(math.log2(max(terms, 2)))) + 8
    gamma = depth * _U / (1 - depth * _U)
    return absw * (_TWOPI * phase_err + 4 * _U + gamma)


def _floor_mode(mode: str) -> bool:
    if mode not in ("floor", "continuous"):
        raise ValueError("mode must be 'floor' or 'continuous'")
    return mode == "floor"


def direct_sum(f: PseudoPolynomial, beta, N1: int, N2: int, weights=None, mode: str = "floor",
               threads: int | None = 1) -> ExpSumReport:  # noqa: N803
    """Sum of w(n) e(beta * F(n)) for N1 < n <= N2.

    ``mode="floor"`` uses F(n) = floor(f(n)) and exact 128-bit products;
    ``mode="continuous"`` uses F(n) = f(n).  ``weights`` is an array aligned
    with n = N1+1, ..., N2 or a callable mapping an int64 array of n to weights.
    Chunks of 2**16 terms are summed pairwise and combined pairwise, so the
    result does not depend on ``threads``.
    """
    floor_mode = _floor_mode(mode)
    N1, N2 = int(N1), int(N2)
    if N2 < N1:
        raise ValueError("need N1 <= N2")
    big, frac = _split_beta(beta)
    count = N2 - N1
    if weights is not None and not callable(weights):
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if weights.shape != (count,):
            raise ValueError(f"expected {count} weights, got {weights.shape}")

    def run(a: int, b: int):
        ns = np.arange(N1 + 1 + a, N1 + 1 + b, dtype=np.int64)
        fb = floor_many(f, ns)
        if floor_mode and fb.unresolved:
            bad = int(ns[~fb.ok][0])
            raise AmbiguousFloor(bad)
        if weights is None:
            w = None
        elif callable(weights):
            w = np.ascontiguousarray(weights(ns), dtype=np.float64)
        else:
            w = weights[a:b]
        re, im, absw = kernels.segment_expsum(fb.floors, fb.rems, w, frac.hi, frac.lo,
                                              0.0 if floor_mode else float(big),
                                              not floor_mode, 0, b - a)
        rad = 0.0
        if not floor_mode:
            rad = evaluate(f, int(ns[-1])).rad
        return re, im, absw, rad

    parts = map_ordered(run, chunk_bounds(0, count, CHUNK), threads)
    if parts:
        re, im = kernels.pairwise_sum([p[0] for p in parts], [p[1] for p in parts])
        absw = math.fsum(p[2] for p in parts)
        rad = max(p[3] for p in parts)
    else:
        re = im = absw = rad = 0.0
    value = complex(re, im)
    phase_err = 2 * _U
    if not floor_mode:
        phase_err += (abs(big) + 1) * (2 * _U + rad)
    return ExpSumReport(value, abs(value), count, _summation_bound(absw, count, phase_err),
                        N=N2, beta_hex=frac.hex if not big else f"{big}+{frac.hex}")


def phase_array(floors: np.ndarray, rems: np.ndarray, beta, mode: str = "floor") -> np.ndarray:
    """Fractional parts of beta * F(n) as float64, vectorised.

    Uses hi * F mod 2**64 (exact in uint64) plus lo * F / 2**128, which is
    accurate to a few units in the last place.
    """
    big, frac = _split_beta(beta)
    fl = np.asarray(floors, dtype=np.int64).view(np.uint64)
    with np.errstate(over="ignore"):
        top = (np.uint64(frac.hi) * fl).astype(np.float64) * 2.0 ** -64
    low = (frac.lo * 2.0 ** -64) * (np.asarray(floors, dtype=np.float64) * 2.0 ** -64)
    ph = top + low
    if not _floor_mode(mode):
        ph = ph + (big + float(frac)) * np.asarray(rems)
    return ph - np.floor(ph)


def geometric_sum(alpha, N1: int, N2: int) -> tuple[complex, float]:  # noqa: N803
    """Sum of e(n alpha) for N1 < n <= N2, and the bound min(N2 - N1, 1/||alpha||)."""
    N1, N2 = int(N1), int(N2)
    if not N1 < N2:
        raise ValueError("need N1 < N2")
    a = Frac128.from_real(alpha)
    count = N2 - N1
    dist = min(a.num, ONE - a.num)
    if dist == 0:
        return complex(count, 0.0), float(count)
    bound = min(float(count), ONE / dist)
    # e(alpha (2 N1 + count + 1) / 2) * sin(pi count alpha) / sin(pi alpha)
    centre = _unit(a.num * (2 * N1 + count + 1), 129)
    top = a.num * count
    sign = -1.0 if (top >> 128) & 1 else 1.0
    # sin(pi x) = sin(pi (1 - x)); reflecting first keeps the relative error small near 1
    rem = top % ONE
    ratio = sign * math.sin(math.pi * (min(rem, ONE - rem) / ONE)) / math.sin(math.pi * (dist / ONE))
    return centre * ratio, bound


# ---------------------------------------------------------------- differencing

@dataclass(frozen=True)
class DifferenceSpec:
    steps: tuple

    def __post_init__(self):
        steps = tuple(int(d) for d in self.steps)
        if not steps:
            raise ValueError("at least one difference step is required")
        if any(d == 0 for d in steps):
            raise ValueError("difference steps must be nonzero")
        object.__setattr__(self, "steps", steps)

    @property
    def ell(self) -> int:
        return len(self.steps)


def _as_callable(f):
    if isinstance(f, PseudoPolynomial):
        return lambda x: f(x)
    return f


def forward_difference(f, spec, x):
    """Iterated forward difference Delta_{d_l,...,d_1}(f)(x) by inclusion-exclusion."""
    if not isinstance(spec, DifferenceSpec):
        spec = DifferenceSpec(tuple(spec))
    fn = _as_callable(f)
    ell = spec.ell
    values = []
    for mask in range(1 << ell):
        shift = sum(d for i, d in enumerate(spec.steps) if mask >> i & 1)
        sign = -1 if (ell - bin(mask).count("1")) % 2 else 1
        values.append((sign, fn(x + shift)))
    if all(isinstance(v, (int, Fraction)) for _, v in values):
        return sum((s * v for s, v in values), Fraction(0))
    return math.fsum(s * float(v) for s, v in values)


def _frac_phases(f, ns: Sequence[int]) -> np.ndarray:
    """f(n) mod 1 as float64 for each n."""
    out = np.empty(len(ns))
    if isinstance(f, PseudoPolynomial):
        for i, n in enumerate(ns):
            v = evaluate(f, int(n))
            fl = math.floor(v.hi)
            r = (v.hi - fl) + v.lo
            out[i] = r - math.floor(r)
        return out
    for i, n in enumerate(ns):
        v = f(int(n))
        if isinstance(v, (int, Fraction)):
            out[i] = float(Fraction(v) - math.floor(v))
        else:
            out[i] = float(v) - math.floor(float(v))
    return out


def _weyl_fast(z: np.ndarray, depth: int) -> float:
    """Sum over depth shifts of |sum e(iterated difference)|**2 via autocorrelations."""
    m = z.size
    if m == 0:
        return 0.0
    if depth == 0:
        return abs(z.sum()) ** 2
    total = 0.0
    if depth == 1:
        r = np.correlate(z, z, "full")
        return float(np.sum(r.real ** 2 + r.imag ** 2))
    for d in range(-(m - 1), m):
        if d >= 0:
            zd = z[d:] * np.conj(z[: m - d])
        else:
            zd = z[: m + d] * np.conj(z[-d:])
        total += _weyl_fast(zd, depth - 1)
    return total


def _weyl_direct(ph: np.ndarray, N: int, ell: int) -> float:  # noqa: N803
    m = ph.size
    total = 0.0
    subsets = [(mask, (-1) ** (ell - bin(mask).count("1"))) for mask in range(1 << ell)]
    # up to two differences are broadcast along array axes, the rest are looped over
    inner = min(ell, 2)
    outer = ell - inner
    steps = np.arange(-(N - 1), N)
    n = np.arange(m).reshape((m,) + (1,) * inner)
    axes = [steps.reshape((1,) * (1 + j) + (-1,) + (1,) * (inner - 1 - j)) for j in range(inner)]
    shape = (m,) + (steps.size,) * inner
    for ds in itertools.product(range(-(N - 1), N), repeat=outer):
        phase = np.zeros(shape)
        valid = np.ones(shape, dtype=bool)
        for mask, sign in subsets:
            idx = n + sum(v for i, v in enumerate(ds) if mask >> i & 1)
            for j in range(inner):
                if mask >> (outer + j) & 1:
                    idx = idx + axes[j]
            idx = np.broadcast_to(idx, shape)
            valid &= (idx >= 0) & (idx < m)
            phase += sign * ph[np.clip(idx, 0, m - 1)]
        total += float(np.sum(np.cos(_TWOPI * phase[valid])))
    return total


def weyl_inequality_check(f, N1: int, N2: int, N: int, ell: int,
                          method: str = "fast") -> tuple[float, float]:  # noqa: N803
    """Both sides of the Weyl differencing inequality for sum_{N1<n<=N2} e(f(n)).

    ``method="fast"`` evaluates the right-hand side through nested
    autocorrelations (it equals a sum of squared moduli); ``method="direct"``
    expands all 2**ell-fold differences and is meant for small N.
    """
    N1, N2, N, ell = int(N1), int(N2), int(N), int(ell)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if not (N1 < N2 and N2 - N1 <= N):
        raise ValueError("need N1 < N2 and N2 - N1 <= N")
    ph = _frac_phases(f, range(N1 + 1, N2 + 1))
    z = np.exp(2j * np.pi * ph)
    lhs = abs(z.sum()) ** (2 ** ell)
    factor = float(2 * N) ** (2 ** ell - ell - 1)
    if method == "fast":
        inner = _weyl_fast(z, ell - 1)
    elif method == "direct":
        if N > 60 or ell > 4:
            raise ValueError("direct expansion is limited to N <= 60 and ell <= 4")
        inner = _weyl_direct(ph, N, ell)
    else:
        raise ValueError("method must be 'fast' or 'direct'")
    return float(lhs), factor * inner


def minima_sum(alpha, H: int, N: int, approx: RationalApprox) -> tuple[float, float]:  # noqa: N803
    """sum_{h<=H} min(N, 1/||alpha h||) and (b + H + N + HN/b) max(1, log b)."""
    x = Frac128(alpha.num).as_fraction() if isinstance(alpha, Frac128) else to_fraction(alpha)
    a, b = approx.a, approx.b
    if abs(x - Fraction(a, b)) > Fraction(1, b * b):
        raise HypothesisViolated(f"|alpha - {a}/{b}| exceeds 1/b^2")
    num, den = x.numerator, x.denominator
    terms = []
    for h in range(1, int(H) + 1):
        r = (num * h) % den
        d = min(r, den - r)
        terms.append(float(N) if d == 0 else min(float(N), den / d))
    lhs = math.fsum(terms)
    rhs = (b + H + N + H * N / b) * max(1.0, math.log(b))
    return lhs, rhs


def predicted_exponent(case, k: int, theta_r=None, rho=None, c=None) -> float:
    """Saving exponent eta: predicted bounds are N**(1 - eta) for sums, N**-eta for minima."""
    case = ExponentCase(case)
    k = int(k)
    K = 2 ** k  # noqa: N806
    if case in (ExponentCase.CorollaryInt, ExponentCase.CorollaryPrime):
        if c is None:
            raise InvalidCase("corollary exponents need c")
        c = float(c)
        if c <= 1 or float(c).is_integer():
            raise InvalidCase("c must be a non-integral real > 1")
        if c > k:
            return 0.5 / (2 ** (math.ceil(c) + 1) - 1)
        base = 2 if case is ExponentCase.CorollaryInt else 4
        return 1.0 / (base ** (k - 1) * (k + 2))
    if case in (ExponentCase.MediumInt, ExponentCase.MediumPrime):
        if rho is None:
            raise InvalidCase("medium-range exponents need rho")
        rho = float(rho)
        if not (0 < rho and rho * (k + 3) < 1):
            raise InvalidCase("medium range requires 0 < rho and rho (k + 3) < 1")
        if k < 2:
            raise InvalidCase("medium range requires a polynomial part of degree k >= 2")
        return rho * (2.0 ** (1 - k) if case is ExponentCase.MediumInt else 4.0 ** (1 - k))
    if theta_r is None:
        raise InvalidCase("large-range exponents need theta_r")
    theta_r = float(theta_r)
    if theta_r <= 1 or theta_r.is_integer():
        raise InvalidCase("theta_r must be a non-integral real > 1")
    L = 2 ** math.floor(theta_r)  # noqa: N806
    large_int = 1.0 / (8 * K * L - 4 * K)
    large_prime_core = 1.0 / (64 * K * L ** 5 - 4 * K)
    if case is ExponentCase.LargeInt:
        return large_int
    if rho is None:
        raise InvalidCase(f"{case} needs rho")
    rho = float(rho)
    if not 0 < rho < 1:
        raise InvalidCase("rho must lie in (0, 1)")
    if case is ExponentCase.LargePrime:
        return min(rho, 2.0 / (3 * K), rho / K, large_prime_core)
    deg = max(theta_r, float(k))
    if rho * (math.floor(deg) + 3) >= 1:
        raise InvalidCase("rho must be below 1/(floor(deg f) + 3)")
    tail = (deg + rho - 1) / (1 + deg / (1 - rho))
    if case is ExponentCase.TheoremInt:
        return min(rho * 2.0 ** (1 - k), large_int, tail)
    return min(rho * 4.0 ** (1 - k), large_prime_core, tail)


def vdc_bound_terms(X, G, k: int, q: int, logfac: float = 1.0) -> tuple[float, float, float]:  # noqa: N803
    X, G = float(X), float(G)
    k, q = int(k), int(q)
    if X <= 1 or G <= 0 or k < 0 or q < 0:
        raise ValueError("need X > 1, G > 0, k >= 0, q >= 0")
    if not G < X ** (q + 2) / logfac:
        raise HypothesisViolated(f"G = {G!r} is not below X^(q+2)/logfac = {X ** (q + 2) / logfac!r}")
    K, Q = 2 ** k, 2 ** q  # noqa: N806
    t1 = X ** (1 - 1 / K)
    t2 = X * (math.log(X) ** k / G) ** (1 / K)
    t3 = X * (G / X ** (q + 2)) ** (1 / (4 * K * Q - 2 * K))
    return t1, t2, t3


def vdc_bound(X, G, k: int, q: int, logfac: float = 1.0) -> float:  # noqa: N803
    """Three-term van der Corput differencing bound with K = 2**k, Q = 2**q."""
    return math.fsum(vdc_bound_terms(X, G, k, q, logfac))


# ---------------------------------------------------------------- Vaughan

@dataclass(frozen=True)
class VaughanParams:
    X: int
    U: float
    V: float
    Z: float
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def vaughan_params(X: int, strict: bool = True) -> VaughanParams:  # noqa: N803
    """U = X**(1/5)/4, V = 4 X**(1/3), Z the half-integer nearest X**(2/5)/4 (ties upward)."""
    X = int(X)
    if X < 1:
        raise ValueError("X must be positive")
    U = X ** 0.2 / 4  # noqa: N806
    V = 4 * X ** (1 / 3)  # noqa: N806
    t = X ** 0.4 / 4
    z0 = math.floor(t - 0.5) + 0.5
    Z = z0 if t - z0 < (z0 + 1) - t else z0 + 1  # noqa: N806
    checks = [
        ("U >= 3", U >= 3),
        ("U < V", U < V),
        ("V < Z", V < Z),
        ("Z < 2X", Z < 2 * X),
        ("Z >= 4U^2", Z >= 4 * U * U),
        ("X >= 32 Z^2 U", X >= 32 * Z * Z * U),
        ("V^3 >= 32X", V ** 3 >= 32 * X),
    ]
    violations = tuple(name for name, good in checks if not good)
    if strict and violations:
        raise ConstraintViolated(violations, f"X = {X} is too small for the Vaughan parameters: "
                                 + "; ".join(violations))
    return VaughanParams(X, U, V, Z, violations)


@dataclass(frozen=True)
class VaughanResult:
    params: VaughanParams
    S: ExpSumReport
    S1: ExpSumReport
    S2: ExpSumReport
    S2_adversarial: ExpSumReport
    b_bound_ok: bool

    def __iter__(self):
        return iter((self.S, self.S1, self.S2))

    @property
    def rhs(self) -> float:
        lx = math.log(self.params.X)
        return 1.0 + lx * self.S1.modulus + lx ** 8 * self.S2.modulus

    @property
    def holds(self) -> bool:
        return self.S.modulus <= self.rhs


def _abs_report(values: list[float], terms: int) -> ExpSumReport:
    total = math.fsum(values)
    return ExpSumReport(complex(total, 0.0), total, terms, _summation_bound(total, terms, 4 * _U))


def vaughan_decompose(f: PseudoPolynomial, beta, X: int, strict: bool = True,
                      threads: int | None = 1) -> VaughanResult:  # noqa: N803
    """Lambda-weighted sum over (X, 2X] with its Type I and Type II companions.

    S1 = sum_{x < 2X/Z} d3(x) |sum_{y > Z, X < xy < 2X} e(beta f(xy))| and
    S2 = sum_{X/V < x <= 2X/U} d4(x) |sum_{U < y < V, X < xy <= 2X} b(y) e(beta f(xy))|
    with b(y) = sum_{d | y, d <= V} mu(d).  ``S2_adversarial`` replaces b by
    d3(y) with the sign of each term's real part.  With ``strict=False`` the
    parameter constraints are recorded instead of enforced.
    """
    X = int(X)
    if X > 10 ** 7:
        raise ValueError("exact decomposition is limited to X <= 1e7")
    params = vaughan_params(X, strict=strict)
    U, V, Z = params.U, params.V, params.Z  # noqa: N806
    lam = mangoldt_table(2 * X)
    S = direct_sum(f, beta, X, 2 * X, weights=lam[X + 1:], mode="continuous", threads=threads)  # noqa: N806
    ns = np.arange(X + 1, 2 * X + 1, dtype=np.int64)
    fb = floor_many(f, ns)
    z = np.exp(2j * np.pi * phase_array(fb.floors, fb.rems, beta, mode="continuous"))

    def term(n):  # z indexed by n
        return z[n - (X + 1)]

    top = 2 * X
    d3 = divisor_table(top, 3)
    d4 = divisor_table(top, 4)
    s1_terms = []
    z_int = int(Z + 0.5)  # y > Z  <=>  y >= Z + 1/2
    x = 1
    while x * Z < 2 * X:
        y_lo = max(X // x + 1, z_int)
        y_hi = (2 * X - 1) // x
        if y_lo <= y_hi:
            y = np.arange(y_lo, y_hi + 1)
            s1_terms.append(int(d3[x]) * abs(term(x * y).sum()))
        x += 1
    S1 = _abs_report(s1_terms, len(s1_terms))  # noqa: N806

    mu = mobius_table(top)
    v_cap = math.floor(V)
    b = np.zeros(top + 1)
    for d in range(1, min(v_cap, top) + 1):
        if mu[d]:
            b[d::d] += mu[d]
    b_ok = bool(np.all(np.abs(b[1:]) <= d3[1:]))
    s2_terms, adv_terms = [], []
    x_lo = math.floor(X / V) + 1
    x_hi = math.floor(2 * X / U)
    u_lo = math.floor(U) + 1
    v_hi = math.ceil(V) - 1
    for x in range(max(x_lo, 1), x_hi + 1):
        y_lo = max(u_lo, X // x + 1)
        y_hi = min(v_hi, (2 * X) // x)
        if y_lo > y_hi:
            continue
        y = np.arange(y_lo, y_hi + 1)
        zz = term(x * y)
        s2_terms.append(int(d4[x]) * abs(np.sum(b[y] * zz)))
        signs = np.where(zz.real >= 0, 1.0, -1.0)
        adv_terms.append(int(d4[x]) * abs(np.sum(d3[y] * signs * zz)))
    S2 = _abs_report(s2_terms, len(s2_terms))  # noqa: N806
    adv = _abs_report(adv_terms, len(adv_terms))
    return VaughanResult(params, S, S1, S2, adv, b_ok)


def psi_correlate(psi_values: Sequence[float], n: int, ys: Sequence[int], s: int | None = None) -> float:
    """Product of psi(n + sum(T)) over all subsets T of the shifts ys."""
    ys = [int(y) for y in ys]
    if s is not None and int(s) != len(ys):
        raise ValueError(f"expected {s} shifts, got {len(ys)}")
    prod = 1.0
    size = len(psi_values)
    for mask in range(1 << len(ys)):
        idx = int(n) + sum(y for i, y in enumerate(ys) if mask >> i & 1)
        if not 0 <= idx < size:
            raise IndexOutOfRange(f"shifted index {idx} outside [0, {size})")
        prod *= psi_values[idx]
    return prod
