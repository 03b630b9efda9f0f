"""van der Corput and Heilbronn set quantities.

``delta_upper`` bounds delta(H) = inf { a0 : T >= 0, T(0) = 1 } from above
with a linear program over cosine polynomials supported on H.  The LP only
sees finitely many points, so the solution is shifted by a certified lower
bound of its true minimum; the shifted polynomial is genuinely nonnegative,
which makes its constant term a valid upper bound.

``gamma_lower`` bounds gamma(H) = sup_xi min_h ||h . xi|| from below by
exact evaluation at the best grid or rational point found.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from scipy.optimize import linprog

from .core import to_fraction
from .errors import HypothesisViolated, InvalidFamilyParams, WitnessNotFound
from .modarith import ONE, Frac128, intersective_check, primes_upto

_TWOPI = 2.0 * math.pi


# ---------------------------------------------------------------- families

@dataclass(frozen=True)
class FamilySpec:
    """A named generator of shift sets with its parameters.

    ``irrational`` records parameters the user asserts to be irrational; this
    cannot be checked numerically and is reported, not verified.
    """

    name: str
    params: tuple = ()
    irrational: tuple = ()

    @classmethod
    def make(cls, name: str, irrational: Iterable[str] = (), **params) -> "FamilySpec":
        return cls(name, tuple(sorted(params.items())), tuple(sorted(irrational)))

    @classmethod
    def from_config(cls, cfg) -> "FamilySpec":
        if isinstance(cfg, FamilySpec):
            return cfg
        if isinstance(cfg, str):
            return cls(cfg)
        cfg = dict(cfg)
        name = cfg.pop("name")
        irr = cfg.pop("irrational", ())
        return cls.make(name, irr, **cfg)

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    @property
    def params_text(self) -> str:
        items = [f"{k}={v}" for k, v in self.params]
        items += [f"irrational:{k}" for k in self.irrational]
        return ";".join(items)


@dataclass(frozen=True)
class ShiftSet:
    """Finite H in Z^k minus the origin; rows of ``elements`` are the shifts."""

    elements: np.ndarray
    family: FamilySpec | None = None

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=np.int64)
        if el.ndim == 1:
            el = el[:, None]
        if el.ndim != 2:
            raise ValueError("elements must be integers or integer vectors")
        if el.shape[0] and np.any(np.all(el == 0, axis=1)):
            raise ValueError("the zero vector is not allowed in a shift set")
        if el.shape[0] and np.unique(el, axis=0).shape[0] != el.shape[0]:
            raise ValueError("shift set elements must be distinct")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)

    @classmethod
    def from_iterable(cls, items, family: FamilySpec | None = None) -> "ShiftSet":
        rows = {tuple(np.atleast_1d(np.asarray(x, dtype=np.int64)).tolist()) for x in items}
        rows.discard(tuple([0] * len(next(iter(rows)))) if rows else ())
        rows = sorted(rows, key=lambda r: (max(abs(v) for v in r), r))
        k = len(rows[0]) if rows else 1
        return cls(np.array(rows, dtype=np.int64).reshape(-1, k), family)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self):
        return self.elements.shape[0]

    @property
    def h_max(self) -> int:
        return int(np.abs(self.elements).max()) if len(self) else 0

    def as_list(self) -> list:
        if self.dim == 1:
            return [int(v) for v in self.elements[:, 0]]
        return [tuple(int(v) for v in row) for row in self.elements]


def _floor_mpfr(expr) -> int:
    return int(gmpy2.floor(expr))


def _real(v) -> gmpy2.mpfr:
    return gmpy2.mpfr(gmpy2.mpq(to_fraction(v)))


def _require(cond: bool, message: str):
    if not cond:
        raise InvalidFamilyParams(message)


def _int_poly(coeffs: Sequence[int], x: int) -> int:
    acc = 0
    for c in coeffs:
        acc = acc * x + int(c)
    return acc


def family_generate(tag, N: int) -> ShiftSet:  # noqa: N803
    """Truncation of a named family to parameters <= N."""
    spec = FamilySpec.from_config(tag)
    N = int(N)  # noqa: N806
    name = spec.name
    p = spec.param
    with gmpy2.context(precision=160):
        if name == "integers":
            items = range(1, N + 1)
        elif name == "squares":
            items = [n * n for n in range(1, N + 1)]
        elif name == "powers":
            a = int(p("a", 2))
            _require(a >= 1, "powers needs a >= 1")
            items = [n ** a for n in range(1, N + 1)]
        elif name in ("shifted_primes", "shifted_primes_plus"):
            s = -1 if name == "shifted_primes" else 1
            primes = primes_upto(N + 1) if N >= 1 else []
            items = [int(q) + s for q in primes if 0 < int(q) + s <= N]
        elif name in ("floor_power", "floor_power_sum", "floor_power_log", "floor_power_plus_log"):
            _require(p("c") is not None, f"{name} needs c")
            b = _real(p("b", 1))
            c = _real(p("c"))
            _require(b != 0, "b must be nonzero")
            if name == "floor_power":
                _require(c > 1, "c must exceed 1")
                items = [_floor_mpfr(b * gmpy2.mpfr(n) ** c) for n in range(1, N + 1)]
            elif name == "floor_power_sum":
                d, a = _real(p("d", 0)), _real(p("a", 0))
                _require(d != 0, "d must be nonzero")
                _require(c >= 1 and a > 0 and a != c, "need c >= 1, a > 0, a != c")
                items = [_floor_mpfr(b * gmpy2.mpfr(n) ** c + d * gmpy2.mpfr(n) ** a)
                         for n in range(1, N + 1)]
            elif name == "floor_power_log":
                d = _real(p("d", 0))
                _require(c > 1, "c must exceed 1")
                _require(d != 0 or "c" in spec.irrational,
                         "with d = 0 the exponent c must be asserted irrational")
                items = [_floor_mpfr(b * gmpy2.mpfr(n) ** c * gmpy2.log(n) ** d)
                         for n in range(2, N + 1)]
            else:
                d, a = _real(p("d", 0)), _real(p("a", 0))
                _require(d != 0 and c >= 1 and a > 1, "need d != 0, c >= 1, a > 1")
                items = [_floor_mpfr(b * gmpy2.mpfr(n) ** c + d * gmpy2.log(n) ** a)
                         for n in range(2, N + 1)]
        elif name in ("poly_pair", "poly_pair_shifted_primes"):
            f = [int(v) for v in p("f")]
            g = [int(v) for v in p("g")]
            if name == "poly_pair":
                rows = intersective_check([f, g], int(p("qcheck", 30)))
                bad = [r.q for r in rows if not r.ok]
                _require(not bad, f"f and g have no common root modulo {bad[:5]}")
                items = [(_int_poly(f, n), _int_poly(g, n)) for n in range(1, N + 1)]
            else:
                _require(f[-1] == 0 and g[-1] == 0, "f and g need zero constant terms")
                primes = primes_upto(N + 1) if N >= 1 else []
                items = [(_int_poly(f, int(q) - 1), _int_poly(g, int(q) - 1))
                         for q in primes if int(q) - 1 <= N]
        elif name in ("prime_power_floors", "prime_power_floors_plus"):
            s = -1 if name == "prime_power_floors" else 1
            alphas = [int(v) for v in p("alphas", ())]
            betas = [_real(v) for v in p("betas", ())]
            _require(all(a > 0 for a in alphas), "alphas must be positive integers")
            _require(all(not gmpy2.is_integer(b) and b > 0 for b in betas),
                     "betas must be positive non-integers")
            _require(alphas or betas, "need at least one coordinate")
            primes = primes_upto(N + 1) if N >= 1 else []
            items = []
            for q in primes:
                m = int(q) + s
                if not 0 < m <= N:
                    continue
                items.append(tuple([m ** a for a in alphas]
                                   + [_floor_mpfr(gmpy2.mpfr(m) ** b) for b in betas]))
        else:
            raise InvalidFamilyParams(f"unknown family {name!r}")
    items = [x for x in items if np.any(np.asarray(x) != 0)]
    if not items:
        raise InvalidFamilyParams(f"family {name} is empty for N = {N}")
    return ShiftSet.from_iterable(items, spec)


# ---------------------------------------------------------------- cosine polynomials

@dataclass(frozen=True)
class CosinePolynomial:
    """T(x) = a0 + sum_h a_h cos(2 pi h . x)."""

    a0: float
    shifts: np.ndarray
    coeffs: np.ndarray
    margin: float = 0.0   # certified lower bound of min T before any shift

    @property
    def total(self) -> float:
        """T(0)."""
        return self.a0 + float(np.sum(self.coeffs))

    @property
    def coefficient_map(self) -> dict:
        keys = [int(r[0]) if len(r) == 1 else tuple(int(v) for v in r) for r in self.shifts]
        return dict(zip(keys, self.coeffs.tolist()))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        k = self.shifts.shape[1]
        pts = x.reshape(-1, k) if k > 1 or x.ndim > 1 else x.reshape(-1, 1)
        ph = pts @ self.shifts.T.astype(np.float64)
        ph -= np.round(ph)
        out = self.a0 + np.cos(_TWOPI * ph) @ self.coeffs
        return out if x.ndim else float(out[0])


def fejer_kernel(N: int) -> CosinePolynomial:  # noqa: N803
    """Normalised Fejer kernel on {1, ..., N}: nonnegative, T(0) = 1, a0 = 1/(N+1)."""
    h = np.arange(1, N + 1)
    return CosinePolynomial(1.0 / (N + 1), h[:, None], 2 * (1 - h / (N + 1)) / (N + 1), 0.0)


def _canonical_shifts(H: ShiftSet) -> np.ndarray:
    """Identify h with -h (same cosine); keep one representative each."""
    rows = set()
    for r in H.elements:
        t = tuple(int(v) for v in r)
        neg = tuple(-v for v in t)
        rows.add(max(t, neg))
    return np.array(sorted(rows), dtype=np.int64).reshape(-1, H.dim)


def _fine_eval(shifts: np.ndarray, a0: float, coeffs: np.ndarray, F: int):  # noqa: N803
    """T, its gradient and its Hessian on the grid (Z/F)^k via inverse FFT."""
    k = shifts.shape[1]
    shape = (F,) * k
    idx_pos = tuple((shifts % F).T)
    idx_neg = tuple(((-shifts) % F).T)
    scale = F ** k

    def synth(weights_pos, weights_neg, const=0.0):
        spec = np.zeros(shape, dtype=complex)
        np.add.at(spec, idx_pos, weights_pos)
        np.add.at(spec, idx_neg, weights_neg)
        spec[(0,) * k] += const
        return np.real(np.fft.ifftn(spec)) * scale

    half = coeffs / 2
    t = synth(half, half, a0)
    grad = []
    for j in range(k):
        w = half * (2j * math.pi * shifts[:, j])
        grad.append(synth(w, -w))
    hess = {}
    for i in range(k):
        for j in range(i, k):
            w = -half * (4 * math.pi ** 2 * shifts[:, i] * shifts[:, j])
            hess[i, j] = synth(w, w)
    return t, grad, hess


def _fine_values(shifts, a0, coeffs, F: int) -> np.ndarray:  # noqa: N803
    k = shifts.shape[1]
    spec = np.zeros((F,) * k, dtype=complex)
    np.add.at(spec, tuple((shifts % F).T), coeffs / 2)
    np.add.at(spec, tuple(((-shifts) % F).T), coeffs / 2)
    spec[(0,) * k] += a0
    return np.real(np.fft.ifftn(spec)) * F ** k


def _certified_min(shifts, a0, coeffs, F: int) -> float:  # noqa: N803
    """Lower bound for min T over the torus from a grid of spacing 1/F.

    Around each grid point T is its second-order Taylor polynomial plus a
    remainder bounded through the third derivative; every point of the torus
    is within half a step of some grid point in each coordinate.
    """
    k = shifts.shape[1]
    t, g, hs = _fine_eval(shifts, a0, coeffs, F)
    half = 0.5 / F
    if k == 1:
        d1, d2 = g[0], hs[0, 0]
        convex = d2 > 0
        quad = np.where(convex & (np.abs(d1) <= d2 * half),
                        t - d1 ** 2 / (2 * np.where(convex, d2, 1.0)),
                        t - np.abs(d1) * half + d2 * half ** 2 / 2)
    else:
        a, b, c = hs[0, 0], hs[0, 1], hs[1, 1]
        det = a * c - b * b
        pd = (a > 0) & (det > 0)
        safe_det = np.where(pd, det, 1.0)
        # unconstrained minimum of the quadratic model, valid as a lower bound when convex
        newton = t - (c * g[0] ** 2 - 2 * b * g[0] * g[1] + a * g[1] ** 2) / (2 * safe_det)
        lam_min = (a + c) / 2 - np.sqrt(((a - c) / 2) ** 2 + b * b)
        crude = t - (np.abs(g[0]) + np.abs(g[1])) * half + np.minimum(lam_min, 0) * half ** 2
        quad = np.where(pd, np.maximum(newton, crude), crude)
    norms = np.sum(np.abs(shifts.astype(np.float64)), axis=1)
    third = (2 * math.pi) ** 3 * float(np.sum(np.abs(coeffs) * norms ** 3))
    remainder = third * half ** 3 / 6
    roundoff = 1e-13 * (abs(a0) + float(np.sum(np.abs(coeffs))))
    return float(np.min(quad)) - remainder - roundoff


def _lp_grid(shifts: np.ndarray, G: int) -> np.ndarray:  # noqa: N803
    k = shifts.shape[1]
    if k == 1:
        return (np.arange(G // 2 + 1) / G)[:, None]
    i, j = np.meshgrid(np.arange(G), np.arange(G), indexing="ij")
    pts = np.stack([i.ravel(), j.ravel()], axis=1)
    keep = (pts[:, 0] < (G + 1) // 2 + 1)
    return pts[keep] / G


def delta_upper(H: ShiftSet, grid_density: int = 8, max_rounds: int = 40,
                fine_factor: int = 256) -> tuple[float, CosinePolynomial]:  # noqa: N803
    """Certified upper bound on delta(H) and the nonnegative polynomial attaining it."""
    if len(H) == 0:
        raise ValueError("delta of the empty set is undefined")
    if len(H) > 200 or H.dim > 2:
        raise ValueError("delta_upper supports |H| <= 200 and dimension <= 2")
    shifts = _canonical_shifts(H)
    n, k = shifts.shape
    h_max = int(np.abs(shifts).max())
    G = max(grid_density * h_max, 16)  # noqa: N806
    if k == 1:
        F = 1 << max(16, math.ceil(math.log2(fine_factor * h_max)))  # noqa: N806
    else:
        F = 1 << min(11, max(9, math.ceil(math.log2(64 * h_max))))  # noqa: N806
    pts = _lp_grid(shifts, G)
    sh = shifts.astype(np.float64)
    c = np.zeros(n + 1)
    c[0] = 1.0
    a_eq = np.ones((1, n + 1))
    bounds = [(0.0, 1.0)] + [(-2.0, 2.0)] * n

    def rows_for(p):
        ph = p @ sh.T
        return -np.hstack([np.ones((p.shape[0], 1)), np.cos(_TWOPI * (ph - np.round(ph)))])

    a_ub = rows_for(pts)
    res = None
    for _ in range(max_rounds):
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(a_ub.shape[0]), A_eq=a_eq, b_eq=[1.0],
                      bounds=bounds, method="highs")
        if res.status != 0:
            raise RuntimeError(f"LP failed: {res.message}")
        a0, coeffs = float(res.x[0]), np.asarray(res.x[1:])
        t = _fine_values(shifts, a0, coeffs, F)
        bad = np.flatnonzero(t.ravel() < -1e-10)
        if bad.size == 0:
            break
        worst = bad[np.argsort(t.ravel()[bad])[:64]]
        new = np.stack(np.unravel_index(worst, t.shape), axis=1) / F
        a_ub = np.vstack([a_ub, rows_for(new)])
    a0, coeffs = float(res.x[0]), np.asarray(res.x[1:])
    # renormalise so T(0) = 1 exactly up to rounding
    total = a0 + float(np.sum(coeffs))
    a0, coeffs = a0 / total, coeffs / total
    margin = _certified_min(shifts, a0, coeffs, F)
    eta = max(0.0, -margin)
    a0_c = (a0 + eta) / (1 + eta)
    poly = CosinePolynomial(a0_c, shifts, coeffs / (1 + eta), margin)
    return a0_c, poly


def gamma_exact(H: ShiftSet, xi) -> Fraction:
    """min_h ||h . xi|| exactly, for rational xi."""
    xi = [Fraction(v) for v in np.atleast_1d(np.asarray(xi, dtype=object))]
    best = None
    for row in H.elements:
        v = sum((int(h) * x for h, x in zip(row, xi)), Fraction(0))
        r = v - math.floor(v)
        d = min(r, 1 - r)
        if best is None or d < best:
            best = d
    return best


def _farey(order: int) -> list[Fraction]:
    return sorted({Fraction(p, q) for q in range(1, order + 1) for p in range(0, q + 1)})


def gamma_lower(H: ShiftSet, resolution: int = 4096, rational_order: int | None = None,
                block: int = 4096) -> tuple[float, tuple]:  # noqa: N803
    """Lower bound on gamma(H) from grid points i/resolution and rationals p/q.

    In one dimension every local maximum of min_h ||h xi|| has denominator at
    most 2 max|h|, so the default rational order makes the search exact there.
    Returns the exact value at the best point found and that point.
    """
    if H.dim > 2:
        raise ValueError("gamma_lower supports dimension <= 2")
    sh = H.elements.astype(np.float64)
    h_max = H.h_max
    if H.dim == 1:
        order = rational_order if rational_order is not None else min(max(2 * h_max, 2), 4000)
        cands = sorted(set(_farey(order)) | {Fraction(i, resolution) for i in range(resolution + 1)})
        pts = [(c,) for c in cands]
    else:
        order = rational_order if rational_order is not None else 24
        res2 = min(resolution, 512)
        cands = {(Fraction(i, res2), Fraction(j, res2)) for i in range(res2) for j in range(res2)}
        for q in range(1, order + 1):
            cands |= {(Fraction(a, q), Fraction(b, q)) for a in range(q) for b in range(q)}
        pts = sorted(cands)
    arr = np.array([[float(v) for v in p] for p in pts])
    scores = np.empty(arr.shape[0])
    for start in range(0, arr.shape[0], block):
        ph = arr[start:start + block] @ sh.T
        scores[start:start + block] = np.abs(ph - np.round(ph)).min(axis=1)
    # float ties are settled exactly, smallest candidate first
    near = np.flatnonzero(scores >= scores.max() - 1e-12)[:256]
    exact, xi_star = max(((gamma_exact(H, pts[i]), pts[i]) for i in near),
                         key=lambda item: (item[0], [-v for v in item[1]]))
    return float(exact), xi_star


def large_sieve_witness(xs: Sequence, cs: Sequence[float], M: int) -> tuple[int, float]:  # noqa: N803
    """First m <= M with |sum_n c_n e(m x_n)| >= (1/(6M)) sum_n c_n.

    Requires ||x_n|| >= 1/M for every n.
    """
    M = int(M)  # noqa: N806
    exact = [x.as_fraction() if isinstance(x, Frac128) else to_fraction(x) for x in xs]
    xs = [Frac128.from_real(x) for x in xs]
    cs = np.asarray(cs, dtype=np.float64)
    if len(xs) != cs.size:
        raise ValueError("xs and cs differ in length")
    if np.any(cs < 0):
        raise ValueError("weights must be nonnegative")
    if M < 2 or any(min(q - math.floor(q), math.ceil(q) - q) * M < 1 for q in exact):
        raise HypothesisViolated("need M >= 2 and ||x_n|| >= 1/M for all n")
    target = float(np.sum(cs)) / (6 * M)
    nums = [x.num for x in xs]
    for m in range(1, M + 1):
        ph = np.array([((v * m) % ONE) / ONE for v in nums])
        val = abs(np.sum(cs * np.exp(2j * np.pi * ph)))
        if val >= target:
            return m, float(val)
    raise WitnessNotFound(f"no m <= {M} reaches {target!r}")


# ---------------------------------------------------------------- tables

@dataclass(frozen=True)
class DeltaGammaRow:
    family: str
    params: str
    N: int
    set_size: int
    gamma_lower: float
    delta_upper: float
    lp_margin: float

    CSV_HEADER = ("family", "params", "N", "set_size", "gamma_lower", "delta_upper", "lp_margin")

    def csv_row(self) -> list[str]:
        return [self.family, self.params, str(self.N), str(self.set_size),
                repr(self.gamma_lower), repr(self.delta_upper), repr(self.lp_margin)]


def delta_gamma_table(families: Sequence, Ns: Sequence[int], grid_density: int = 8,
                      resolution: int = 4096) -> list[DeltaGammaRow]:  # noqa: N803
    """gamma lower and delta upper bounds for each family and N; checks gamma <= delta."""
    rows = []
    for fam in families:
        spec = FamilySpec.from_config(fam)
        for N in Ns:  # noqa: N806
            H = family_generate(spec, N)  # noqa: N806
            d, T = delta_upper(H, grid_density)  # noqa: N806
            g, _ = gamma_lower(H, resolution)
            if g > d + 1e-6:
                raise ArithmeticError(f"gamma lower bound {g!r} exceeds delta upper bound {d!r}")
            rows.append(DeltaGammaRow(spec.name, spec.params_text, int(N), len(H), g, d, T.margin))
    return rows


def write_csv(rows, header, fh=None) -> str:
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue() if fh is None else ""
