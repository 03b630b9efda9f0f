"""Fractional-part minima scans, divisibility counters, lattice hits and exponent fits."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels
from .core import PseudoPolynomial, floor_many, to_fraction
from .errors import DegenerateInput, IllConditioned, SingularBasis
from .modarith import ONE, Frac128, prime_mask
from .parallel import CHUNK, chunk_bounds, map_ordered

log = logging.getLogger(__name__)


class IndexSet(str, Enum):
    AllIntegers = "AllIntegers"
    Primes = "Primes"

    @classmethod
    def coerce(cls, value) -> "IndexSet":
        if isinstance(value, IndexSet):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        aliases = {"allintegers": cls.AllIntegers, "integers": cls.AllIntegers, "all": cls.AllIntegers,
                   "primes": cls.Primes, "prime": cls.Primes}
        if key not in aliases:
            raise ValueError(f"unknown index set {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class ScanResult:
    N: int
    xi: object                 # Frac128, or a tuple of rows of Frac128 for multi scans
    argmin_n: int
    min_num: int               # exact minimum as a numerator over 2**128
    index_set: IndexSet
    ambiguous_count: int = 0

    @property
    def min_value(self) -> float:
        return self.min_num / ONE

    @property
    def min_fraction(self) -> Fraction:
        return Fraction(self.min_num, ONE)

    @property
    def xi_hex(self) -> str:
        if isinstance(self.xi, Frac128):
            return self.xi.hex
        return ";".join(",".join(a.hex for a in row) for row in self.xi)

    def csv_row(self, experiment_id: str, f_text: str) -> list[str]:
        return [experiment_id, f_text, self.xi_hex, str(self.N), self.index_set.value,
                str(self.argmin_n), repr(self.min_value), str(self.ambiguous_count)]


SCAN_CSV_HEADER = ("experiment_id", "f_text", "xi_hex", "N", "index_set", "argmin",
                   "min_value", "ambiguous_count")


def write_scan_csv(rows: Iterable[tuple[str, str, ScanResult]], fh=None) -> str:
    """Write ``(experiment_id, f_text, result)`` rows; returns the text when no handle is given."""
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_CSV_HEADER)
    for exp_id, f_text, res in rows:
        w.writerow(res.csv_row(exp_id, f_text))
    return buf.getvalue() if fh is None else ""


class FloorTable:
    """Certified floors of one or more pseudo-polynomials at n = 1..N, grown on demand.

    Entry ``i`` of every array corresponds to ``n = i + 1``.
    """

    def __init__(self, fs: PseudoPolynomial | Sequence[PseudoPolynomial]):
        self.fs = (fs,) if isinstance(fs, PseudoPolynomial) else tuple(fs)
        self.floors = np.zeros((len(self.fs), 0), dtype=np.int64)
        self.ok = np.zeros(0, dtype=bool)
        self._prime_ok = np.zeros(0, dtype=bool)

    @property
    def size(self) -> int:
        return self.ok.size

    def ensure(self, N: int) -> None:  # noqa: N803
        N = int(N)  # noqa: N806
        if N <= self.size:
            return
        ns = np.arange(self.size + 1, N + 1, dtype=np.int64)
        rows, ok = [], np.ones(ns.size, dtype=bool)
        for f in self.fs:
            batch = floor_many(f, ns)
            rows.append(batch.floors)
            ok &= batch.ok
        self.floors = np.ascontiguousarray(np.hstack([self.floors, np.vstack(rows)]))
        self.ok = np.concatenate([self.ok, ok])
        mask = prime_mask(N)[1:] if N >= 2 else np.zeros(N, dtype=bool)
        self._prime_ok = self.ok & mask

    def valid(self, index_set: IndexSet) -> np.ndarray:
        """uint8 mask of certified entries in the index set."""
        m = self._prime_ok if index_set is IndexSet.Primes else self.ok
        return np.ascontiguousarray(m, dtype=np.uint8)

    def ambiguous(self, N: int, index_set: IndexSet) -> int:  # noqa: N803
        bad = ~self.ok[:N]
        if index_set is IndexSet.Primes:
            bad &= prime_mask(N)[1:]
        return int(np.count_nonzero(bad))


def _as_xi(xi) -> Frac128:
    return xi if isinstance(xi, Frac128) else Frac128.from_real(xi)


def _segment_reduce(results) -> tuple[int, int]:
    """Earliest index attaining the smallest numerator; chunks arrive in order."""
    best, best_idx = -1, -1
    for hi, lo, idx in results:
        if idx < 0:
            continue
        num = (int(hi) << 64) | int(lo)
        if best < 0 or num < best:
            best, best_idx = num, int(idx)
    return best, best_idx


def _scan_range(table: FloorTable, xi: Frac128, start: int, stop: int,
                index_set: IndexSet, threads: int) -> tuple[int, int]:
    floors = table.floors[0]
    valid = table.valid(index_set)
    parts = chunk_bounds(start, stop, CHUNK)
    res = map_ordered(lambda a, b: kernels.segment_min(floors, valid, xi.hi, xi.lo, a, b),
                      parts, threads)
    return _segment_reduce(res)


def _merge(prev: tuple[int, int], new: tuple[int, int]) -> tuple[int, int]:
    if prev[1] < 0 or (new[1] >= 0 and new[0] < prev[0]):
        return new
    return prev


def scan_schedule(f: PseudoPolynomial, xi, Ns: Sequence[int], index_set="AllIntegers",
                  threads: int = 1, table: FloorTable | None = None) -> list[ScanResult]:  # noqa: N803
    """min_{n <= N} ||xi floor(f(n))|| for each N of an ascending schedule.

    Each N only scans the new range, so the schedule costs one pass to max N.
    """
    index_set = IndexSet.coerce(index_set)
    Ns = [int(n) for n in Ns]  # noqa: N806
    if any(b < a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("N schedule must be ascending")
    if Ns and Ns[0] < 1:
        raise ValueError("N must be >= 1")
    xi = _as_xi(xi)
    table = table or FloorTable(f)
    table.ensure(Ns[-1] if Ns else 0)
    out, state, done = [], (-1, -1), 0
    for N in Ns:  # noqa: N806
        state = _merge(state, _scan_range(table, xi, done, N, index_set, threads))
        done = N
        num, idx = state
        if idx < 0:
            raise ValueError(f"no admissible n <= {N} in {index_set.value}")
        out.append(ScanResult(N, xi, idx + 1, num, index_set, table.ambiguous(N, index_set)))
    return out


def scan_min(f: PseudoPolynomial, xi, N: int, index_set="AllIntegers", threads: int = 1,
             table: FloorTable | None = None) -> ScanResult:  # noqa: N803
    """Exact min over the index set of ||xi floor(f(n))||, smallest n on ties."""
    return scan_schedule(f, xi, [N], index_set, threads, table)[0]


def _matrix_frac(A) -> tuple[tuple[tuple[Frac128, ...], ...], np.ndarray, np.ndarray]:  # noqa: N803
    rows = tuple(tuple(_as_xi(a) for a in row) for row in A)
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("A must be a nonempty rectangular matrix")
    a_hi = np.array([[a.hi for a in r] for r in rows], dtype=np.uint64)
    a_lo = np.array([[a.lo for a in r] for r in rows], dtype=np.uint64)
    return rows, np.ascontiguousarray(a_hi), np.ascontiguousarray(a_lo)


def scan_min_multi(f_list: Sequence[PseudoPolynomial], A, N: int, index_set="AllIntegers",
                   threads: int = 1, table: FloorTable | None = None) -> ScanResult:  # noqa: N803
    """Exact min over n of max_i ||sum_j a_ij floor(f_j(n))||."""
    index_set = IndexSet.coerce(index_set)
    rows, a_hi, a_lo = _matrix_frac(A)
    ell, k = a_hi.shape
    if k != len(f_list):
        raise ValueError("A needs one column per function")
    if ell > 4 or k > 4:
        raise ValueError("at most 4 rows and 4 functions")
    table = table or FloorTable(f_list)
    table.ensure(N)
    floors = table.floors
    valid = table.valid(index_set)
    parts = chunk_bounds(0, int(N), CHUNK)
    res = map_ordered(lambda a, b: kernels.segment_min_multi(floors, valid, a_hi, a_lo, a, b),
                      parts, threads)
    num, idx = _segment_reduce(res)
    if idx < 0:
        raise ValueError(f"no admissible n <= {N} in {index_set.value}")
    return ScanResult(int(N), rows, idx + 1, num, index_set, table.ambiguous(int(N), index_set))


# ---------------------------------------------------------------- divisibility

def _scaled(f: PseudoPolynomial, m: int, shift: Fraction = Fraction(0)) -> PseudoPolynomial:
    alpha = tuple(a / m for a in f.alpha)
    poly = [c / m for c in f.poly] or [Fraction(0)]
    poly[-1] -= shift
    if not any(poly) and not alpha:
        poly = [Fraction(0)]
    return PseudoPolynomial(alpha, f.theta, tuple(poly))


def _fraction_criterion(f: PseudoPolynomial, ns: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """{f(n)/m} < 1/m, read off as floor(f/m) - floor(f/m - 1/m) == 1."""
    g = floor_many(_scaled(f, m), ns)
    g_shift = floor_many(_scaled(f, m, Fraction(1, m)), ns)
    return (g.floors - g_shift.floors) == 1, g.ok & g_shift.ok


def multiples_criteria(f: PseudoPolynomial, ns, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both divisibility tests for each n: (fractional-part test, residue test, certified mask)."""
    if m < 2:
        raise ValueError("m must be >= 2")
    ns = np.asarray(ns, dtype=np.int64)
    frac_test, ok1 = _fraction_criterion(f, ns, m)
    batch = floor_many(f, ns)
    return frac_test, batch.floors % m == 0, ok1 & batch.ok


def multiples_count(f: PseudoPolynomial, X: int, m: int, index_set="AllIntegers") -> int:  # noqa: N803
    """Number of n <= X in the index set with m | floor(f(n)); both criteria must agree."""
    index_set = IndexSet.coerce(index_set)
    X = int(X)  # noqa: N806
    if m < 2:
        raise ValueError("m must be >= 2")
    if X < 1:
        return 0
    ns = np.arange(1, X + 1, dtype=np.int64)
    if index_set is IndexSet.Primes:
        ns = ns[prime_mask(X)[1:]] if X >= 2 else ns[:0]
    a, b, ok = multiples_criteria(f, ns, m)
    if np.any(a[ok] != b[ok]):
        bad = int(ns[ok][np.flatnonzero(a[ok] != b[ok])[0]])
        raise ArithmeticError(f"divisibility criteria disagree at n = {bad}")
    skipped = int(np.count_nonzero(~ok))
    if skipped:
        log.warning("multiples_count skipped %d ambiguous floors", skipped)
    return int(np.count_nonzero(b & ok))


# ---------------------------------------------------------------- lattices

@dataclass(frozen=True)
class Lattice:
    """Lattice spanned by the columns of ``basis``."""

    basis: np.ndarray
    det: float
    dual_basis: np.ndarray
    exact_basis: tuple = field(repr=False, compare=False, default=())

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.basis))


def lattice_from_basis(basis) -> Lattice:
    exact = tuple(tuple(to_fraction(v) for v in row) for row in basis)
    b = np.array([[float(v) for v in row] for row in exact], dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("basis must be a square matrix")
    det = float(_fraction_det(exact))
    if abs(det) <= 1e-12:
        raise SingularBasis(f"|det| = {abs(det)!r} is too small")
    dual = np.linalg.inv(b).T
    return Lattice(b, det, dual, exact)


def _fraction_det(m) -> Fraction:
    rows = [list(r) for r in m]
    n, det = len(rows), Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            rows[col], rows[piv] = rows[piv], rows[col]
            det = -det
        det *= rows[col][col]
        for r in range(col + 1, n):
            factor = rows[r][col] / rows[col][col]
            rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
    return det


def _fraction_inverse(m: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _coordinate_map(lattice: Lattice, A) -> list[list[Fraction]]:  # noqa: N803
    """B^{-1} A computed exactly from the rational inputs."""
    binv = _fraction_inverse(lattice.exact_basis)
    a = [[to_fraction(v) for v in row] for row in A]
    if len(a) != lattice.dim:
        raise ValueError("A must have one row per lattice dimension")
    k = len(a[0])
    return [[sum(binv[i][t] * a[t][j] for t in range(lattice.dim)) for j in range(k)]
            for i in range(lattice.dim)]


def lattice_distance_sq(lattice: Lattice, A, v: Sequence[int]) -> Fraction:  # noqa: N803
    """Exact squared distance from A v to the lattice (box enumeration in coordinates)."""
    coords = _coordinate_map(lattice, A)
    c = [sum(row[j] * int(v[j]) for j in range(len(v))) for row in coords]
    frac = [x - math.floor(x) for x in c]
    radius = _search_radius(lattice)
    best = None
    for z in itertools.product(range(-radius, radius + 2), repeat=lattice.dim):
        u = [f - zi for f, zi in zip(frac, z)]
        y = [sum(lattice.exact_basis[i][j] * u[j] for j in range(lattice.dim)) for i in range(lattice.dim)]
        d = sum(t * t for t in y)
        if best is None or d < best:
            best = d
    return best


def _search_radius(lattice: Lattice) -> int:
    cond = lattice.condition
    if cond > 1e3:
        raise IllConditioned(f"basis condition number {cond:.3g} exceeds 1e3")
    radius = math.ceil(float(np.linalg.norm(np.linalg.inv(lattice.basis), 2)))
    if (2 * radius + 2) ** lattice.dim > 20000:
        raise IllConditioned("unit ball spans too many fundamental cells to enumerate")
    return radius


def lattice_experiment(f_list: Sequence[PseudoPolynomial], A, lattice: Lattice, N: int,
                       block: int = 4096) -> int | None:  # noqa: N803
    """Smallest n <= N with A (floor f_1(n), ..., floor f_k(n)) strictly inside Lambda + unit ball.

    Coordinates in the lattice basis are reduced mod 1 exactly; all lattice
    points whose cell can meet the unit ball are enumerated, and borderline
    distances are settled in exact rational arithmetic.
    """
    if lattice.dim > 3:
        raise ValueError("lattice dimension must be <= 3")
    coords = _coordinate_map(lattice, A)
    ell, k = len(coords), len(coords[0])
    if k != len(f_list):
        raise ValueError("A needs one column per function")
    radius = _search_radius(lattice)
    # fractional parts of the coordinate map, integer parts drop out mod the lattice
    cnum = [[Frac128.from_real(x - math.floor(x)).num for x in row] for row in coords]
    offsets = np.array(list(itertools.product(range(-radius, radius + 2), repeat=ell)), dtype=np.float64)
    table = FloorTable(f_list)
    table.ensure(N)
    for start in range(0, int(N), block):
        stop = min(start + block, int(N))
        fl = table.floors[:, start:stop].astype(object)
        frac = np.empty((ell, stop - start))
        for i in range(ell):
            acc = sum(cnum[i][j] * fl[j] for j in range(k)) % ONE
            frac[i] = np.array([float(int(x)) / ONE for x in acc])
        u = frac[None, :, :] - offsets[:, :, None]
        y = np.einsum("ij,ojn->oin", lattice.basis, u)
        d2 = np.min(np.sum(y * y, axis=1), axis=0)
        cand = np.flatnonzero((d2 < 1 + 1e-9) & table.ok[start:stop])
        for i in cand:
            n = start + int(i) + 1
            if d2[i] < 1 - 1e-9:
                return n
            v = [int(table.floors[j, n - 1]) for j in range(k)]
            if lattice_distance_sq(lattice, A, v) < 1:
                return n
    return None


# ---------------------------------------------------------------- fitting

def fit_exponent(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares fit of value ~ C * N**(-eta); returns (eta, C, max |log residual|)."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 2:
        raise DegenerateInput("need at least two points")
    if any(v <= 0 for _, v in pts):
        raise DegenerateInput("values must be positive; an exact hit (value 0) cannot be fitted")
    if len({n for n, _ in pts}) < 2:
        raise DegenerateInput("need at least two distinct N")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    design = np.vstack([np.ones_like(x), -x]).T
    (log_c, eta), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.max(np.abs(design @ np.array([log_c, eta]) - y)))
    return float(eta), float(math.exp(log_c)), resid
