"""Exact arithmetic modulo 1, rational approximation and arithmetic functions."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import to_fraction
from .errors import HypothesisViolated, NoAdmissibleDenominator

ONE = 1 << 128
MASK64 = (1 << 64) - 1
_HALF = 1 << 127


@dataclass(frozen=True)
class Frac128:
    """A number in [0, 1) stored as ``num / 2**128``.

    ``qerr`` records |x - num/2**128| for values converted from reals; it is
    not part of equality.
    """

    num: int
    qerr: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not 0 <= self.num < ONE:
            object.__setattr__(self, "num", self.num % ONE)

    @classmethod
    def from_real(cls, x) -> "Frac128":
        """Round x mod 1 to the nearest multiple of 2**-128."""
        if isinstance(x, Frac128):
            return x
        q = to_fraction(x)
        q -= math.floor(q)
        num = round(q * ONE)
        err = abs(q - Fraction(num, ONE))
        return cls(num % ONE, float(err))

    @classmethod
    def from_hex(cls, text: str) -> "Frac128":
        text = text.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if not text or len(text) > 32:
            raise ValueError(f"expected up to 32 hex digits, got {text!r}")
        return cls(int(text, 16))

    @classmethod
    def from_parts(cls, hi: int, lo: int) -> "Frac128":
        return cls((int(hi) << 64) | int(lo))

    @property
    def hex(self) -> str:
        return f"{self.num:032x}"

    @property
    def hi(self) -> int:
        return self.num >> 64

    @property
    def lo(self) -> int:
        return self.num & MASK64

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, ONE)

    def __float__(self):
        return self.num / ONE

    def __add__(self, other):
        return Frac128((self.num + Frac128.from_real(other).num) % ONE)

    def __sub__(self, other):
        return Frac128((self.num - Frac128.from_real(other).num) % ONE)

    def __neg__(self):
        return Frac128((-self.num) % ONE)

    def __repr__(self):
        return f"Frac128(0x{self.hex})"


def mul_int_mod1(xi: Frac128, m: int) -> Frac128:
    """Exact fractional part of m * xi."""
    m = int(m)
    if m < 0:
        raise ValueError("m must be >= 0")
    return Frac128((xi.num * m) % ONE)


def dist_num(num: int) -> int:
    """Distance to the nearest integer, as a numerator over 2**128."""
    num %= ONE
    return num if num <= _HALF else ONE - num


def dist_to_Z(x) -> float:  # noqa: N802
    """||x||, the distance from x to the nearest integer."""
    if isinstance(x, Frac128):
        return dist_num(x.num) / ONE
    q = to_fraction(x)
    r = q - math.floor(q)
    return float(min(r, 1 - r))


@dataclass(frozen=True)
class RationalApprox:
    a: int
    b: int
    err: float

    def __post_init__(self):
        if self.b < 1 or math.gcd(self.a, self.b) != 1:
            raise ValueError(f"invalid reduced fraction {self.a}/{self.b}")


def convergents(q: Fraction, limit: int | None = None):
    """Yield continued-fraction convergents (p, q) of a rational, in order."""
    num, den = q.numerator, q.denominator
    p0, q0, p1, q1 = 0, 1, 1, 0
    while den:
        a, rem = divmod(num, den)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        if limit is not None and q1 > limit:
            return
        yield p1, q1
        num, den = den, rem


def _approx(x: Fraction, a: int, b: int) -> RationalApprox:
    return RationalApprox(a, b, float(abs(x - Fraction(a, b))))


def dirichlet_approx(xi, Bmax: int) -> RationalApprox:  # noqa: N803
    """Best convergent a/b of xi with b <= Bmax; |xi - a/b| <= 1/(b(Bmax+1))."""
    Bmax = int(Bmax)
    if Bmax < 1:
        raise ValueError("Bmax must be >= 1")
    x = Frac128(xi.num).as_fraction() if isinstance(xi, Frac128) else to_fraction(xi)
    best = (math.floor(x), 1)
    for p, q in convergents(x, Bmax):
        best = (p, q)
    return _approx(x, *best)


def medium_range_approx(xialpha, N, k: int, rho, theta_r=None) -> RationalApprox:  # noqa: N803
    """Coprime a/b with |xialpha - a/b| <= 1/b**2 and N**(2 rho) <= b <= N**(k - 2 rho)."""
    k = int(k)
    rho = float(rho)
    N = float(N)
    if k < 2:
        raise HypothesisViolated("k must be >= 2")
    if not 0 < rho < 1 / (k + 3):
        raise HypothesisViolated(f"rho must satisfy 0 < rho < 1/(k+3) = {1 / (k + 3)!r}")
    x = to_fraction(xialpha)
    mag = abs(float(x))
    if not mag > N ** (3 * rho - k):
        raise HypothesisViolated(f"|xi alpha| = {mag!r} is not above N^(3 rho - k)")
    if theta_r is not None and mag > N ** (rho - float(theta_r)):
        raise HypothesisViolated(f"|xi alpha| = {mag!r} exceeds N^(rho - theta_r)")
    lo = N ** (2 * rho)
    hi = N ** (k - 2 * rho)
    d = dirichlet_approx(x, max(1, math.floor(hi)))
    if d.b >= lo:
        return d
    for p, q in convergents(x, math.floor(hi)):
        if q >= lo:
            return _approx(x, p, q)
    raise NoAdmissibleDenominator(
        f"no convergent of {float(x)!r} has a denominator in [{lo!r}, {hi!r}]; N is below the range"
        " where such a denominator is guaranteed"
    )


# ---------------------------------------------------------------- primes

_SEGMENT = 1 << 18


def _small_primes(n: int) -> np.ndarray:
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p:: p] = False
    return np.flatnonzero(sieve)


def primes_upto(N: int, cache: str | Path | None = None) -> np.ndarray:  # noqa: N803
    """All primes <= N in ascending order (segmented sieve of Eratosthenes)."""
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    if cache is not None:
        path = Path(cache)
        if path.exists():
            limit, primes = read_prime_table(path)
            if limit >= N:
                return primes[: np.searchsorted(primes, N, side="right")]
    base = _small_primes(math.isqrt(N))
    chunks = [base[base <= N]]
    lo = math.isqrt(N) + 1
    while lo <= N:
        hi = min(lo + _SEGMENT, N + 1)
        seg = np.ones(hi - lo, dtype=bool)
        for p in base:
            start = max(p * p, -(-lo // p) * p)
            if start >= hi:
                continue
            seg[start - lo:: p] = False
        chunks.append(np.flatnonzero(seg) + lo)
        lo = hi
    primes = np.concatenate(chunks).astype(np.int64)
    if cache is not None:
        write_prime_table(cache, N, primes)
    return primes


PRIMETAB_MAGIC = b"PRIMETAB1"
_HEADER = struct.Struct("<9s7xqq")


def write_prime_table(path, limit: int, primes) -> None:
    """Binary table: magic, 7 pad bytes, limit and count as int64 LE, then the primes."""
    primes = np.asarray(primes, dtype="<i8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PRIMETAB_MAGIC, int(limit), primes.size))
        fh.write(primes.tobytes())


def read_prime_table(path) -> tuple[int, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated prime table")
    magic, limit, count = _HEADER.unpack_from(data)
    if magic != PRIMETAB_MAGIC:
        raise ValueError(f"{path}: not a PRIMETAB1 file")
    body = np.frombuffer(data, dtype="<i8", offset=_HEADER.size)
    if body.size != count:
        raise ValueError(f"{path}: expected {count} primes, found {body.size}")
    return limit, body.astype(np.int64)


def prime_mask(N: int) -> np.ndarray:  # noqa: N803
    """Boolean array m with m[n] True iff n is prime, for 0 <= n <= N."""
    mask = np.zeros(N + 1, dtype=bool)
    if N >= 2:
        mask[primes_upto(N)] = True
    return mask


def factorize(n: int) -> list[tuple[int, int]]:
    """Prime factorisation by trial division (fine for n <= 1e9)."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    for p in (2, 3):
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
    p = 5
    step = 2
    while p * p <= n:
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        p += step
        step = 6 - step
    if n > 1:
        out.append((n, 1))
    return out


def mangoldt(n: int) -> float:
    """log p if n is a power of the prime p, else 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0.0
    fac = factorize(n)
    return math.log(fac[0][0]) if len(fac) == 1 else 0.0


def mangoldt_table(N: int) -> np.ndarray:  # noqa: N803
    """Lambda(n) for 0 <= n <= N (index 0 unused)."""
    lam = np.zeros(N + 1)
    if N < 2:
        return lam
    for p in primes_upto(N):
        p = int(p)
        lp = math.log(p)
        q = p
        while q <= N:
            lam[q] = lp
            q *= p
    return lam


def divisor_s(n: int, s: int) -> int:
    """Number of ordered s-tuples of positive integers with product n."""
    if n < 1 or s < 1:
        raise ValueError("need n >= 1 and s >= 1")
    out = 1
    for _, e in factorize(n):
        out *= math.comb(e + s - 1, s - 1)
    return out


def divisor_table(N: int, s: int) -> np.ndarray:  # noqa: N803
    """d_s(n) for 0 <= n <= N via repeated Dirichlet convolution with 1."""
    d = np.zeros(N + 1, dtype=np.int64)
    d[1:] = 1
    for _ in range(s - 1):
        nxt = np.zeros(N + 1, dtype=np.int64)
        for m in range(1, N + 1):
            nxt[m::m] += d[m]
        d = nxt
    return d


def mobius_table(N: int) -> np.ndarray:  # noqa: N803
    mu = np.ones(N + 1, dtype=np.int64)
    mu[0] = 0
    if N >= 2:
        for p in primes_upto(N):
            p = int(p)
            mu[p::p] *= -1
            mu[p * p:: p * p] = 0
    return mu


class IntersectiveRow(NamedTuple):
    q: int
    ok: bool
    witness: int | None


def _poly_mod(coeffs: Sequence[int], n: np.ndarray, q: int) -> np.ndarray:
    acc = np.zeros_like(n)
    for c in coeffs:
        acc = (acc * n + int(c) % q) % q
    return acc


def intersective_check(polys: Sequence[Sequence[int]], Qmax: int) -> list[IntersectiveRow]:  # noqa: N803
    """For each q <= Qmax, the least n in [0, q) with every h_i(n) = 0 mod q.

    Polynomials are integer coefficient lists, highest degree first.
    """
    if Qmax < 1:
        raise ValueError("Qmax must be >= 1")
    rows = []
    for q in range(1, int(Qmax) + 1):
        n = np.arange(q, dtype=object if q > 3_000_000_000 else np.int64)
        good = np.ones(q, dtype=bool)
        for h in polys:
            good &= _poly_mod(h, n, q) == 0
        hits = np.flatnonzero(good)
        rows.append(IntersectiveRow(q, bool(hits.size), int(hits[0]) if hits.size else None))
    return rows
