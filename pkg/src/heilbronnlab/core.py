"""Pseudo-polynomials and certified evaluation of their integer parts.

A pseudo-polynomial is ``sum_j alpha_j x**theta_j + P(x)`` with non-integral
exponents ``theta_j > 1`` and an ordinary polynomial ``P``.  Coefficients and
exponents are kept as exact :class:`fractions.Fraction` values so the
non-integrality of each exponent is decidable.

Evaluation runs in double-double arithmetic with a conservative error radius.
When the radius does not separate ``f(n)`` from the nearest integer,
:func:`floor_exact` falls back to exact integer roots (``gmpy2.iroot``) or
directed-rounding MPFR bounds at increasing precision.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence

import gmpy2
import numpy as np

from . import _fallback as _dd
from ._backend import kernels
from .errors import AmbiguousFloor

log = logging.getLogger(__name__)

DEFAULT_TOL = 2.0 ** -80
INT64_LIMIT = 2 ** 63
MAX_REFINE_BITS = 8192
_U2 = 2.0 ** -106
_POW_REL = 2.0 ** -96
_EXACT_DOUBLE = 2 ** 53
_IROOT_BUDGET = 1 << 18


def to_fraction(value) -> Fraction:
    """Exact rational value of an int, float, Fraction or numeric string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(float(value))
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(num.strip()) / Fraction(den.strip())
        return Fraction(text)
    if hasattr(value, "as_integer_ratio"):
        return Fraction(*value.as_integer_ratio())
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def _round_up(x: float) -> float:
    return math.nextafter(x, math.inf) if x > 0 else (5e-324 if x == 0 else x)


def dd_from_fraction(q: Fraction) -> tuple[float, float, float]:
    """Double-double (hi, lo) nearest to q and a bound on the residual."""
    hi = float(q)
    lo = float(q - Fraction(hi))
    resid = abs(q - Fraction(hi) - Fraction(lo))
    rad = 0.0 if resid == 0 else _round_up(float(resid))
    return hi, lo, rad


def format_rational(q: Fraction) -> str:
    """Shortest exact text for q: a decimal when it terminates, else ``p/q``."""
    q = Fraction(q)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    if q.denominator == 1:
        return str(q.numerator)
    places = max(twos, fives)
    scaled = abs(q.numerator) * (10 ** places // q.denominator)
    digits = str(scaled).rjust(places + 1, "0")
    text = digits[:-places] + "." + digits[-places:]
    return ("-" if q < 0 else "") + text


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<x>x)|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"unexpected character {text[pos:pos + 1]!r} at column {pos + 1}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind or "token"
            raise ValueError(f"expected {want} at column {tok[2] + 1} in {self.text!r}")
        self.i += 1
        return tok

    def accept(self, value):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == value:
            self.i += 1
            return True
        return False

    def ratio(self) -> Fraction:
        q = Fraction(self.take("num")[1])
        if self.accept("/"):
            den = Fraction(self.take("num")[1])
            if den == 0:
                raise ValueError("division by zero in " + repr(self.text))
            q /= den
        return q

    def exponent(self) -> Fraction:
        if self.accept("("):
            q = self.ratio()
            self.take("op", ")")
            return q
        return self.ratio()

    def term(self) -> tuple[Fraction, Fraction]:
        coef = Fraction(1)
        tok = self.peek()
        if tok[0] == "num":
            coef = self.ratio()
            if not self.accept("*"):
                return coef, Fraction(0)
        self.take("x")
        power = Fraction(1)
        if self.accept("^") or self.accept("**"):
            power = self.exponent()
        return coef, power

    def expression(self) -> dict[Fraction, Fraction]:
        terms: dict[Fraction, Fraction] = {}
        sign = -1 if self.accept("-") else (self.accept("+") and 1) or 1
        while True:
            coef, power = self.term()
            terms[power] = terms.get(power, Fraction(0)) + sign * coef
            if self.accept("+"):
                sign = 1
            elif self.accept("-"):
                sign = -1
            else:
                break
        if self.peek()[0] is not None:
            raise ValueError(f"trailing input at column {self.peek()[2] + 1} in {self.text!r}")
        return terms


def parse_terms(text: str) -> dict[Fraction, Fraction]:
    """Parse ``0.5*x^2.5 + x^(7/3) - 3`` into ``{exponent: coefficient}``."""
    if not text or not text.strip():
        raise ValueError("empty pseudo-polynomial")
    return _Parser(text).expression()


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class PseudoPolynomial:
    """``sum_j alpha[j] * x**theta[j] + P(x)``, with ``poly`` listed highest degree first."""

    alpha: tuple = ()
    theta: tuple = ()
    poly: tuple = ()

    def __post_init__(self):
        alpha = tuple(to_fraction(a) for a in self.alpha)
        theta = tuple(to_fraction(t) for t in self.theta)
        poly = [to_fraction(c) for c in self.poly]
        while poly and poly[0] == 0:
            poly.pop(0)
        if len(alpha) != len(theta):
            raise ValueError("alpha and theta must have the same length")
        for t in theta:
            if t.denominator == 1:
                raise ValueError(f"exponent {t} is an integer; put it in the polynomial part")
            if t <= 1:
                raise ValueError(f"exponent {format_rational(t)} must exceed 1")
        if any(b <= a for a, b in zip(theta, theta[1:])):
            raise ValueError("exponents must be strictly increasing")
        if any(a == 0 for a in alpha):
            raise ValueError("pseudo coefficients must be nonzero")
        if not alpha and not poly:
            raise ValueError("the zero function is not a pseudo-polynomial")
        if len(alpha) > 64 or len(poly) > 64:
            raise ValueError("at most 64 pseudo terms and degree 63")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "poly", tuple(poly))

    @classmethod
    def parse(cls, text: str) -> "PseudoPolynomial":
        return cls.from_terms(parse_terms(text))

    @classmethod
    def from_terms(cls, terms: dict) -> "PseudoPolynomial":
        terms = {to_fraction(p): to_fraction(c) for p, c in terms.items()}
        pseudo = sorted((p, c) for p, c in terms.items() if p.denominator != 1 and c != 0)
        ints = {int(p): c for p, c in terms.items() if p.denominator == 1}
        if any(p < 0 for p in ints):
            raise ValueError("negative exponents are not supported")
        k = max(ints, default=0)
        poly = tuple(ints.get(i, Fraction(0)) for i in range(k, -1, -1))
        return cls(tuple(c for _, c in pseudo), tuple(p for p, _ in pseudo), poly)

    # -- structure

    @property
    def r(self) -> int:
        return len(self.alpha)

    @property
    def poly_degree(self) -> int:
        return max(len(self.poly) - 1, 0)

    @property
    def theta_r(self) -> Fraction | None:
        return self.theta[-1] if self.theta else None

    @property
    def degree(self) -> Fraction:
        k = Fraction(self.poly_degree)
        return max(self.theta_r, k) if self.theta else k

    @property
    def degree_case(self) -> str:
        """``"pseudo"`` when the top non-integral exponent dominates, else ``"polynomial"``."""
        if self.theta and self.theta_r > self.poly_degree:
            return "pseudo"
        return "polynomial"

    def terms(self) -> dict[Fraction, Fraction]:
        out = {t: a for a, t in zip(self.alpha, self.theta)}
        k = len(self.poly) - 1
        for i, c in enumerate(self.poly):
            if c != 0:
                out[Fraction(k - i)] = c
        return out

    @cached_property
    def text(self) -> str:
        parts = []
        for power, coef in sorted(self.terms().items(), reverse=True):
            mag = abs(coef)
            if power == 0:
                body = format_rational(mag)
            else:
                xpart = "x" if power == 1 else f"x^{format_rational(power)}"
                body = xpart if mag == 1 else f"{format_rational(mag)}*{xpart}"
            if not parts:
                parts.append(("-" if coef < 0 else "") + body)
            else:
                parts.append(("- " if coef < 0 else "+ ") + body)
        return " ".join(parts) if parts else "0"

    def __str__(self):
        return self.text

    @cached_property
    def packed(self) -> tuple:
        """Flat double-double coefficient tuple consumed by the kernels."""
        a = [dd_from_fraction(q) for q in self.alpha]
        t = [dd_from_fraction(q) for q in self.theta]
        c = [dd_from_fraction(q) for q in self.poly]
        cols = lambda rows, j: tuple(row[j] for row in rows)  # noqa: E731
        return (cols(a, 0), cols(a, 1), cols(a, 2),
                cols(t, 0), cols(t, 1), cols(t, 2),
                cols(c, 0), cols(c, 1), cols(c, 2))

    def magnitude_bound(self, x: float) -> float:
        """Cheap upper bound on |f(y)| for 1 <= y <= x."""
        total = sum(abs(float(a)) * x ** float(t) for a, t in zip(self.alpha, self.theta))
        k = len(self.poly) - 1
        total += sum(abs(float(c)) * x ** (k - i) for i, c in enumerate(self.poly))
        return total * (1 + 1e-12)

    def __call__(self, x) -> float:
        v = evaluate(self, x)
        return v.hi + v.lo


@dataclass(frozen=True)
class HPReal:
    """A double-double value ``hi + lo`` with a certified error radius."""

    hi: float
    lo: float = 0.0
    rad: float = 0.0

    @classmethod
    def from_value(cls, value) -> "HPReal":
        if isinstance(value, HPReal):
            return value
        if isinstance(value, float):
            return cls(value, 0.0, 0.0)
        return cls(*dd_from_fraction(to_fraction(value)))

    def __float__(self):
        return self.hi + self.lo

    def contains(self, value) -> bool:
        q = to_fraction(value)
        return abs(q - Fraction(self.hi) - Fraction(self.lo)) <= Fraction(self.rad)

    def __add__(self, other):
        other = HPReal.from_value(other)
        hi, lo = _dd.dd_add(self.hi, self.lo, other.hi, other.lo)
        rad = self.rad + other.rad + 4.0 * _U2 * (abs(self.hi) + abs(other.hi))
        return HPReal(hi, lo, _round_up(rad) if rad else 0.0)

    __radd__ = __add__

    def __neg__(self):
        return HPReal(-self.hi, -self.lo, self.rad)

    def __sub__(self, other):
        return self + (-HPReal.from_value(other))

    def __rsub__(self, other):
        return HPReal.from_value(other) + (-self)

    def __mul__(self, other):
        other = HPReal.from_value(other)
        hi, lo = _dd.dd_mul(self.hi, self.lo, other.hi, other.lo)
        rad = (abs(self.hi) * other.rad + abs(other.hi) * self.rad + self.rad * other.rad
               + 8.0 * _U2 * abs(hi))
        return HPReal(hi, lo, _round_up(rad) if rad else 0.0)

    __rmul__ = __mul__

    def __pow__(self, exponent):
        """``self ** exponent`` for a positive base, via exp(exponent * ln self)."""
        if self.hi <= 0:
            raise ValueError("power of a non-positive base")
        t = HPReal.from_value(exponent)
        lnh, lnl = kernels.dd_log(self.hi, self.lo)
        eh, el = _dd.dd_mul(t.hi, t.lo, lnh, lnl)
        yh, yl = kernels.dd_exp(eh, el)
        rel = (_POW_REL * (1.0 + abs(eh)) + abs(lnh) * t.rad
               + abs(t.hi) * self.rad / abs(self.hi))
        return HPReal(yh, yl, _round_up(abs(yh) * rel * 1.0625))


# ---------------------------------------------------------------- evaluation

def _dd_of_int(n: int) -> tuple[float, float]:
    hi = float(n)
    return hi, float(n - int(hi))


def evaluate(f: PseudoPolynomial, x) -> HPReal:
    """f(x) as a double-double with a certified error radius (x >= 1)."""
    if isinstance(x, HPReal):
        xh, xl, xr = x.hi, x.lo, x.rad
    elif isinstance(x, (int, np.integer)):
        xh, xl = _dd_of_int(int(x))
        xr = 0.0
    else:
        xh, xl, xr = dd_from_fraction(to_fraction(x))
    if f.r and xh - xr < 1.0:
        raise ValueError("pseudo-polynomials are evaluated for x >= 1")
    hi, lo, rad = kernels.eval_dd(f.packed, xh, xl, xr)
    return HPReal(hi, lo, rad)


eval = evaluate  # noqa: A001  (operation name used throughout the docs)


def _split_floor(hi: float, lo: float) -> tuple[int, float]:
    f = math.floor(hi)
    rem = (hi - f) + lo
    # adjust in integers: above 2**53 the double f +- 1 would round
    k = math.floor(rem)
    return f + k, rem - k


def _power_bounds(n: int, theta: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Rigorous lower and upper bounds for n**theta (n >= 1, theta > 0)."""
    if n == 1:
        return Fraction(1), Fraction(1)
    p, q = theta.numerator, theta.denominator
    if q <= 64 and p * n.bit_length() + bits * q <= _IROOT_BUDGET:
        root, exact = gmpy2.iroot(gmpy2.mpz(n) ** p << (bits * q), q)
        lo = Fraction(int(root), 1 << bits)
        return lo, (lo if exact else lo + Fraction(1, 1 << bits))
    prec = bits + 64
    with gmpy2.context(precision=prec, round=gmpy2.RoundDown):
        lo = gmpy2.exp(gmpy2.mul(gmpy2.div(p, q), gmpy2.log(n)))
    with gmpy2.context(precision=prec, round=gmpy2.RoundUp):
        hi = gmpy2.exp(gmpy2.mul(gmpy2.div(p, q), gmpy2.log(n)))
    return Fraction(*lo.as_integer_ratio()), Fraction(*hi.as_integer_ratio())


def exact_interval(f: PseudoPolynomial, n: int, bits: int = 128) -> tuple[Fraction, Fraction]:
    """Closed rational interval containing f(n), of width about 2**-bits * |f(n)|."""
    n = int(n)
    k = len(f.poly) - 1
    poly = sum((c * n ** (k - i) for i, c in enumerate(f.poly)), Fraction(0))
    lo = hi = poly
    for a, t in zip(f.alpha, f.theta):
        plo, phi = _power_bounds(n, t, bits)
        if a > 0:
            lo += a * plo
            hi += a * phi
        else:
            lo += a * phi
            hi += a * plo
    return lo, hi


def refine_floor(f: PseudoPolynomial, n: int, max_bits: int = MAX_REFINE_BITS) -> int:
    """Certified floor of f(n) by exact bounds at doubling precision."""
    bits = 128
    while bits <= max_bits:
        lo, hi = exact_interval(f, n, bits)
        if math.floor(lo) == math.floor(hi):
            return math.floor(lo)
        bits *= 2
    raise AmbiguousFloor(n, lo, hi)


def _check_range(f: PseudoPolynomial, n_max: int):
    if f.magnitude_bound(float(n_max)) >= INT64_LIMIT:
        raise ValueError(f"f({n_max}) does not fit in a signed 64-bit integer")


def floor_exact(f: PseudoPolynomial, n: int, ambiguity_tol: float = DEFAULT_TOL,
                refine: bool = True) -> int:
    """Certified floor of f(n).

    The double-double value is trusted when its error radius plus
    ``ambiguity_tol`` stays clear of the nearest integer.  Otherwise the floor is
    recomputed from exact bounds (``refine=True``) or :class:`AmbiguousFloor`
    is raised.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_range(f, n)
    v = evaluate(f, n)
    fl, rem = _split_floor(v.hi, v.lo)
    slack = v.rad + ambiguity_tol + 2.2e-16
    if slack < rem < 1.0 - slack:
        return fl
    if not refine:
        raise AmbiguousFloor(n, Fraction(v.hi) - Fraction(v.rad), Fraction(v.hi) + Fraction(v.rad))
    return refine_floor(f, n)


class FloorBatch(NamedTuple):
    floors: np.ndarray      # int64
    rems: np.ndarray        # float64 fractional parts (double precision)
    ok: np.ndarray          # bool, False where the floor could not be certified
    refined: int            # entries settled by exact refinement
    unresolved: int         # entries left ambiguous (ok == False)


def floor_many(f: PseudoPolynomial, ns, ambiguity_tol: float = DEFAULT_TOL,
               refine: bool = True) -> FloorBatch:
    """Vectorised :func:`floor_exact`; ambiguous entries are refined or masked out."""
    ns = np.ascontiguousarray(ns, dtype=np.int64)
    if ns.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return FloorBatch(empty, np.zeros(0), np.zeros(0, dtype=bool), 0, 0)
    if ns.min() < 1:
        raise ValueError("n must be >= 1")
    n_max = int(ns.max())
    _check_range(f, n_max)
    if n_max > _EXACT_DOUBLE:
        floors = np.array([floor_exact(f, int(n), ambiguity_tol) for n in ns], dtype=np.int64)
        rems = np.array([float(evaluate(f, int(n)).hi - fl) for n, fl in zip(ns, floors)])
        return FloorBatch(floors, rems, np.ones(ns.size, dtype=bool), 0, 0)
    floors, rems, amb = kernels.floor_batch(f.packed, ns, ambiguity_tol)
    ok = np.ones(ns.size, dtype=bool)
    refined = unresolved = 0
    for i in np.flatnonzero(amb):
        n = int(ns[i])
        if not refine:
            ok[i] = False
            unresolved += 1
            continue
        try:
            fl = refine_floor(f, n)
        except AmbiguousFloor:
            log.warning("skipping n=%d: floor of %s is ambiguous", n, f.text)
            ok[i] = False
            unresolved += 1
            continue
        rems[i] += float(int(floors[i]) - fl)
        floors[i] = fl
        refined += 1
    return FloorBatch(floors, rems, ok, refined, unresolved)


def degree(f: PseudoPolynomial) -> Fraction:
    """max(theta_r, k); see :attr:`PseudoPolynomial.degree_case` for which one wins."""
    return f.degree


def rho_max(f: PseudoPolynomial) -> Fraction:
    """Strict upper limit 1/(floor(deg f) + 3) for the exponent-sum parameter rho."""
    return Fraction(1, math.floor(f.degree) + 3)


def parse(text: str) -> PseudoPolynomial:
    return PseudoPolynomial.parse(text)
