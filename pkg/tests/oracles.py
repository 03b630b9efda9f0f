"""Independent reference implementations used by the tests."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import mpmath

from heilbronnlab.core import PseudoPolynomial

ORACLE_BITS = 256


def floor_oracle(f: PseudoPolynomial, n: int) -> int:
    """floor(f(n)) from a 256-bit mpmath evaluation.

    Values within 2**-200 of an integer are taken to be that integer; with the
    small rational inputs used here such values are exact integers.
    """
    with mpmath.workprec(ORACLE_BITS):
        x = mpmath.mpf(n)
        total = mpmath.mpf(0)
        for a, t in zip(f.alpha, f.theta):
            total += mpmath.mpf(a.numerator) / a.denominator * mpmath.power(x, mpmath.mpf(t.numerator) / t.denominator)
        k = len(f.poly) - 1
        for i, c in enumerate(f.poly):
            total += mpmath.mpf(c.numerator) / c.denominator * x ** (k - i)
        nearest = mpmath.nint(total)
        if abs(total - nearest) < mpmath.mpf(2) ** -200:
            return int(nearest)
        return int(mpmath.floor(total))


def random_pseudo(rng: random.Random, max_theta: int = 4, max_poly: int = 3) -> PseudoPolynomial:
    """A random pseudo-polynomial with small rational data and f(10**4) well below 2**63."""
    r = rng.randint(1, 3)
    thetas = set()
    while len(thetas) < r:
        q = rng.randint(2, 9)
        p = rng.randint(q + 1, max_theta * q - 1)
        t = Fraction(p, q)
        if t.denominator != 1:
            thetas.add(t)
    thetas = sorted(thetas)
    alpha = [Fraction(rng.choice([-1, 1]) * rng.randint(1, 99), rng.choice([1, 10, 100, 7, 3])) for _ in thetas]
    k = rng.randint(0, max_poly)
    poly = [Fraction(rng.randint(-20, 20), rng.choice([1, 2, 5])) for _ in range(k + 1)]
    return PseudoPolynomial(tuple(alpha), tuple(thetas), tuple(poly))


def d_s_brute(n: int, s: int) -> int:
    """Ordered s-tuples with product n by nested divisor loops."""
    if s == 1:
        return 1
    return sum(d_s_brute(n // d, s - 1) for d in range(1, n + 1) if n % d == 0)


def is_prime_trial(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, math.isqrt(n) + 1))


def frac_dist(q: Fraction) -> Fraction:
    r = q - math.floor(q)
    return min(r, 1 - r)
