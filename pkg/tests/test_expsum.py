import cmath
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heilbronnlab.core import parse
from heilbronnlab.errors import (ConstraintViolated, HypothesisViolated, IndexOutOfRange,
                                 InvalidCase)
from heilbronnlab.expsum import (DifferenceSpec, ExponentCase, direct_sum, e, forward_difference,
                                 geometric_sum, minima_sum, predicted_exponent, psi_correlate,
                                 vaughan_decompose, vaughan_params, vdc_bound, vdc_bound_terms,
                                 weyl_inequality_check)
from heilbronnlab.modarith import Frac128, RationalApprox, dirichlet_approx, mangoldt_table

from oracles import random_pseudo


class TestUnit:
    @pytest.mark.parametrize("x,expected", [(0, 1), (0.5, -1), (0.25, 1j), (0.75, -1j), (Frac128.from_real(0.125), cmath.exp(0.25j * math.pi))])
    def test_values(self, x, expected):
        assert abs(e(x) - expected) < 1e-15

    def test_accuracy(self):
        rng = random.Random(0)
        for _ in range(1000):
            x = rng.random()
            assert abs(e(x) - cmath.exp(2j * math.pi * x)) < 1e-15


class TestDirectSum:
    def test_full_period(self):
        assert abs(direct_sum(parse("x"), 0.25, 0, 4).value) < 1e-15

    def test_alternating(self):
        assert direct_sum(parse("x"), 0.5, 0, 3).value == pytest.approx(-1)

    def test_floor_mode_example(self):
        r = direct_sum(parse("x^2.5"), 0.5, 0, 4)
        assert r.value == pytest.approx(-2)
        assert r.terms == 4

    def test_continuous_mode_matches_float(self):
        f = parse("0.3*x^1.5 + x")
        r = direct_sum(f, 0.37, 0, 500, mode="continuous")
        ref = sum(cmath.exp(2j * math.pi * 0.37 * (0.3 * n ** 1.5 + n)) for n in range(1, 501))
        assert abs(r.value - ref) < 1e-9

    def test_weights_array_and_callable(self):
        f = parse("x^2.5")
        lam = mangoldt_table(300)
        a = direct_sum(f, 0.3, 0, 300, weights=lam[1:])
        b = direct_sum(f, 0.3, 0, 300, weights=lambda ns: lam[ns])
        assert a.value == b.value

    def test_weights_length_checked(self):
        with pytest.raises(ValueError):
            direct_sum(parse("x^2.5"), 0.3, 0, 10, weights=np.ones(3))

    def test_modulus_within_terms_plus_error(self):
        rng = random.Random(11)
        for _ in range(20):
            f = random_pseudo(rng, max_theta=3)
            r = direct_sum(f, rng.random(), 0, 2000)
            assert r.modulus <= r.terms + r.kahan_error_bound

    def test_thread_count_does_not_change_bits(self):
        f = parse("x^2.5 + x")
        a = direct_sum(f, Frac128.from_real(0.1234), 0, 300_000, threads=1)
        b = direct_sum(f, Frac128.from_real(0.1234), 0, 300_000, threads=8)
        assert a.value == b.value and a.csv_row() == b.csv_row()

    def test_big_beta_integer_part(self):
        f = parse("x^2.5 + x")
        # integer beta contributes nothing in floor mode
        a = direct_sum(f, 0.25, 0, 100)
        b = direct_sum(f, 7.25, 0, 100)
        assert abs(a.value - b.value) < 1e-12

    def test_csv_row(self):
        r = direct_sum(parse("x^2.5"), 0.5, 0, 4).with_prediction(4.0, ExponentCase.LargeInt)
        row = r.csv_row()
        assert row[0] == "LargeInt" and row[2] == "8" + "0" * 31
        assert float(row[-1]) == pytest.approx(0.5)


class TestGeometric:
    @pytest.mark.parametrize("alpha,n1,n2,value,bound", [(0.5, 0, 3, -1, 2), (0, 0, 5, 5, 5), (0.25, 0, 4, 0, 4)])
    def test_examples(self, alpha, n1, n2, value, bound):
        v, b = geometric_sum(alpha, n1, n2)
        assert abs(v - value) < 1e-12 and b == pytest.approx(bound)

    @settings(max_examples=300)
    @given(st.floats(min_value=0, max_value=1, allow_nan=False), st.integers(-500, 500), st.integers(1, 1000))
    def test_matches_direct(self, alpha, n1, length):
        v, b = geometric_sum(alpha, n1, n1 + length)
        xi = Frac128.from_real(alpha)
        direct = sum(e(Frac128((xi.num * n) % (1 << 128))) for n in range(n1 + 1, n1 + length + 1))
        assert abs(v - direct) < 1e-10
        assert abs(v) <= b + 1e-9

    def test_requires_increasing(self):
        with pytest.raises(ValueError):
            geometric_sum(0.1, 3, 3)


class TestDifferences:
    def test_square_single(self):
        assert forward_difference(lambda x: x * x, DifferenceSpec((1,)), 3) == 7

    def test_square_double(self):
        for x in range(-5, 5):
            assert forward_difference(lambda t: t * t, (2, 3), x) == 12

    def test_constant(self):
        assert forward_difference(lambda x: 5, (1, 2, 3), 0) == 0

    def test_zero_step_rejected(self):
        with pytest.raises(ValueError):
            DifferenceSpec((1, 0))

    @settings(max_examples=100)
    @given(st.integers(1, 5), st.lists(st.integers(-6, 6).filter(bool), min_size=1, max_size=5),
           st.fractions(min_value=-3, max_value=3, max_denominator=50), st.integers(-20, 20))
    def test_collapse(self, k, steps, lead, x):
        steps = steps[:k]
        coeffs = [lead] + [Fraction(i + 1, 3) for i in range(k)]

        def poly(t):
            acc = Fraction(0)
            for c in coeffs:
                acc = acc * t + c
            return acc

        value = forward_difference(poly, steps, x)
        if len(steps) == k:
            assert value == math.factorial(k) * math.prod(steps) * lead
        elif len(steps) > k:
            assert value == 0


class TestWeyl:
    def test_zero_phase(self):
        assert weyl_inequality_check(lambda n: 0, 0, 2, 2, 1) == (4.0, 4.0)

    def test_half_phase(self):
        lhs, rhs = weyl_inequality_check(lambda n: Fraction(n, 2), 0, 2, 2, 1)
        assert lhs < 1e-24 and rhs >= -1e-12

    def test_fast_matches_direct(self):
        rng = random.Random(2)
        for _ in range(20):
            f = random_pseudo(rng, max_theta=3)
            n = rng.randint(2, 12)
            ell = rng.randint(1, 3)
            fast = weyl_inequality_check(f, 0, n, n, ell, "fast")
            direct = weyl_inequality_check(f, 0, n, n, ell, "direct")
            assert fast[0] == direct[0]
            assert fast[1] == pytest.approx(direct[1], rel=1e-9, abs=1e-6)

    def test_direct_limits(self):
        with pytest.raises(ValueError):
            weyl_inequality_check(lambda n: 0, 0, 70, 70, 1, "direct")

    def test_random_cubic_phases(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            c = rng.random(4)
            lhs, rhs = weyl_inequality_check(lambda n: c[0] * n ** 3 + c[1] * n * n + c[2] * n, 0, 40, 40, 3)
            assert lhs <= rhs * (1 + 1e-6)


class TestMinima:
    def test_half(self):
        lhs, _ = minima_sum(0.5, 2, 10, RationalApprox(1, 2, 0.0))
        assert lhs == 12

    def test_zero(self):
        lhs, _ = minima_sum(0, 3, 5, RationalApprox(0, 1, 0.0))
        assert lhs == 15

    def test_golden_ratio_constant(self):
        phi = (1 + 5 ** 0.5) / 2
        approx = dirichlet_approx(phi, 50)
        lhs, rhs = minima_sum(phi, 50, 100, approx)
        assert lhs <= 4 * rhs

    def test_constant_stable_in_h(self):
        rng = random.Random(4)
        for _ in range(20):
            d = rng.choice([2, 3, 5, 6, 7, 10, 11, 13])
            alpha = (d ** 0.5) % 1
            ratios = []
            for H in (100, 1000, 10000):
                approx = dirichlet_approx(alpha, H)
                lhs, rhs = minima_sum(alpha, H, 100, approx)
                ratios.append(lhs / rhs)
            assert ratios[-1] <= 2 * ratios[0] + 0.1

    def test_hypothesis_checked(self):
        with pytest.raises(HypothesisViolated):
            minima_sum(0.9, 5, 5, RationalApprox(1, 3, 0.0))


class TestPredicted:
    def test_large_int(self):
        assert predicted_exponent("LargeInt", 1, theta_r=2.5) == pytest.approx(1 / 56)

    def test_medium_int(self):
        assert predicted_exponent("MediumInt", 3, rho=0.1) == pytest.approx(0.025)

    def test_corollary_large_c(self):
        assert predicted_exponent("CorollaryInt", 1, c=2.5) == pytest.approx(1 / 30)
        assert predicted_exponent("CorollaryPrime", 1, c=2.5) == pytest.approx(1 / 30)

    def test_corollary_small_c(self):
        assert predicted_exponent("CorollaryInt", 3, c=2.5) == pytest.approx(1 / (4 * 5))
        assert predicted_exponent("CorollaryPrime", 3, c=2.5) == pytest.approx(1 / (16 * 5))

    def test_large_prime(self):
        eta = predicted_exponent("LargePrime", 1, theta_r=2.5, rho=0.1)
        assert eta == pytest.approx(1 / (64 * 2 * 4 ** 5 - 8))

    def test_invalid(self):
        with pytest.raises(InvalidCase):
            predicted_exponent("MediumInt", 3, rho=0.2)
        with pytest.raises(InvalidCase):
            predicted_exponent("LargeInt", 1, theta_r=3)
        with pytest.raises(InvalidCase):
            predicted_exponent("CorollaryInt", 1)


class TestVdcBound:
    def test_third_term(self):
        x = 2.0 ** 20
        t1, t2, t3 = vdc_bound_terms(x, x * x, 0, 2)
        # K = 1, Q = 4 gives the root 1/(4KQ - 2K) = 1/14
        assert t3 == pytest.approx(x * (x ** -2) ** (1 / 14))
        assert vdc_bound(x, x * x, 0, 2) == pytest.approx(t1 + t2 + t3)

    def test_small_g_second_term_dominates(self):
        x = 2.0 ** 20
        t1, t2, t3 = vdc_bound_terms(x, 1, 1, 0)
        assert t2 >= t3

    def test_k_zero_first_term(self):
        assert vdc_bound_terms(1000.0, 1000.0, 0, 0)[0] == 1.0

    def test_guard(self):
        with pytest.raises(HypothesisViolated):
            vdc_bound(10.0, 1e4, 1, 1)


class TestVaughan:
    def test_large_x(self):
        p = vaughan_params(2 ** 61)
        assert p.ok and p.U == pytest.approx(2 ** 12.2 / 4)

    def test_2_40_records_violation(self):
        p = vaughan_params(2 ** 40, strict=False)
        assert p.U == pytest.approx(64)
        assert abs(p.Z - 2 ** 14) <= 0.5 and (p.Z - 0.5) % 1 == 0

    def test_1024_rejected(self):
        with pytest.raises(ConstraintViolated) as info:
            vaughan_params(1024)
        assert "U >= 3" in info.value.violated

    def test_decompose_strict_rejects_small(self):
        with pytest.raises(ConstraintViolated):
            vaughan_decompose(parse("x^2.5"), 0.3, 1000)

    def test_decompose_inequality(self):
        r = vaughan_decompose(parse("x^2.5"), 0.3, 1000, strict=False)
        assert r.holds
        assert r.params.violations

    def test_beta_zero_is_chebyshev(self):
        r = vaughan_decompose(parse("x^2.5"), 0, 1000, strict=False)
        lam = mangoldt_table(2000)
        assert r.S.value.real == pytest.approx(lam[1001:].sum())
        assert abs(r.S.value.imag) < 1e-9

    def test_thread_invariance(self):
        a = vaughan_decompose(parse("x^2.5"), 0.3, 2000, strict=False, threads=1)
        b = vaughan_decompose(parse("x^2.5"), 0.3, 2000, strict=False, threads=4)
        assert (a.S.value, a.S1.value, a.S2.value) == (b.S.value, b.S1.value, b.S2.value)


class TestPsi:
    def test_constant(self):
        assert psi_correlate([1.0] * 20, 2, [3, 4, 5]) == 1.0

    def test_single_shift(self):
        psi = [float(i + 1) for i in range(10)]
        assert psi_correlate(psi, 2, [3], s=1) == psi[2] * psi[5]

    def test_two_shifts(self):
        psi = [float(i + 1) for i in range(10)]
        assert psi_correlate(psi, 1, [2, 3]) == psi[1] * psi[3] * psi[4] * psi[6]

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            psi_correlate([1.0] * 5, 3, [4])
