import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heilbronnlab.errors import HypothesisViolated, NoAdmissibleDenominator
from heilbronnlab.modarith import (ONE, Frac128, RationalApprox, convergents, dirichlet_approx,
                                   dist_to_Z, divisor_s, divisor_table, factorize,
                                   intersective_check, mangoldt, mangoldt_table,
                                   medium_range_approx, mobius_table, mul_int_mod1, prime_mask,
                                   primes_upto, read_prime_table, write_prime_table)

from oracles import d_s_brute, frac_dist, is_prime_trial

GOLDEN = (1 + 5 ** 0.5) / 2


class TestFrac128:
    def test_from_real_reduces_mod_one(self):
        assert Frac128.from_real(2.75) == Frac128.from_real(0.75) == Frac128.from_real(-0.25)

    def test_quantization_error_recorded(self):
        x = Frac128.from_real(Fraction(1, 3))
        assert 0 < x.qerr <= 2.0 ** -129
        assert Frac128.from_real(0.5).qerr == 0

    def test_hex_roundtrip(self):
        x = Frac128.from_real(Fraction(1, 7))
        assert Frac128.from_hex(x.hex) == x
        assert len(x.hex) == 32
        assert Frac128.from_parts(x.hi, x.lo) == x

    def test_bad_hex(self):
        with pytest.raises(ValueError):
            Frac128.from_hex("1" * 33)

    def test_addition_wraps(self):
        assert Frac128.from_real(0.75) + 0.5 == Frac128.from_real(0.25)
        assert -Frac128.from_real(0.25) == Frac128.from_real(0.75)


class TestMulMod1:
    @pytest.mark.parametrize("xi,m,expected", [(0.5, 3, 0.5), (0.25, 4, 0.0)])
    def test_examples(self, xi, m, expected):
        assert float(mul_int_mod1(Frac128.from_real(xi), m)) == expected

    def test_third_times_three(self):
        r = mul_int_mod1(Frac128.from_real(Fraction(1, 3)), 3)
        assert dist_to_Z(r) <= 3 * 2.0 ** -128

    def test_negative_multiplier_rejected(self):
        with pytest.raises(ValueError):
            mul_int_mod1(Frac128(1), -1)

    @settings(max_examples=300)
    @given(st.integers(min_value=0, max_value=100), st.integers(min_value=0), st.integers(min_value=0, max_value=2 ** 63 - 1))
    def test_dyadic_oracle(self, j, a, m):
        xi = Fraction(a % (1 << j), 1 << j)
        expected = (xi * m) - math.floor(xi * m)
        assert mul_int_mod1(Frac128.from_real(xi), m).as_fraction() == expected


@pytest.mark.parametrize("x,expected", [(0.75, 0.25), (0.0, 0.0), (0.5, 0.5), (Frac128.from_real(0.9), 0.1)])
def test_dist_to_z(x, expected):
    assert dist_to_Z(x) == pytest.approx(expected, abs=1e-15)


class TestDirichlet:
    def test_sqrt2(self):
        r = dirichlet_approx(Fraction(2 ** 0.5), 5)
        assert (r.a, r.b) == (7, 5)

    def test_exact_half(self):
        r = dirichlet_approx(0.5, 10)
        assert (r.a, r.b, r.err) == (1, 2, 0.0)

    def test_zero(self):
        r = dirichlet_approx(0, 3)
        assert (r.a, r.b) == (0, 1)

    @settings(max_examples=200)
    @given(st.fractions(min_value=-50, max_value=50, max_denominator=10 ** 12), st.integers(min_value=1, max_value=10 ** 6))
    def test_dirichlet_bound(self, xi, bmax):
        r = dirichlet_approx(xi, bmax)
        assert 1 <= r.b <= bmax
        assert frac_dist(r.b * xi) <= Fraction(1, bmax + 1)

    def test_invalid_approx(self):
        with pytest.raises(ValueError):
            RationalApprox(2, 4, 0.0)

    def test_convergents_of_rational_end_at_value(self):
        assert list(convergents(Fraction(13, 8)))[-1] == (13, 8)


class TestMediumRange:
    def test_two_fifths(self):
        r = medium_range_approx(0.4, 100, 2, 0.1)
        assert (r.a, r.b) == (2, 5)

    def test_one_seventh(self):
        r = medium_range_approx(Fraction(1, 7), 49, 3, 0.05)
        assert (r.a, r.b) == (1, 7)

    def test_golden_tail(self):
        xi = GOLDEN - 1
        r = medium_range_approx(xi, 10 ** 4, 2, 0.1)
        assert 10 ** 0.8 <= r.b <= 10 ** 7.2
        assert abs(Fraction(xi) - Fraction(r.a, r.b)) <= Fraction(1, r.b ** 2)

    def test_rho_out_of_range(self):
        with pytest.raises(HypothesisViolated):
            medium_range_approx(0.4, 100, 2, 0.25)

    def test_too_small(self):
        with pytest.raises(HypothesisViolated):
            medium_range_approx(1e-9, 100, 2, 0.1)

    def test_no_denominator(self):
        # 1/2 has a single nontrivial convergent, below N^(2 rho)
        with pytest.raises(NoAdmissibleDenominator):
            medium_range_approx(0.5, 10 ** 6, 2, 0.1)


class TestPrimes:
    def test_small(self):
        assert primes_upto(10).tolist() == [2, 3, 5, 7]
        assert primes_upto(2).tolist() == [2]

    def test_count_1e5(self):
        primes = primes_upto(10 ** 5)
        assert primes.size == 9592
        assert primes.tolist() == [n for n in range(2, 10 ** 5 + 1) if is_prime_trial(n)]

    def test_segment_boundaries(self):
        n = (1 << 18) * 2 + 5
        primes = primes_upto(n)
        assert all(is_prime_trial(int(p)) for p in primes[-50:])
        sieve = np.ones(n + 1, dtype=bool)
        sieve[:2] = False
        for q in range(2, math.isqrt(n) + 1):
            if sieve[q]:
                sieve[q * q::q] = False
        assert primes.tolist() == np.flatnonzero(sieve).tolist()

    def test_invalid(self):
        with pytest.raises(ValueError):
            primes_upto(1)

    def test_mask(self):
        assert np.flatnonzero(prime_mask(20)).tolist() == [2, 3, 5, 7, 11, 13, 17, 19]

    def test_table_roundtrip(self, tmp_path):
        path = tmp_path / "p.bin"
        primes = primes_upto(1000, cache=path)
        raw = path.read_bytes()
        assert raw[:9] == b"PRIMETAB1"
        assert int.from_bytes(raw[16:24], "little") == 1000
        assert int.from_bytes(raw[24:32], "little") == primes.size
        limit, again = read_prime_table(path)
        assert limit == 1000 and again.tolist() == primes.tolist()
        assert primes_upto(500, cache=path).tolist() == [p for p in primes.tolist() if p <= 500]

    def test_table_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        write_prime_table(path, 10, [2, 3, 5, 7])
        data = bytearray(path.read_bytes())
        data[0:9] = b"NOTPRIMES"
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError):
            read_prime_table(path)

    def test_table_truncated(self, tmp_path):
        path = tmp_path / "short.bin"
        write_prime_table(path, 10, [2, 3, 5, 7])
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            read_prime_table(path)


class TestArithmeticFunctions:
    @pytest.mark.parametrize("n,expected", [(8, math.log(2)), (6, 0.0), (1, 0.0), (49, math.log(7)), (97, math.log(97))])
    def test_mangoldt(self, n, expected):
        assert mangoldt(n) == pytest.approx(expected)

    def test_mangoldt_table_matches_scalar(self):
        table = mangoldt_table(500)
        assert all(table[n] == pytest.approx(mangoldt(n)) for n in range(1, 501))

    def test_chebyshev_scale(self):
        total = mangoldt_table(10 ** 5).sum()
        assert 0.9e5 <= total <= 1.1e5

    @pytest.mark.parametrize("n,s,expected", [(4, 3, 6), (1, 3, 1), (6, 4, 16)])
    def test_divisor_examples(self, n, s, expected):
        assert divisor_s(n, s) == expected

    def test_divisor_brute_force(self):
        for s in (3, 4):
            table = divisor_table(300, s)
            for n in range(1, 301):
                assert divisor_s(n, s) == d_s_brute(n, s) == table[n]

    def test_factorize(self):
        rng = random.Random(1)
        for _ in range(200):
            n = rng.randint(1, 10 ** 9)
            assert math.prod(p ** e for p, e in factorize(n)) == n
            assert all(is_prime_trial(p) for p, _ in factorize(n))

    def test_mobius(self):
        mu = mobius_table(30)
        assert mu[1:13].tolist() == [1, -1, -1, 0, -1, 1, -1, 0, 0, 1, -1, 0]
        assert mu[30] == -1


class TestIntersective:
    def test_identity_polynomial(self):
        rows = intersective_check([[1, 0]], 50)
        assert all(r.ok and r.witness == 0 for r in rows)

    def test_n_squared_plus_one_fails_mod_3(self):
        rows = intersective_check([[1, 0, 1]], 5)
        assert not rows[2].ok and rows[2].witness is None
        assert rows[1].ok  # 1 + 1 = 0 mod 2

    def test_joint_system(self):
        rows = intersective_check([[1, 0, 0], [1, -1, 0]], 4)
        assert rows[3].ok and rows[3].witness == 0

    def test_needs_positive_qmax(self):
        with pytest.raises(ValueError):
            intersective_check([[1, 0]], 0)


def test_one_constant():
    assert ONE == 2 ** 128
