import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idemconc import construct as K
from idemconc.errors import DomainError, DuplicateFrequency
from idemconc.kernel import FrequencySet, canonicalize, dirichlet_magnitude, eval_sum
from idemconc.quadrature import norm_p_period

SMALL_PRIMES = [p for p in range(3, 400) if all(p % d for d in range(2, int(p**0.5) + 1))]
GOLDEN = (math.sqrt(5) - 1) / 2


class TestPrimality:
    def test_agrees_with_sieve(self):
        sieve = set(K._primes_upto(5000))
        assert {n for n in range(5000) if K.is_prime(n)} == sieve

    def test_large(self):
        assert K.is_prime(1_000_000_007)
        assert K.is_prime(2**61 - 1)
        assert not K.is_prime(1_000_003 * 1_000_033)


class TestBezout:
    @pytest.mark.parametrize("k,q,a,b", [(1, 7, 1, 0), (3, 7, 5, 2), (12, 29, 17, 7)])
    def test_examples(self, k, q, a, b):
        assert K.bezout_inverse(k, q) == (a, b)

    @given(st.sampled_from(SMALL_PRIMES), st.data())
    def test_identity(self, q, data):
        k = data.draw(st.integers(1, q - 1))
        a, b = K.bezout_inverse(k, q)
        assert a * k - b * q == 1 and 0 < a < q and 0 <= b < k

    def test_rejects(self):
        with pytest.raises(DomainError):
            K.bezout_inverse(2, 9)
        with pytest.raises(DomainError):
            K.bezout_inverse(7, 7)


class TestBreakpoints:
    def test_examples(self):
        assert K.breakpoints(1, 5) == (0, 5)
        assert K.breakpoints(5, 7) == (0, 2, 3, 5, 6, 7)

    @given(st.sampled_from(SMALL_PRIMES), st.data())
    def test_partition(self, q, data):
        a = data.draw(st.integers(1, q - 1))
        t = K.breakpoints(a, q)
        assert t[0] == 0 and t[-1] == q
        assert all(x < y for x, y in zip(t, t[1:]))
        cells = [set(range(x, y)) for x, y in zip(t, t[1:])]
        assert set().union(*cells) == set(range(q))
        assert sum(len(c) for c in cells) == q


class TestGeneral:
    def test_build_G_example(self):
        r = K.ConstructionRecipe(q=7, k=3, a=5, b=2, ell=2, m=1, Q=1)
        assert K.build_G(r) == FrequencySet([0, 3, 5])

    def test_build_concentrated_examples(self):
        r1 = K.ConstructionRecipe(q=7, k=3, a=5, b=2, ell=2, m=1, Q=1)
        assert K.build_concentrated(r1) == FrequencySet([0, 3, 5])
        r2 = K.ConstructionRecipe(q=7, k=3, a=5, b=2, ell=2, m=1, Q=2)
        assert K.build_concentrated(r2) == FrequencySet([0, 3, 5, 7, 10, 12])

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(SMALL_PRIMES[3:]), st.data(), st.floats(0.05, 0.49))
    def test_cardinality_and_range(self, q, data, omega):
        k = data.draw(st.integers(1, q - 1))
        m, Q = data.draw(st.integers(1, 4)), data.draw(st.integers(1, 3))
        try:
            r = K.ConstructionRecipe.from_target(q, k, omega, m, Q)
        except DomainError:
            assert K.bezout_inverse(k, q)[0] <= 2
            return
        g = K.build_G(r)
        assert len(g) == math.ceil(r.omega * q) == r.block_length
        assert g.max_freq < q
        s = K.build_concentrated(r).materialize()
        assert len(s) == m * Q * r.block_length
        assert s.max_freq < q * m * Q
        assert 1 <= r.ell and 2 * r.ell < r.a

    def test_factorization(self):
        r = K.ConstructionRecipe.from_target(29, 12, 0.34, m=3, Q=2)
        s = K.build_concentrated(r).materialize()
        g = K.build_G(r)
        for x in np.random.default_rng(0).random(1000):
            want = dirichlet_magnitude(6, (29 * x) % 1.0) * abs(eval_sum(g, x))
            got = abs(eval_sum(s, x))
            assert got == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_k1_matches_simple(self):
        for q in (7, 11, 29):
            built = K.construct_general(q, 1, 0.34, m=2, Q=q)
            w = math.ceil(0.34 * q)
            assert built.mode == "simple-fallback"
            assert canonicalize(built.freqs.materialize()) == canonicalize(K.build_simple(q, 2, w).materialize())

    def test_recipe_validation(self):
        with pytest.raises(DomainError):
            K.ConstructionRecipe(q=7, k=3, a=5, b=2, ell=3, m=1, Q=1)
        with pytest.raises(DomainError):
            K.ConstructionRecipe(q=7, k=3, a=4, b=2, ell=1, m=1, Q=1)

    def test_predicted_bound(self):
        built = K.construct_general(29, 12, 0.34)
        assert built.predicted_bound(2.0) == pytest.approx(K.giratio_bound(built.omega, 2.0))


class TestSimpleAndSpecial:
    def test_full_block(self):
        assert K.build_simple(5, 1, 5) == FrequencySet(range(25))

    def test_exact_identity(self):
        s = K.build_simple(5, 5, 2)
        assert len(s) == 50
        assert norm_p_period(s, 2) == 50

    def test_dilated_block(self):
        assert K.build_simple(3, 2, 1) == FrequencySet([0, 3, 6, 9, 12, 15])

    def test_rejects_overlap(self):
        with pytest.raises(DuplicateFrequency):
            K.build_simple(5, 1, 6)

    def test_special(self):
        assert K.build_special(2, 6, 3) == FrequencySet([0, 1, 2, 6, 7, 8])
        assert K.build_special(1, 99, 3) == FrequencySet([0, 1, 2])
        with pytest.raises(DuplicateFrequency):
            K.build_special(2, 2, 3)

    def test_block_length(self):
        assert K.simple_block_length(101, 0.34) == 34
        assert K.simple_block_length(7, 1.0) == 7


class TestRationalApprox:
    def test_sqrt2_example(self):
        pairs = K.rational_approx(math.sqrt(2) - 1, 30)
        assert (2, 5) in pairs and (12, 29) in pairs

    def test_near_rational(self):
        assert (1, 2) in K.rational_approx(0.5 + 1e-9, 5)

    @pytest.mark.parametrize("xi", [math.sqrt(2) - 1, GOLDEN, math.pi - 3, 0.5 + 1e-9])
    def test_exhaustive_oracle(self, xi):
        exact = Fraction(xi)
        want = [
            (k, q)
            for q in range(2, 300)
            if K.is_prime(q)
            for k in range(0, q + 1)
            if abs(exact - Fraction(k, q)) < Fraction(1, q * q)
        ]
        assert K.rational_approx(xi, 299) == want

    def test_domain(self):
        with pytest.raises(DomainError):
            K.rational_approx(1.2, 10)


def l2_theta_oracle(xi, omega, n, x):
    """Sum over pairs n, n' of cos(2 pi (n-n') x) times the overlap of the two windows."""
    d = np.arange(-(n - 1), n)
    mult = n - np.abs(d)
    t = d * xi
    dist = np.abs(t - np.rint(t))
    overlap = np.maximum(0.0, omega - dist)
    return float(np.sum(mult * overlap * np.cos(2 * np.pi * d * x)))


class TestWeyl:
    def test_full_window(self):
        assert K.build_weyl(K.WeylRecipe(GOLDEN, 1.0, 40, 0.3)) == FrequencySet(range(1, 41))

    def test_density(self):
        s = K.build_weyl(K.WeylRecipe(GOLDEN, 0.5, 10**5, 0.0))
        assert 0.48 <= len(s) / 1e5 <= 0.52

    def test_membership(self):
        s = set(K.build_weyl(K.WeylRecipe(GOLDEN, 0.3, 2000, 0.21)))
        for n in range(1, 2001):
            t = n * GOLDEN - 0.21
            assert (n in s) == (abs(t - round(t)) <= 0.15)

    def test_breakpoints_single(self):
        assert K.theta_breakpoints(GOLDEN, 0.3, 1).size == 2

    def test_piecewise_constant(self):
        pts = K.theta_breakpoints(GOLDEN, 0.25, 30)
        rng = np.random.default_rng(5)
        for i in rng.integers(0, pts.size - 1, 10):
            lo, hi = pts[i], pts[i + 1]
            a = K.build_weyl(K.WeylRecipe(GOLDEN, 0.25, 30, lo + 0.3 * (hi - lo)))
            b = K.build_weyl(K.WeylRecipe(GOLDEN, 0.25, 30, lo + 0.7 * (hi - lo)))
            assert a == b

    def test_window_measure(self):
        xi, omega, n = GOLDEN, 0.25, 40
        pts = K.theta_breakpoints(xi, omega, n)
        ends = np.append(pts[1:], pts[0] + 1)
        total = sum(
            (hi - lo) * len(K.build_weyl(K.WeylRecipe(xi, omega, n, ((lo + hi) / 2) % 1.0)))
            for lo, hi in zip(pts, ends)
        )
        assert total == pytest.approx(n * omega, abs=1e-9)

    def test_theta_integral_matches_pair_formula(self):
        for x in (0.0, 0.1, 0.37, 0.9):
            assert K.weyl_theta_l2(GOLDEN, 0.25, 30, x) == pytest.approx(
                l2_theta_oracle(GOLDEN, 0.25, 30, x), abs=1e-9
            )

    def test_l2_inequality_sample(self):
        rng = np.random.default_rng(11)
        for x in rng.random(20):
            lhs = K.weyl_theta_l2(GOLDEN, 0.25, 50, x)
            rhs = (math.sin(math.pi * 0.25) / math.pi) ** 2 * dirichlet_magnitude(50, x - GOLDEN) ** 2
            assert lhs >= rhs - 1e-9
