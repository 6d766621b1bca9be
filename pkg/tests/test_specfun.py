import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from kpulse import specfun as sf
from kpulse.errors import DomainError

# frozen from mpmath at 30 digits
K_HALF = 1.8540746773013719
K_095 = 2.9083372484445517
AM_1_HALF = 0.93231507988385387
KN_03_06 = 2.1488671114641730
BESSEL_J3_1 = 0.019563353982668406


class TestCompleteK:
    def test_zero(self):
        assert sf.complete_elliptic_K(0.0) == pytest.approx(math.pi / 2, rel=1e-15)

    @pytest.mark.parametrize("m,ref", [(0.5, K_HALF), (0.95, K_095)])
    def test_values(self, m, ref):
        assert sf.complete_elliptic_K(m) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("m", [0.1, 0.5, 0.9, 0.999])
    def test_against_agm_oracle(self, m):
        assert sf.complete_elliptic_K(m) == pytest.approx(oracles.agm_K(m), rel=1e-12)

    @pytest.mark.parametrize("m", [1.0, 1.5, -0.1, float("nan")])
    def test_domain(self, m):
        with pytest.raises(DomainError):
            sf.complete_elliptic_K(m)


class TestEllipticF:
    def test_matches_scipy(self):
        from scipy.special import ellipkinc
        phi = np.linspace(-7, 7, 41)
        for m in (0.0, 0.3, 0.95):
            assert np.allclose(sf.elliptic_F(phi, m), ellipkinc(phi, m), rtol=1e-13, atol=1e-14)

    def test_quarter_period(self):
        assert sf.elliptic_F(np.pi / 2, 0.7) == pytest.approx(sf.complete_elliptic_K(0.7), rel=1e-14)


class TestJacobiAmplitude:
    def test_identity_at_m0(self):
        assert sf.jacobi_amplitude(0.7, 0.0) == pytest.approx(0.7, abs=1e-14)

    def test_quarter_period(self):
        K = sf.complete_elliptic_K(0.5)
        assert sf.jacobi_amplitude(K, 0.5) == pytest.approx(math.pi / 2, abs=1e-12)

    def test_rk4_oracle(self):
        assert sf.jacobi_amplitude(1.0, 0.5) == pytest.approx(oracles.rk4_amplitude(1.0, 0.5), abs=1e-10)
        assert sf.jacobi_amplitude(1.0, 0.5) == pytest.approx(AM_1_HALF, abs=1e-12)

    @pytest.mark.parametrize("m", [0.0, 0.25, 0.5, 0.95])
    def test_inverse_identity(self, m):
        u = np.linspace(-3 * sf.complete_elliptic_K(m), 3 * sf.complete_elliptic_K(m), 301)
        assert np.max(np.abs(sf.elliptic_F(sf.jacobi_amplitude(u, m), m) - u)) < 1e-10

    @pytest.mark.parametrize("m", [0.0, 0.25, 0.5, 0.95])
    def test_strictly_increasing(self, m):
        u = np.linspace(0, 2 * sf.complete_elliptic_K(m), 2001)
        assert np.all(np.diff(sf.jacobi_amplitude(u, m)) > 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            sf.jacobi_amplitude(0.3, 1.0)
        with pytest.raises(DomainError):
            sf.jacobi_amplitude(np.inf, 0.3)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-20, 20), st.floats(0, 0.99))
    def test_inverse_property(self, u, m):
        assert abs(sf.elliptic_F(sf.jacobi_amplitude(u, m), m) - u) < 1e-10


class TestGeneralized:
    @pytest.mark.parametrize("m", [0.0, 0.25, 0.5, 0.95])
    def test_reduces_to_F(self, m):
        u = np.linspace(-4, 4, 33)
        assert np.allclose(sf.generalized_F(u, [m]), sf.elliptic_F(u, m), atol=1e-10, rtol=0)

    def test_zero_moduli(self):
        assert sf.generalized_F(1.2, [0.0, 0.0, 0.0]) == pytest.approx(1.2, abs=1e-12)

    def test_simpson_oracle(self):
        f = lambda p: 1 / np.sqrt((1 - 0.3 * np.sin(p) ** 2) * (1 - 0.6 * np.sin(p) ** 2))  # noqa: E731
        ref = oracles.simpson_refined(f, 0, np.pi / 2)
        assert sf.generalized_F(np.pi / 2, [0.3, 0.6]) == pytest.approx(ref, abs=1e-10)
        assert sf.generalized_K([0.3, 0.6]) == pytest.approx(KN_03_06, abs=1e-12)

    @pytest.mark.parametrize("m", [0.0, 0.25, 0.5, 0.95])
    def test_am_roundtrip_invariant(self, m):
        u = np.linspace(0, sf.complete_elliptic_K(m), 101)
        assert np.max(np.abs(sf.generalized_F(sf.jacobi_amplitude(u, m), [m]) - u)) < 1e-9

    def test_amplitude_basics(self):
        mod = [0.3, 0.6]
        assert sf.generalized_amplitude(0.0, mod) == 0.0
        assert sf.generalized_amplitude(sf.generalized_K(mod), mod) == pytest.approx(np.pi / 2, abs=1e-10)
        t = np.linspace(0, 2 * sf.complete_elliptic_K(0.4), 50)
        assert np.allclose(sf.generalized_amplitude(t, [0.4]), sf.jacobi_amplitude(t, 0.4), atol=1e-10)

    def test_amplitude_inverse(self):
        mod = [0.3, 0.6, 0.9]
        t = np.linspace(0, 2 * sf.generalized_K(mod), 201)
        assert np.max(np.abs(sf.generalized_F(sf.generalized_amplitude(t, mod), mod) - t)) < 1e-10

    def test_domain(self):
        with pytest.raises(DomainError):
            sf.generalized_F(1.0, [0.3, 1.0])
        with pytest.raises(DomainError):
            sf.generalized_amplitude(1.0, [])


class TestChebyshev:
    def test_base(self):
        assert sf.chebyshev("first", 0, 0.3) == 1.0
        assert sf.chebyshev("second", 0, 0.3) == 1.0

    def test_closed_form(self):
        assert sf.chebyshev("first", 3, 0.5) == pytest.approx(-1.0, abs=1e-15)

    def test_trig_identity(self):
        th = 0.4
        assert sf.chebyshev("first", 7, math.cos(th)) == pytest.approx(math.cos(7 * th), abs=1e-14)
        assert sf.chebyshev("second", 7, math.cos(th)) == pytest.approx(
            math.sin(8 * th) / math.sin(th), abs=1e-13)

    def test_negative_degree(self):
        with pytest.raises(DomainError):
            sf.chebyshev("first", -1, 0.1)
        with pytest.raises(DomainError):
            sf.chebyshev("third", 1, 0.1)

    def test_orthogonality_second_kind(self):
        # Gauss-Chebyshev rule of the second kind, exact for degree < 2 * 40
        k = np.arange(1, 41)
        x = np.cos(k * np.pi / 41)
        w = np.pi / 41 * np.sin(k * np.pi / 41) ** 2
        U = np.array([sf.chebyshev("second", n, x) for n in range(13)])
        G = (U * w) @ U.T
        assert np.max(np.abs(G - np.pi / 2 * np.eye(13))) < 1e-9


class TestJacobiPolynomial:
    def test_base(self):
        assert sf.jacobi_polynomial(0, 1.5, 2.5, 0.3) == 1.0

    def test_degree_one(self):
        assert sf.jacobi_polynomial(1, 0, 1, 0.4) == pytest.approx(0.1, abs=1e-15)

    def test_weighted_orthogonality(self):
        f = lambda s: (1 + s) * sf.jacobi_polynomial(2, 0, 1, s) * sf.jacobi_polynomial(4, 0, 1, s)  # noqa: E731
        assert abs(oracles.gauss_legendre(f, -1, 1, 40)) < 1e-10

    def test_matches_scipy(self):
        from scipy.special import eval_jacobi
        x = np.linspace(-1, 1, 21)
        for n, a, b in [(3, 0, 1), (6, 1, 2), (9, 2, 3), (5, -0.5, 0.5)]:
            assert np.allclose(sf.jacobi_polynomial(n, a, b, x), eval_jacobi(n, a, b, x), atol=1e-12)

    def test_derivative(self):
        x = np.linspace(-0.9, 0.9, 7)
        for n in range(0, 6):
            for order in (1, 2):
                f = lambda s: sf.jacobi_polynomial(n, 0, 1, s)  # noqa: E731
                h = 1e-4
                if order == 1:
                    fd = (f(x + h) - f(x - h)) / (2 * h)
                else:
                    fd = (f(x + h) - 2 * f(x) + f(x - h)) / h**2
                assert np.allclose(sf.jacobi_polynomial_derivative(n, 0, 1, x, order), fd, atol=1e-5)

    def test_domain(self):
        with pytest.raises(DomainError):
            sf.jacobi_polynomial(-1, 0, 1, 0.2)
        with pytest.raises(DomainError):
            sf.jacobi_polynomial(2, -1, 1, 0.2)


class TestAngerWeber:
    def test_origin(self):
        J, E = sf.anger_weber(0.0, 0.0)
        assert J == pytest.approx(1.0, abs=1e-14) and E == pytest.approx(0.0, abs=1e-14)

    def test_bessel_reduction(self):
        assert sf.anger_weber(3, 1)[0] == pytest.approx(BESSEL_J3_1, abs=1e-10)

    def test_half_integer_at_zero(self):
        J, E = sf.anger_weber(1.5, 0.0)
        a = 1.5 * np.pi
        assert J == pytest.approx(np.sin(a) / a, abs=1e-12)
        assert E == pytest.approx((1 - np.cos(a)) / a, abs=1e-12)

    @pytest.mark.parametrize("n", [0, 1, 2, 5, 8])
    def test_bessel_series(self, n):
        z = np.linspace(0, 10, 21)
        J, _ = sf.anger_weber(np.full_like(z, n), z)
        ref = np.array([oracles.bessel_series(n, zz) for zz in z])
        assert np.max(np.abs(J - ref)) < 1e-8

    def test_non_finite(self):
        with pytest.raises(DomainError):
            sf.anger_weber(np.nan, 1.0)
