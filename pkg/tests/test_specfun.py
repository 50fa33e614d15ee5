import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from relmoment.specfun import (N_MAX, ThermoContext, bessel_k, bessel_k_sequence, g_ratio,
                               g_ratio_prime, weight_moment, weight_moments_mp)

from _oracles import quad_moments


def test_bessel_k0_against_integral():
    with mpmath.workdps(30):
        ref = mpmath.quad(lambda t: mpmath.exp(-mpmath.cosh(t)), [0, 2, 6, 8])
    assert bessel_k(0, 1.0) == pytest.approx(float(ref), rel=1e-13)


def test_bessel_recurrence_examples():
    assert bessel_k(2, 1.0) == pytest.approx(bessel_k(0, 1.0) + 2 * bessel_k(1, 1.0), rel=1e-14)
    assert bessel_k(3, 2.5) == pytest.approx(bessel_k(1, 2.5) + (4 / 2.5) * bessel_k(2, 2.5), rel=1e-14)


@pytest.mark.parametrize("zeta", [0.05, 0.3, 1.0, 7.0, 50.0])
def test_bessel_against_mpmath(zeta):
    for n in range(0, 2 * N_MAX + 5, 3):
        assert bessel_k(n, zeta) == pytest.approx(float(mpmath.besselk(n, zeta)), rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 50.0))
def test_bessel_sequence_recurrence(zeta):
    k = bessel_k_sequence(24, zeta)
    n = np.arange(1, 24)
    assert np.allclose(k[2:], k[:-2] + (2 * n / zeta) * k[1:-1], rtol=1e-12, atol=0)


def test_bessel_domain_errors():
    with pytest.raises(ValueError):
        bessel_k(0, 0.0)
    with pytest.raises(ValueError):
        bessel_k(0, -1.0)
    with pytest.raises(OverflowError):
        bessel_k(30, 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 50.0))
def test_thermo_context_invariants(zeta):
    ctx = ThermoContext.from_zeta(zeta)
    assert ctx.theta == pytest.approx(1 / zeta, rel=1e-15)
    assert ctx.k2 == pytest.approx(ctx.k0 + 2 / zeta * ctx.k1, rel=1e-13)
    assert ctx.g - 2 / zeta == pytest.approx(ctx.k0 / ctx.k1, rel=1e-12)
    assert 1.5 * ctx.theta + 1 < ctx.g


def test_g_ratio_prime_matches_difference():
    for zeta in (0.1, 1.0, 10.0):
        h = 1e-5 * zeta
        fd = (g_ratio(zeta + h) - g_ratio(zeta - h)) / (2 * h)
        assert g_ratio_prime(zeta) == pytest.approx(fd, rel=1e-8)


def test_weight_moment_normalizations():
    ctx = ThermoContext.from_zeta(1.0)
    assert weight_moment(0, 0, ctx) == pytest.approx(ctx.k0 / ctx.k1, rel=1e-14)
    for zeta in (0.2, 1.0, 4.0):
        assert weight_moment(1, 0, ThermoContext.from_zeta(zeta)) == pytest.approx(1 / zeta, rel=1e-13)
        assert weight_moment(0, 1, ThermoContext.from_zeta(zeta)) == pytest.approx(1.0, rel=1e-13)


def test_weight_moment_against_quadrature():
    ctx = ThermoContext.from_zeta(2.0)
    ref, _ = integrate.quad(lambda x: x**3 * np.exp(-2 * x) / np.sqrt(x * x - 1), 1, np.inf,
                            epsabs=0, epsrel=1e-13, limit=200)
    assert weight_moment(0, 3, ctx) == pytest.approx(ref / bessel_k(1, 2.0), rel=1e-10)
    for ell in (0, 1):
        qm = quad_moments(2.0, ell, 12)
        for k in range(13):
            assert weight_moment(ell, k, ctx) == pytest.approx(float(qm[k]), rel=1e-13)


def test_weight_moment_capacity():
    ctx = ThermoContext.from_zeta(1.0)
    with pytest.raises(ValueError):
        weight_moment(0, 2 * N_MAX + 3, ctx)


@pytest.mark.parametrize("zeta", [0.05, 1.0, 50.0])
def test_weight_moments_monotone_and_hankel_positive(zeta):
    ctx = ThermoContext.from_zeta(zeta)
    with mpmath.workdps(60):
        mp_moments = weight_moments_mp(zeta, 12)
        for ell in (0, 1):
            m = np.array([weight_moment(ell, k, ctx) for k in range(13)])
            assert np.all(m > 0)
            assert np.all(m[2:] > m[:-2])
            assert np.allclose(m, [float(v) for v in mp_moments[ell]], rtol=1e-13, atol=0)
            # near zeta = 50 the Hankel matrix is far too ill-conditioned for doubles
            hankel = mpmath.matrix([[mp_moments[ell][i + j] for j in range(7)] for i in range(7)])
            low = mpmath.cholesky(hankel)
            assert min(low[i, i] for i in range(7)) > 0
