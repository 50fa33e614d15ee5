import numpy as np
import pytest

from relmoment.analysis import (char_field_survey, covariance_residual, dispersion_spectrum,
                                field_nonlinearity, hyperbolicity_report, linearization,
                                lorentz_boost, sign_changes, spatial_roots)
from relmoment.moment_model import (MomentState, assemble_D, assemble_transport, char_indicator,
                                    dz_dzeta, permutation, tables_for)
from relmoment.orthopoly import build_tables
from relmoment.spectral import closed_form_eigvec, pencil_eigens, wave_speeds

from _states import random_state

EQ_STATES = [(1.0, 0.0, 1.0), (2.0, 0.5, 0.4), (0.7, -0.3, 3.0)]


@pytest.mark.parametrize("m", range(1, 7))
@pytest.mark.parametrize("tau", [0.05, 0.5])
def test_dispersion_is_damped(m, tau):
    for rho, u, theta in EQ_STATES:
        w = MomentState(m, rho, u, theta)
        for k in (0.0, 0.1, 1.0, 10.0):
            res = dispersion_spectrum(w, k, tau)
            assert res.omegas.size == 2 * m + 1
            assert res.min_im >= -1e-10
            assert res.residual < 1e-8


def test_dispersion_limits():
    m, tau = 3, 0.1
    w = MomentState(m, 1.0, 0.2, 0.8)
    at_rest = dispersion_spectrum(w, 0.0, tau).omegas
    # three conserved densities give three neutral modes at k = 0
    assert np.sum(np.abs(at_rest) < 1e-10) == 3
    assert np.all(np.abs(at_rest.real) < 1e-10)
    k = 1e6
    fast = np.sort(dispersion_spectrum(w, k, tau).omegas.real / k)
    want = wave_speeds(pencil_eigens(tables_for(0.8, m), m), 0.2)
    assert np.allclose(fast, want, atol=1e-5)


def test_spatial_roots_solve_dispersion():
    w = MomentState(2, 1.0, 0.1, 1.0)
    tau = 0.3
    b0, b1, q = linearization(w, tau)
    for omega in (0.5, 2.0):
        ks = spatial_roots(w, omega, tau)
        assert ks.size == 5
        for k in ks:
            sv = np.linalg.svd(1j * omega * b0 - 1j * k * b1 - q, compute_uv=False)
            assert sv[-1] < 1e-9 * sv[0]


def test_linearization_rejects_non_equilibrium():
    with pytest.raises(ValueError):
        linearization(MomentState(2, 1.0, 0.0, 1.0, pi=0.1), 0.1)
    with pytest.raises(ValueError):
        linearization(MomentState(2, 1.0, 0.0, 1.0), 0.0)


def test_lorentz_boost_state():
    w = MomentState(3, 1.2, 0.5, 0.9, 0.05, 0.01, [0.02, -0.01])
    b = lorentz_boost(w, 0.5)
    assert b.u == 0.0 and b.rho == w.rho and b.pi == w.pi and np.array_equal(b.f_hi, w.f_hi)
    with pytest.raises(ValueError):
        lorentz_boost(w, 1.0)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_moment_operator_is_covariant(m):
    rng = np.random.default_rng(40 + m)
    base = random_state(rng, m).vector()
    amp = rng.uniform(-0.05, 0.05, base.size) * np.maximum(np.abs(base), 0.1)
    kx, kt = rng.uniform(1, 3, base.size), rng.uniform(1, 3, base.size)
    path = lambda t, x: base + amp * np.sin(kx * x + kt * t)
    for v in (-0.6, 0.3, 0.8):
        assert covariance_residual(path, m, 0.1, 0.2, v) < 1e-7


def test_hyperbolicity_report_random_states():
    rng = np.random.default_rng(3)
    for m in range(1, 7):
        rep = hyperbolicity_report(random_state(rng, m))
        assert rep.passed
        assert np.allclose(rep.eigenvalues, rep.predicted, atol=1e-8)
        assert rep.spectral_radius < 1
    # speeds crowd near the light cone for fast flow; the flag is for that case
    assert not hyperbolicity_report(MomentState(4, 1.0, 0.1, 1.0, 0.05)).ill_conditioned


@pytest.mark.parametrize("m", [1, 3, 5])
def test_zero_derivative_matches_finite_differences(m):
    for zeta in (0.3, 2.0):
        h = 1e-6 * zeta
        z = pencil_eigens(build_tables(zeta, m + 2), m).z[m + 1:]
        zp = pencil_eigens(build_tables(zeta + h, m + 2), m).z[m + 1:]
        zm = pencil_eigens(build_tables(zeta - h, m + 2), m).z[m + 1:]
        tab = build_tables(zeta, m + 2)
        for j in range(m):
            fd = (zp[j] - zm[j]) / (2 * h)
            assert dz_dzeta(tab, m, z[j]) == pytest.approx(fd, rel=1e-6)


def _direct_nonlinearity(w, i):
    """grad lambda . r from numeric eigenpairs of B0^-1 B1 and central differences."""
    m = w.m
    x = w.vector()
    pos = m - i  # lab speeds decrease with the frame eigenvalue
    lam = lambda v: np.sort(np.linalg.eigvals(np.linalg.solve(*(lambda s: (s.B0, s.B1))(
        assemble_transport(MomentState.from_vector(m, v))))).real)[pos]
    grad = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = 1e-6 * max(abs(x[k]), 1e-1)
        grad[k] = (lam(x + e) - lam(x - e)) / (2 * e[k])
    sm = assemble_transport(w)
    vals, vecs = np.linalg.eig(np.linalg.solve(sm.B0, sm.B1))
    r = vecs[:, np.argsort(vals.real)[pos]].real
    r /= np.linalg.norm(r)
    # orientation taken from the closed-form right eigenvector
    tab = tables_for(w.theta, m)
    spec = pencil_eigens(tab, m)
    y = closed_form_eigvec(tab, m, None if i == 0 else spec.z[m + i])
    ref = np.linalg.solve(assemble_D(w, tab), y[permutation(m)])
    return float(grad @ (r if r @ ref > 0 else -r))


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_field_nonlinearity_against_direct_route(m):
    for theta in (0.3, 1.0, 4.0):
        w = MomentState(m, 1.0, 0.25, theta)
        for i in (1, m):
            assert field_nonlinearity(w, i) == pytest.approx(_direct_nonlinearity(w, i), rel=1e-5, abs=1e-9)


@pytest.mark.parametrize("m", [1, 2, 4, 6])
def test_middle_field_linearly_degenerate(m):
    rng = np.random.default_rng(m)
    for _ in range(5):
        w = random_state(rng, m, equilibrium=True)
        assert abs(field_nonlinearity(w, 0)) < 1e-7
    w = MomentState(m, 1.3, -0.4, 0.7)
    assert abs(_direct_nonlinearity(w, 0)) < 1e-7


@pytest.mark.parametrize("m", range(1, 8))
def test_indicator_sign_relation(m):
    for zeta in np.geomspace(0.12, 9.0, 12):
        tab = build_tables(zeta, m + 2)
        g = char_indicator(tab, pencil_eigens(tab, m), m, 1)
        d = field_nonlinearity(MomentState(m, 1.0, 0.0, 1 / zeta), 1, tab)
        if abs(g) > 1e-8 and abs(d) > 1e-10:
            assert np.sign(d) == (-1) ** m * np.sign(g)


def test_sign_changes_counter():
    assert sign_changes([1, -1, 2]) == 2
    assert sign_changes([1, 0, 1, 0, -3]) == 1
    assert sign_changes([]) == 0


@pytest.mark.parametrize("m", [1, 2, 3])
def test_no_sign_change_low_orders(m):
    assert sign_changes(char_field_survey(m, np.linspace(0.1, 10, 200))) == 0


@pytest.mark.parametrize("m", [5, 7])
def test_sign_change_confirmed_by_direct_route(m):
    zetas = np.linspace(0.1, 10, 200)
    vals = char_field_survey(m, zetas)
    idx = np.flatnonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))
    assert idx.size >= 1
    a, b = zetas[idx[0]], zetas[idx[0] + 1]
    da = _direct_nonlinearity(MomentState(m, 1.0, 0.0, 1 / a), 1)
    db = _direct_nonlinearity(MomentState(m, 1.0, 0.0, 1 / b), 1)
    assert np.sign(da) != np.sign(db)
