import numpy as np
import pytest
from hypothesis import given, settings

from relmoment.errors import AdmissibilityError
from relmoment.moment_model import (MomentState, assemble_D, assemble_DW, assemble_transport,
                                    coefficients, permutation, permutation_matrix, permuted_pencil,
                                    pos0, pos1, source_aw, state_from_coefficients, tables_for,
                                    transport_matrices)
from relmoment.orthopoly import poly_zeros
from relmoment.spectral import assemble_pencil, pencil_eigens, wave_speeds
from relmoment.specfun import g_ratio

from _oracles import distribution, finite_difference_D, kinetic_moments
from _states import random_state, states


def test_permutation_examples():
    assert permutation(1).tolist() == [0, 1, 2]
    assert permutation(2).tolist() == [0, 1, 3, 2, 4]
    for m in range(1, 10):
        idx = permutation(m)
        inv = np.argsort(idx)
        assert np.array_equal(idx[inv], np.arange(2 * m + 1))
        pp = permutation_matrix(m)
        assert np.array_equal(pp @ pp.T, np.eye(2 * m + 1))


def test_slot_maps():
    m = 4
    slots = [pos0(n) for n in range(m + 1)] + [pos1(n) for n in range(m)]
    assert sorted(slots) == list(range(2 * m + 1))
    assert np.array_equal(permutation(m)[slots], np.arange(2 * m + 1))


def test_dw_m1():
    w = MomentState(1, 1.2, 0.3, 0.9)
    tab = tables_for(0.9, 1)
    dw = assemble_DW(w, tab)
    want = np.zeros((3, 3))
    want[0, 0] = 1 / tab.c[0][0]
    assert np.array_equal(dw, want)


def test_dw_m2_equilibrium():
    w = MomentState(2, 1.7, -0.4, 0.6)
    tab = tables_for(0.6, 2)
    f = assemble_DW(w, tab) @ w.vector()
    assert np.allclose(f, [1.7 / tab.c[0][0], 0, 0, 0, 0], atol=1e-15)
    assert f[0] == pytest.approx(1.7 * np.sqrt(g_ratio(1 / 0.6) - 2 * 0.6), rel=1e-13)


def test_dw_m4_entries():
    w = MomentState(4, 1.0, 0.0, 1.0, 0.1, -0.05, [0.01, 0.02, -0.01, 0.03])
    tab = tables_for(1.0, 4)
    c = tab.c
    x11, x2, x11_1 = poly_zeros(tab, 0, 1)[0], poly_zeros(tab, 0, 2), poly_zeros(tab, 1, 1)[0]
    want = np.zeros((9, 9))
    want[0, 0] = 1 / c[0][0]
    # the Pi entry of the first row carries a minus sign; see the kinetic check below
    want[0, 3] = -c[0][0]
    want[1, 3] = c[0][1] * x11
    want[2, 4] = -c[1][0]
    want[3, 3] = -c[0][2] * x2[0] * x2[1]
    want[4, 4] = c[1][1] * x11_1
    want[5:, 5:] = np.eye(4)
    assert np.allclose(assemble_DW(w, tab), want, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_coefficients_reproduce_landau_moments(m):
    """The projected distribution carries rho, the equilibrium energy, Pi and n1 exactly."""
    rng = np.random.default_rng(11 + m)
    for _ in range(3):
        w = random_state(rng, m)
        fv = distribution(w.vector(), m)
        mom = kinetic_moments(fv)
        g = 1 / np.sqrt(1 - w.u**2)
        u0, u1 = g, g * w.u
        # Landau-frame components: contract with U and project with Delta
        n_par = u0 * mom["n0"] - u1 * mom["n1"]
        n_perp = u1 * mom["n0"] - u0 * mom["n1"]
        e = u0 * u0 * mom["t00"] - 2 * u0 * u1 * mom["t01"] + u1 * u1 * mom["t11"]
        q = u0 * u1 * (mom["t00"] + mom["t11"]) - (u0 * u0 + u1 * u1) * mom["t01"]
        p = u1 * u1 * mom["t00"] - 2 * u0 * u1 * mom["t01"] + u0 * u0 * mom["t11"]
        assert n_par == pytest.approx(w.rho, rel=1e-10)
        assert e == pytest.approx(w.rho * (g_ratio(w.zeta) - w.theta), rel=1e-10)
        assert abs(q) < 1e-10 * w.rho
        assert p == pytest.approx(w.rho * w.theta + w.pi, rel=1e-9, abs=1e-12)
        # n^1 = -n_perp U0, so -n_perp is n1_tilde = n^1 sqrt(1 - u^2)
        assert -n_perp == pytest.approx(w.n1_tilde, rel=1e-9, abs=1e-12)


def test_state_round_trip_via_coefficients():
    rng = np.random.default_rng(5)
    for m in range(1, 7):
        w = random_state(rng, m)
        tab = tables_for(w.theta, m)
        back = state_from_coefficients(m, coefficients(w, tab), w.rho, w.u, w.theta, tab)
        assert np.allclose(back.vector(), w.vector(), rtol=1e-12, atol=1e-14)


def test_state_validation():
    with pytest.raises(AdmissibilityError):
        MomentState(2, -1.0, 0.0, 1.0)
    with pytest.raises(AdmissibilityError):
        MomentState(2, 1.0, 1.0, 1.0)
    with pytest.raises(AdmissibilityError):
        MomentState(2, 1.0, 0.0, 0.0)
    with pytest.raises(AdmissibilityError):
        MomentState(2, 1.0, 0.0, 1.0, pi=-1.0)
    with pytest.raises(ValueError):
        MomentState(3, 1.0, 0.0, 1.0, f_hi=[1.0])
    with pytest.raises(ValueError):
        MomentState(1, 1.0, 0.0, 1.0, pi=0.1)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_d_against_kinetic_finite_differences(m):
    rng = np.random.default_rng(21 + m)
    w = random_state(rng, m)
    d = assemble_D(w, tables_for(w.theta, m))
    ref = finite_difference_D(w)
    assert np.abs(d - ref).max() < 1e-7 * max(1.0, np.abs(d).max())


def test_d_m2_equilibrium_reduces_to_dw_column():
    w = MomentState(2, 1.1, 0.25, 0.7)
    tab = tables_for(0.7, 2)
    d, dw = assemble_D(w, tab), assemble_DW(w, tab)
    assert np.array_equal(d[:, [0, 3, 4]], dw[:, [0, 3, 4]])


def test_det_d_closed_forms_regression():
    """Determinants rebuilt from the kinetically validated D (cofactor expansion)."""
    rng = np.random.default_rng(8)
    for _ in range(20):
        w = random_state(rng, 1)
        tab = tables_for(w.theta, 1)
        c, z = tab.c, w.zeta
        want = w.rho**2 * z**2 * c[1][0] / (c[0][0] * c[0][1] * (1 - w.u**2))
        assert np.linalg.det(assemble_D(w, tab)) == pytest.approx(want, rel=1e-10)
        w = random_state(rng, 2)
        tab = tables_for(w.theta, 2)
        c, z = tab.c, w.zeta
        x = poly_zeros(tab, 0, 2)
        want = -(w.rho * z**2 * c[0][2] * c[1][0] * c[1][1] * x.prod() * (w.rho * tab.g + w.pi)
                 / (c[0][0] * c[0][1] * (1 - w.u**2)))
        assert np.linalg.det(assemble_D(w, tab)) == pytest.approx(want, rel=1e-10)


def test_transport_at_rest():
    w = MomentState(3, 1.0, 0.0, 0.8, 0.05, 0.02, [0.01, -0.01])
    tab = tables_for(0.8, 3)
    sm = assemble_transport(w, tab)
    a0, a1 = assemble_pencil(tab, 3)
    pp = permutation_matrix(3)
    assert np.array_equal(sm.Mt, pp @ a0 @ pp.T)
    assert np.array_equal(sm.Mx, -(pp @ a1 @ pp.T))


def test_transport_against_quadrature():
    """Mt_jk = int p0 psi_j psi_k g dt and Mx_jk = int p1 psi_j psi_k g dt."""
    from _oracles import DT, RAPIDITY, frame_basis

    m, u, theta = 3, 0.35, 0.9
    tab = tables_for(theta, m)
    g, psi = frame_basis(u, theta, m, tab)
    mt_ref = (psi * g * np.cosh(RAPIDITY)) @ psi.T * DT
    mx_ref = (psi * g * np.sinh(RAPIDITY)) @ psi.T * DT
    mt, mx, _ = transport_matrices(tab, m, u)
    assert np.allclose(mt, mt_ref, atol=1e-9)
    assert np.allclose(mx, mx_ref, atol=1e-9)


def test_m1_matches_hydrodynamic_jacobian():
    """B0^-1 B1 at order 1 equals the primitive-variable Jacobian of ideal relativistic flow."""
    def cons_flux(w):
        r, v, t = w
        u0 = 1 / np.sqrt(1 - v * v)
        u1 = u0 * v
        h, p = r * g_ratio(1 / t), r * t
        return (np.array([r * u0, h * u0 * u0 - p, h * u0 * u1]),
                np.array([r * u1, h * u0 * u1, h * u1 * u1 + p]))

    rng = np.random.default_rng(2)
    for _ in range(10):
        w = random_state(rng, 1)
        x = w.vector()
        ju, jf = np.zeros((3, 3)), np.zeros((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1e-6 * max(1.0, abs(x[k]))
            (u_p, f_p), (u_m, f_m) = cons_flux(x + e), cons_flux(x - e)
            ju[:, k] = (u_p - u_m) / (2 * e[k])
            jf[:, k] = (f_p - f_m) / (2 * e[k])
        sm = assemble_transport(w)
        assert np.allclose(np.linalg.solve(sm.B0, sm.B1), np.linalg.solve(ju, jf), atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(states())
def test_eigenvalues_match_wave_speeds(w):
    tab = tables_for(w.theta, w.m)
    sm = assemble_transport(w, tab)
    assert np.linalg.cond(sm.B0) < 1e12
    ev = np.linalg.eigvals(np.linalg.solve(sm.B0, sm.B1))
    assert np.abs(ev.imag).max() < 1e-8
    want = wave_speeds(pencil_eigens(tab, w.m), w.u)
    assert np.allclose(np.sort(ev.real), want, atol=1e-8)
    assert np.abs(ev).max() < 1


def test_m5_random_state_spectrum():
    w = random_state(np.random.default_rng(55), 5)
    tab = tables_for(w.theta, 5)
    sm = assemble_transport(w, tab)
    ev = np.sort(np.linalg.eigvals(np.linalg.solve(sm.B0, sm.B1)).real)
    assert np.allclose(ev, wave_speeds(pencil_eigens(tab, 5), w.u), atol=1e-8)


def test_source_examples():
    w = MomentState(3, 1.3, 0.2, 0.8)
    tab = tables_for(0.8, 3)
    assert np.array_equal(source_aw(w, tab, 0.1), np.zeros(7))
    w = MomentState(2, 1.0, 0.0, 1.0, pi=0.1)
    tab = tables_for(1.0, 2)
    f = assemble_DW(w, tab) @ w.vector()
    f[0] -= 1.0 / tab.c[0][0]
    pa0 = permuted_pencil(tab, 2)[0]
    assert np.allclose(source_aw(w, tab, 1.0), -pa0 @ f, rtol=1e-14)
    # density, momentum and the n1 slot carry no deviation
    assert f[pos1(0)] == 0.0 and f[pos1(1)] == 0.0
    w = random_state(np.random.default_rng(3), 4)
    tab = tables_for(w.theta, 4)
    assert np.allclose(source_aw(w, tab, 0.4), 0.5 * source_aw(w, tab, 0.2), rtol=1e-14)
    with pytest.raises(ValueError):
        source_aw(w, tab, 0.0)
