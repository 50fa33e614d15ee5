"""Hyperbolicity, linear stability, Lorentz covariance and characteristic-field checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .moment_model import (MomentState, assemble_D, assemble_DW, assemble_transport,
                           char_indicator, dz_dzeta, permutation, tables_for,
                           transport_matrices)
from .orthopoly import build_tables
from .spectral import closed_form_eigvec, pencil_eigens, wave_speeds

__all__ = [
    "DispersionResult",
    "HyperbolicityReport",
    "linearization",
    "dispersion_spectrum",
    "spatial_roots",
    "lorentz_boost",
    "moment_operator",
    "covariance_residual",
    "hyperbolicity_report",
    "field_nonlinearity",
    "char_field_survey",
    "sign_changes",
]


@dataclass(frozen=True)
class DispersionResult:
    k: float
    omegas: np.ndarray
    min_im: float
    residual: float


@dataclass(frozen=True)
class HyperbolicityReport:
    m: int
    eigenvalues: np.ndarray
    predicted: np.ndarray
    eigvec_cond: float
    spectral_radius: float
    det_d: float
    min_gap: float
    ill_conditioned: bool
    passed: bool


def linearization(w0: MomentState, tau: float):
    """B0, B1 and the source Jacobian Q at an equilibrium state.

    Q = -(1/tau) A0 D~W, where D~W is D^W with the density column removed: the
    equilibrium part of the projected distribution absorbs the density and the
    temperature dependence cancels at equilibrium.
    """
    if not w0.is_equilibrium():
        raise ValueError("linearization is defined at equilibrium states only")
    if not tau > 0:
        raise ValueError("tau must be positive")
    tab = tables_for(w0.theta, w0.m)
    sm = assemble_transport(w0, tab)
    _, _, pa0 = transport_matrices(tab, w0.m, w0.u)
    dw = assemble_DW(w0, tab).copy()
    dw[:, 0] = 0.0
    return sm.B0, sm.B1, -(pa0 @ dw) / tau


def _smallest_singular(mat) -> float:
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def dispersion_spectrum(w0: MomentState, k: float, tau: float) -> DispersionResult:
    """Roots omega of det(i omega B0 - i k B1 - Q) = 0 for real k."""
    b0, b1, q = linearization(w0, tau)
    omegas = np.linalg.eigvals(np.linalg.solve(b0, k * b1 - 1j * q))
    omegas = omegas[np.lexsort((omegas.imag, omegas.real))]
    scale = np.linalg.norm(b0, 2)
    res = max(_smallest_singular(1j * om * b0 - 1j * k * b1 - q) for om in omegas) / scale
    return DispersionResult(float(k), omegas, float(omegas.imag.min()), res)


def spatial_roots(w0: MomentState, omega: float, tau: float) -> np.ndarray:
    """Finite roots k of det(i omega B0 - i k B1 - Q) = 0 for real omega."""
    b0, b1, q = linearization(w0, tau)
    vals = scipy.linalg.eig(omega * b0 + 1j * q, b1, right=False, homogeneous_eigvals=True)
    alpha, beta = vals
    finite = np.abs(beta) > 1e-12 * np.abs(alpha).max()
    return alpha[finite] / beta[finite]


def lorentz_boost(w: MomentState, v: float) -> MomentState:
    """State seen from a frame moving with velocity v; only u changes."""
    if not abs(v) < 1:
        raise ValueError("boost velocity must satisfy |v| < 1")
    u = (w.u - v) / (1.0 - w.u * v)
    return MomentState(w.m, w.rho, u, w.theta, w.pi, w.n1_tilde, w.f_hi.copy())


def moment_operator(w: MomentState, dwdt, dwdx) -> np.ndarray:
    """B0 W_t + B1 W_x at state w."""
    sm = assemble_transport(w)
    return sm.B0 @ np.asarray(dwdt) + sm.B1 @ np.asarray(dwdx)


def covariance_residual(path, m: int, t: float, x: float, v: float, h: float = 1e-5) -> float:
    """Relative mismatch of the moment operator between the lab and a boosted frame.

    ``path(t, x)`` returns the state vector W.  Derivatives in the boosted frame
    follow from d/dt' = gamma (d/dt + v d/dx), d/dx' = gamma (d/dx + v d/dt) and
    du'/du = (1 - v^2) / (1 - u v)^2.
    """
    w = np.asarray(path(t, x), dtype=float)
    wt = (np.asarray(path(t + h, x)) - np.asarray(path(t - h, x))) / (2 * h)
    wx = (np.asarray(path(t, x + h)) - np.asarray(path(t, x - h))) / (2 * h)
    state = MomentState.from_vector(m, w)
    lab = moment_operator(state, wt, wx)
    gam = 1.0 / np.sqrt(1.0 - v * v)
    jac = np.ones_like(w)
    jac[1] = (1.0 - v * v) / (1.0 - w[1] * v) ** 2
    boosted = lorentz_boost(state, v)
    moved = moment_operator(boosted, jac * gam * (wt + v * wx), jac * gam * (wx + v * wt))
    return float(np.linalg.norm(moved - lab) / max(np.linalg.norm(lab), 1e-300))


def hyperbolicity_report(w: MomentState, cond_limit: float = 1e10) -> HyperbolicityReport:
    tab = tables_for(w.theta, w.m)
    sm = assemble_transport(w, tab)
    vals, vecs = np.linalg.eig(np.linalg.solve(sm.B0, sm.B1))
    order = np.argsort(vals.real)
    vals, vecs = vals[order], vecs[:, order]
    spec = pencil_eigens(tab, w.m)
    predicted = wave_speeds(spec, w.u)
    real = np.abs(vals.imag).max() < 1e-10
    gap = float(np.min(np.diff(vals.real))) if vals.size > 1 else np.inf
    cond = float(np.linalg.cond(vecs))
    det_d = float(np.linalg.det(sm.D))
    radius = float(np.abs(vals).max())
    ill = cond > cond_limit or abs(det_d) < 1e-12 * max(1.0, np.abs(sm.D).max()) ** len(vals)
    passed = bool(real and radius < 1 and gap > 0 and np.all(np.isfinite(vals)))
    return HyperbolicityReport(w.m, vals.real.copy(), predicted, cond, radius, det_d, gap, bool(ill), passed)


def field_nonlinearity(w: MomentState, i: int, tab=None) -> float:
    """grad(lambda_i) . r_i with the closed-form right eigenvector, r_i of unit length.

    lambda_i = (u - lh) / (1 - u lh) depends on u and theta only, with
    d lh / d zeta = z' / (z^2 sqrt(z^2 - 1)) for lh = sqrt(z^2 - 1) / z.
    """
    tab = tables_for(w.theta, w.m) if tab is None else tab
    m, u = w.m, w.u
    spec = pencil_eigens(tab, m)
    lh = spec.lambda_hat[m + i]
    if i == 0:
        y = closed_form_eigvec(tab, m, None)
        dlh = 0.0
    else:
        z = spec.z[m + i]
        y = closed_form_eigvec(tab, m, z)
        dlh = dz_dzeta(tab, m, abs(z)) * np.sign(z) / (z * z * np.sqrt(z * z - 1.0))
    r = np.linalg.solve(assemble_D(w, tab), y[permutation(m)])
    r /= np.linalg.norm(r)
    den = (1.0 - u * lh) ** 2
    grad = np.zeros_like(r)
    grad[1] = (1.0 - lh * lh) / den
    grad[2] = -(1.0 - u * u) / den * dlh * (-tab.zeta**2)
    return float(grad @ r)


def char_field_survey(m: int, zetas, i: int = 1) -> np.ndarray:
    """Samples of the genuine-nonlinearity indicator of field i over a grid of zeta."""
    out = []
    for zeta in np.asarray(zetas, dtype=float):
        tab = build_tables(float(zeta), m + 2)
        out.append(char_indicator(tab, pencil_eigens(tab, m), m, i))
    return np.asarray(out)


def sign_changes(values) -> int:
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
