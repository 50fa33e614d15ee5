"""Moments, primitive recovery and frame changes for coefficient vectors.

Units are c = m = 1.  A frame is a pair (u, theta); in frame (u, theta) a lab
momentum p has frame energy E = gamma (p0 - u p) and transverse variable
s = u E - p / gamma, so that E^2 - s^2 = 1 and p0 = gamma (E - u s),
p = gamma (u E - s).  Both E and s are boost invariant when the frame is
boosted along with the momentum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, ConvergenceError
from .moment_model import MomentState, pos0, pos1, tables_for
from .orthopoly import PolyTables, eval_family, gauss_rule
from .specfun import g_ratio, g_ratio_prime

__all__ = [
    "TensorMoments",
    "moments_from_state",
    "frame_moments",
    "solve_velocity",
    "solve_theta",
    "recover_primitives",
    "recover_batch",
    "basis_values",
    "reprojection_matrix",
    "reproject",
    "frame_variables",
    "boost_momentum",
    "boost_moments",
    "THETA_TOL",
]

THETA_TOL = 1e-12
_VELOCITY_ZERO = 1e-14


@dataclass(frozen=True)
class TensorMoments:
    """N^alpha and the symmetric T^{alpha beta} in 1D; fields may be arrays."""

    n0: np.ndarray | float
    n1: np.ndarray | float
    t00: np.ndarray | float
    t01: np.ndarray | float
    t11: np.ndarray | float

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.n0, self.n1, self.t00, self.t01, self.t11), axis=-1)

    @classmethod
    def from_array(cls, arr) -> "TensorMoments":
        arr = np.asarray(arr, dtype=float)
        return cls(*(arr[..., k] for k in range(5)))

    def violations(self) -> list[str]:
        """Names of the admissibility inequalities that fail (any cell)."""
        t00, t01, t11 = (np.asarray(v, dtype=float) for v in (self.t00, self.t01, self.t11))
        checks = {
            "(t00+t11)^2 > 4 t01^2": (t00 + t11) ** 2 > 4 * t01**2,
            "t00 > 0": t00 > 0,
            "t11 > 0": t11 > 0,
            "t00+t11 +- 2 t01 > 0": (t00 + t11 - 2 * np.abs(t01)) > 0,
        }
        return [name for name, ok in checks.items() if not np.all(ok)]


def moments_from_state(w: MomentState, tab: PolyTables | None = None) -> TensorMoments:
    """Landau decomposition N = rho U + n, T = eps U U - Delta (P0 + Pi)."""
    del tab  # the decomposition only needs G(zeta), kept for interface symmetry
    g0 = w.gamma
    g1 = g0 * w.u
    eps = w.rho * (g_ratio(w.zeta) - w.theta)
    press = w.rho * w.theta + w.pi
    # n^alpha U_alpha = 0 fixes n0 = u n1; n1_tilde = n1 / gamma
    n1 = g0 * w.n1_tilde
    return TensorMoments(
        n0=w.rho * g0 + w.u * n1,
        n1=w.rho * g1 + n1,
        t00=eps * g0 * g0 + g1 * g1 * press,
        t01=(eps + press) * g0 * g1,
        t11=eps * g1 * g1 + g0 * g0 * press,
    )


def _frame_functionals(f, tab: PolyTables, m: int):
    """int Pi f, int E Pi f, int E^2 Pi f, int s Pi f, int E s Pi f in the frame of ``tab``."""
    f = np.asarray(f, dtype=float)
    a = tab.a
    b = tab.b
    c = tab.c
    a00, a01, b00, b01, c00 = a[..., 0, 0], a[..., 0, 1], b[..., 0, 0], b[..., 0, 1], c[..., 0, 0]
    a10, b10, c10 = a[..., 1, 0], b[..., 1, 0], c[..., 1, 0]
    f0, f1, g0 = f[..., pos0(0)], f[..., pos0(1)], f[..., pos1(0)]
    f2 = f[..., pos0(2)] if m >= 2 else 0.0
    g1 = f[..., pos1(1)] if m >= 2 else 0.0
    x0 = f0 / c00
    x1 = (b00 * f0 + a00 * f1) / c00
    x2 = ((b00**2 + a00**2) * f0 + a00 * (b00 + b01) * f1 + a00 * a01 * f2) / c00
    y0 = g0 / c10
    y1 = (b10 * g0 + a10 * g1) / c10
    return x0, x1, x2, y0, y1


def frame_moments(f, tab: PolyTables, u, m: int) -> TensorMoments:
    """Lab-frame N^alpha, T^{alpha beta} of the function with coefficients f in frame (u, tab)."""
    x0, x1, x2, y0, y1 = _frame_functionals(f, tab, m)
    u = np.asarray(u, dtype=float)
    g0 = 1.0 / np.sqrt(1.0 - u * u)
    g1 = g0 * u
    s2 = x2 - x0
    return TensorMoments(
        n0=g0 * x1 - g1 * y0,
        n1=g1 * x1 - g0 * y0,
        t00=g0 * g0 * x2 - 2 * g0 * g1 * y1 + g1 * g1 * s2,
        t01=g0 * g1 * (x2 + s2) - (g0 * g0 + g1 * g1) * y1,
        t11=g1 * g1 * x2 - 2 * g0 * g1 * y1 + g0 * g0 * s2,
    )


def _velocity(t00, t01, t11):
    s = t00 + t11
    disc = s * s - 4 * t01 * t01
    if np.any(~(disc > 0)):
        bad = np.flatnonzero(~(np.atleast_1d(disc) > 0))
        raise AdmissibilityError(f"velocity discriminant non-positive (cell {bad[0]})")
    # q-formula: the small root without cancellation
    u = 2 * t01 / (s + np.sqrt(disc))
    return np.where(np.abs(t01) < _VELOCITY_ZERO * s, 0.0, u)


def solve_velocity(t: TensorMoments):
    """Root with |u| < 1 of t01 u^2 - (t00 + t11) u + t01 = 0."""
    u = _velocity(*(np.asarray(v, dtype=float) for v in (t.t00, t.t01, t.t11)))
    return float(u) if np.ndim(u) == 0 else u


def _theta_newton(target, theta0=None, max_iter: int = 100):
    """Vectorized Newton for G(1/theta) - theta = target.  Returns (theta, iterations)."""
    target = np.asarray(target, dtype=float)
    if np.any(~(target > 1)):
        bad = np.flatnonzero(~(np.atleast_1d(target) > 1))
        raise AdmissibilityError(
            f"energy per particle must exceed 1, got {np.atleast_1d(target)[bad[0]]} (cell {bad[0]})")
    if theta0 is None:
        theta = np.maximum(target - 1.0, 1e-3) * (2.0 / 3.0)
    else:
        theta = np.broadcast_to(np.asarray(theta0, dtype=float), target.shape).copy()
        if np.any(~(theta > 0)):
            raise ValueError("initial temperature must be positive")
    active = np.ones(target.shape, dtype=bool)
    iters = 0
    while np.any(active):
        if iters >= max_iter:
            raise ConvergenceError(f"temperature Newton did not converge in {max_iter} iterations")
        iters += 1
        zeta = 1.0 / theta
        g = g_ratio(zeta)
        h = g - theta - target
        dh = -zeta * zeta * g_ratio_prime(zeta) - 1.0
        step = h / dh
        new = theta - step
        # convexity keeps iterates positive after the first step; guard the first one
        new = np.where(new > 0, new, 0.5 * theta)
        done = (np.abs(h) < THETA_TOL) | (np.abs(step) <= 4 * np.finfo(float).eps * theta)
        theta = np.where(active & ~done, new, theta)
        active &= ~done
    return theta, iters


def solve_theta(rho, t: TensorMoments, u, theta0=None, return_iterations: bool = False):
    """Temperature from G(1/theta) - theta = (t00 - u t01) / rho."""
    rho = np.asarray(rho, dtype=float)
    target = (np.asarray(t.t00, dtype=float) - np.asarray(u, dtype=float) * np.asarray(t.t01, dtype=float)) / rho
    theta, iters = _theta_newton(target, theta0)
    theta = float(theta) if np.ndim(theta) == 0 else theta
    return (theta, iters) if return_iterations else theta


def recover_batch(nm: TensorMoments):
    """(rho, u, theta) arrays from moment arrays, raising on the first bad cell."""
    names = nm.violations()
    if names:
        raise AdmissibilityError("non-admissible moments: " + ", ".join(names))
    n0, n1 = np.asarray(nm.n0, dtype=float), np.asarray(nm.n1, dtype=float)
    u = _velocity(*(np.asarray(v, dtype=float) for v in (nm.t00, nm.t01, nm.t11)))
    rho = (n0 - u * n1) / np.sqrt(1.0 - u * u)
    if np.any(~(rho > 0)):
        bad = np.flatnonzero(~(np.atleast_1d(rho) > 0))
        raise AdmissibilityError(f"recovered density non-positive (cell {bad[0]})")
    theta = solve_theta(rho, nm, u)
    return rho, u, theta


def recover_primitives(nm: TensorMoments):
    rho, u, theta = recover_batch(nm)
    if np.ndim(rho) == 0:
        return float(rho), float(u), float(theta)
    return rho, u, theta


# --- frames and boosts -----------------------------------------------------------

def frame_variables(p, u):
    """(E, s) of lab momentum p in a frame moving with velocity u."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    gam = 1.0 / np.sqrt(1.0 - u * u)
    p0 = np.sqrt(1.0 + p * p)
    e = gam * (p0 - u * p)
    return e, u * e - p / gam


def boost_momentum(p, v):
    """Momentum seen from a frame moving with velocity v."""
    p = np.asarray(p, dtype=float)
    gam = 1.0 / np.sqrt(1.0 - v * v)
    return gam * (p - v * np.sqrt(1.0 + p * p))


def boost_moments(t: TensorMoments, v: float) -> TensorMoments:
    """Rank-1 and rank-2 tensor transformation to the frame moving with velocity v."""
    if not abs(v) < 1:
        raise ValueError("boost velocity must satisfy |v| < 1")
    gam = 1.0 / np.sqrt(1.0 - v * v)
    lam = np.array([[gam, -gam * v], [-gam * v, gam]])
    n = lam @ np.array([t.n0, t.n1])
    tt = lam @ np.array([[t.t00, t.t01], [t.t01, t.t11]]) @ lam.T
    return TensorMoments(n[0], n[1], tt[0, 0], tt[0, 1], tt[1, 1])


# --- reprojection ----------------------------------------------------------------

def basis_values(tab: PolyTables, m: int, e, s):
    """Test functions psi_j at frame variables (e, s); slot axis first."""
    v0 = eval_family(tab, 0, m, e)
    s = np.asarray(s, dtype=float)
    out = np.empty((2 * m + 1,) + v0.shape[1:])
    for n in range(m + 1):
        out[pos0(n)] = v0[n]
    if m >= 1:
        v1 = eval_family(tab, 1, m - 1, e)
        for n in range(m):
            out[pos1(n)] = s * v1[n]
    return out


def reprojection_matrix(tab_src: PolyTables, u_src, tab_dst: PolyTables, u_dst, m: int) -> np.ndarray:
    """R with coefficients_dst = R @ coefficients_src (batched over leading axes).

    Entries are the cross-frame products int g_src psi^src_k psi^dst_j dt, evaluated by a
    Gauss rule of the source weight; after folding the odd part in s the integrand is a
    polynomial of degree <= 2m in E, so m+2 nodes are exact.
    """
    nodes = m + 2
    if nodes > tab_src.n_max + 2:
        raise ValueError(f"source tables hold {tab_src.n_max + 2} Gauss nodes, order {m} needs {nodes}")
    x, w = gauss_rule(tab_src, 0, nodes)
    sq = np.sqrt(np.maximum(x * x - 1.0, 0.0))
    e_src = np.concatenate([x, x], axis=-1)
    s_src = np.concatenate([sq, -sq], axis=-1)
    wq = 0.5 * np.concatenate([w, w], axis=-1)
    us = np.asarray(u_src, dtype=float)[..., None]
    ud = np.asarray(u_dst, dtype=float)[..., None]
    gs = 1.0 / np.sqrt(1.0 - us * us)
    p0 = gs * (e_src - us * s_src)
    p1 = gs * (us * e_src - s_src)
    gd = 1.0 / np.sqrt(1.0 - ud * ud)
    e_dst = gd * (p0 - ud * p1)
    s_dst = ud * e_dst - p1 / gd
    psi_src = basis_values(tab_src, m, e_src, s_src)
    psi_dst = basis_values(tab_dst, m, e_dst, s_dst)
    return np.einsum("j...q,k...q,...q->...jk", psi_dst, psi_src, wq)


def reproject(f, src, dst, m: int, tabs: tuple[PolyTables, PolyTables] | None = None) -> np.ndarray:
    """Coefficients of Pi[dst] Pi[src] f given the coefficients of Pi[src] f.

    ``src`` and ``dst`` are (u, theta) pairs.
    """
    if tabs is None:
        tabs = (tables_for(src[1], m), tables_for(dst[1], m))
    r = reprojection_matrix(tabs[0], src[0], tabs[1], dst[0], m)
    return np.einsum("...jk,...k->...j", r, np.asarray(f, dtype=float))
