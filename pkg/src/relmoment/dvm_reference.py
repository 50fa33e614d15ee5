"""Discrete-velocity reference solver for the 1D Anderson-Witting equation.

The kinetic equation p^alpha d_alpha f = -(E/tau)(f - f_eq) is discretized in the
lab rapidity t (p = sinh t, p0 = cosh t, dp/p0 = dt) with Gauss-Legendre nodes on
[-t_max, t_max].  The weights therefore carry the invariant measure directly and
node sums of w_j p^alpha_j f_j are the moments N^alpha.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, ConvergenceError
from .recovery import TensorMoments, recover_batch
from .specfun import g_ratio
from scipy import special

__all__ = [
    "VelocityGrid",
    "DvmField",
    "velocity_grid",
    "equilibrium",
    "moments",
    "macroscopic",
    "dvm_initial",
    "dvm_step",
    "dvm_run",
]


@dataclass(frozen=True)
class VelocityGrid:
    t: np.ndarray
    w: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return np.sinh(self.t)

    @property
    def p0(self) -> np.ndarray:
        return np.cosh(self.t)

    @property
    def speed(self) -> np.ndarray:
        return np.tanh(self.t)


def velocity_grid(nodes: int = 50, t_max: float = 6.0) -> VelocityGrid:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return VelocityGrid(t_max * x, t_max * w)


@dataclass
class DvmField:
    x: np.ndarray
    dx: float
    t: float
    f: np.ndarray  # (cells, nodes)
    grid: VelocityGrid


def equilibrium(grid: VelocityGrid, rho, u, theta) -> np.ndarray:
    """Juttner values rho exp(-E/theta) / (2 K1(1/theta)) at the nodes, one row per cell."""
    rho, u, theta = (np.atleast_1d(np.asarray(v, dtype=float))[:, None] for v in (rho, u, theta))
    zeta = 1.0 / theta
    gam = 1.0 / np.sqrt(1.0 - u * u)
    e = gam * (grid.p0 - u * grid.p)
    return rho * np.exp(-zeta * (e - 1.0)) / (2.0 * special.kve(1, zeta))


def moments(grid: VelocityGrid, f) -> TensorMoments:
    f = np.atleast_2d(f)
    p0, p, w = grid.p0, grid.p, grid.w
    return TensorMoments(
        n0=f @ (w * p0), n1=f @ (w * p),
        t00=f @ (w * p0 * p0), t01=f @ (w * p0 * p), t11=f @ (w * p * p))


def macroscopic(grid: VelocityGrid, f) -> dict[str, np.ndarray]:
    """rho, u, theta, P0 and the Landau-frame Pi, n1_tilde of node values."""
    nm = moments(grid, f)
    rho, u, theta = recover_batch(nm)
    gam = 1.0 / np.sqrt(1.0 - u * u)
    eps = rho * (g_ratio(1.0 / theta) - theta)
    press = (nm.t11 - eps * (gam * u) ** 2) / gam**2
    n1 = nm.n1 - rho * gam * u
    return {"rho": rho, "u": u, "theta": theta, "p0": rho * theta,
            "pi": press - rho * theta, "n1": n1 / gam}


def dvm_initial(x, wl, wr, grid: VelocityGrid, split: float = 0.0) -> DvmField:
    left = x < split
    rho = np.where(left, wl[0], wr[0])
    u = np.where(left, wl[1], wr[1])
    theta = np.where(left, wl[2], wr[2])
    return DvmField(x, float(x[1] - x[0]), 0.0, equilibrium(grid, rho, u, theta), grid)


def _upwind(f, speed, dt, dx):
    ghost = np.concatenate([f[:1], f, f[-1:]], axis=0)
    pos = np.maximum(speed, 0.0)
    neg = np.minimum(speed, 0.0)
    flux = pos * ghost[:-1] + neg * ghost[1:]  # interfaces 0..n
    return f - (dt / dx) * (flux[1:] - flux[:-1])


def _relaxed(grid: VelocityGrid, fs, params, dt, kn):
    rho, u, theta = params
    gam = 1.0 / np.sqrt(1.0 - u * u)[:, None]
    e = gam * (grid.p0 - u[:, None] * grid.p)
    h = dt * e * rho[:, None] / (kn * grid.p0)
    return (fs + h * equilibrium(grid, rho, u, theta)) / (1.0 + h)


def _conserved(grid: VelocityGrid, f):
    return f @ np.stack([grid.w * grid.p0, grid.w * grid.p0**2, grid.w * grid.p0 * grid.p], axis=1)


def dvm_step(fld: DvmField, dt: float, kn: float, tol: float = 1e-14, max_iter: int = 30) -> DvmField:
    """Upwind transport, then implicit relaxation toward a conservative equilibrium.

    The relaxation rate of node j is E_j / (p0_j tau) with tau = kn / rho.  The
    equilibrium parameters start from the recovered frame of the transported values
    and are corrected by Newton's method until the relaxed node values carry the
    same N0, T00, T01, so the relaxation conserves them to rounding.
    """
    grid = fld.grid
    fs = _upwind(fld.f, grid.speed, dt, fld.dx)
    try:
        rho, u, theta = recover_batch(moments(grid, fs))
    except AdmissibilityError as exc:
        raise AdmissibilityError(f"DVM recovery at t={fld.t + dt:.6g}: {exc}") from exc
    target = _conserved(grid, fs)
    scale = np.abs(target).max(axis=1)
    # unknowns y = (log rho, artanh u, log theta) keep the parameters admissible
    y = np.stack([np.log(rho), np.arctanh(u), np.log(theta)], axis=1)
    params = lambda y: (np.exp(y[:, 0]), np.tanh(y[:, 1]), np.exp(y[:, 2]))
    for _ in range(max_iter):
        res = _conserved(grid, _relaxed(grid, fs, params(y), dt, kn)) - target
        if np.all(np.abs(res).max(axis=1) <= tol * scale):
            break
        jac = np.empty((y.shape[0], 3, 3))
        for k in range(3):
            dy = np.zeros_like(y)
            dy[:, k] = 1e-7
            up = _conserved(grid, _relaxed(grid, fs, params(y + dy), dt, kn))
            dn = _conserved(grid, _relaxed(grid, fs, params(y - dy), dt, kn))
            jac[:, :, k] = (up - dn) / 2e-7
        y = y - np.linalg.solve(jac, res[..., None])[..., 0]
    else:
        raise ConvergenceError(f"DVM relaxation did not converge at t={fld.t + dt:.6g}")
    return DvmField(fld.x, fld.dx, fld.t + dt, _relaxed(grid, fs, params(y), dt, kn), grid)


def dvm_run(cfg, nodes: int = 50, t_max: float = 6.0, on_snapshot=None):
    """Run with the HME config schema (the order m is ignored)."""
    grid = velocity_grid(nodes, t_max)
    x = cfg.x_lo + (np.arange(cfg.cells) + 0.5) * cfg.dx
    fld = dvm_initial(x, cfg.wl, cfg.wr, grid, 0.5 * (cfg.x_lo + cfg.x_hi))
    times = np.linspace(cfg.t_end / cfg.snapshots, cfg.t_end, cfg.snapshots)
    snaps = [fld]
    if on_snapshot:
        on_snapshot(fld)
    start = time.perf_counter()
    steps = 0
    for t_out in times:
        while fld.t < t_out - 1e-12 * max(1.0, t_out):
            fld = dvm_step(fld, min(cfg.dt, t_out - fld.t), cfg.kn)
            steps += 1
        snaps.append(fld)
        if on_snapshot:
            on_snapshot(fld)
    return snaps, {"steps": steps, "wall": time.perf_counter() - start}
