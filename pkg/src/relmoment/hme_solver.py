"""First-order semi-implicit finite-volume scheme for the order-M moment system.

Each cell carries a coefficient vector in its own frame (u_i, theta_i).  A step is

1. non-conservative HLL convection in the time-n frames, solving
   Mt f* = Mt f - dt/dx (F-_{i+1/2} - F+_{i-1/2});
2. recovery of (rho*, u*, theta*) from the moments of f* and reprojection;
3. implicit Anderson-Witting relaxation in the starred frame;
4. recovery of the new frame and reprojection.

All per-cell work is vectorized over the grid.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, ConvergenceError
from .moment_model import MomentState, coefficients, tables_for, transport_matrices
from .orthopoly import PolyTables, batch_tables
from .recovery import frame_moments, recover_batch, reprojection_matrix
from .spectral import max_frame_speed

__all__ = [
    "SolverConfig",
    "GridField",
    "StepFailure",
    "initial_field",
    "cell_tables",
    "take_tables",
    "wave_speed_bounds",
    "hll_flux",
    "hll_interface",
    "convection_step",
    "collision_matrix",
    "collision_step",
    "step",
    "run",
    "conserved_totals",
    "boundary_flux",
]


class StepFailure(AdmissibilityError):
    """A cell became non-admissible during a step."""


@dataclass(frozen=True)
class SolverConfig:
    m: int = 1
    kn: float = 0.05
    cfl: float = 0.9
    t_end: float = 0.3
    cells: int = 1000
    x_lo: float = -1.5
    x_hi: float = 1.5
    wl: tuple = (7.0, 0.0, 1.0)
    wr: tuple = (1.0, 0.0, 1.0)
    snapshots: int = 1
    collision_frame: str = "consistent"

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if not self.kn > 0:
            raise ValueError("kn must be positive")
        if self.m < 1:
            raise ValueError("order must be >= 1")
        if self.cells < 2 or not self.x_hi > self.x_lo:
            raise ValueError("need at least two cells on a non-empty domain")
        if self.snapshots < 1:
            raise ValueError("snapshots must be >= 1")
        if self.collision_frame not in ("consistent", "starred"):
            raise ValueError("collision_frame must be 'consistent' or 'starred'")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.cells

    @property
    def dt(self) -> float:
        return self.cfl * self.dx

    @classmethod
    def from_dict(cls, raw: dict) -> "SolverConfig":
        raw = dict(raw)
        if "domain" in raw:
            raw["x_lo"], raw["x_hi"] = raw.pop("domain")
        raw.pop("out_dir", None)
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        for key in ("wl", "wr"):
            if key in raw:
                raw[key] = tuple(float(v) for v in raw[key])
        return cls(**raw)


@dataclass
class GridField:
    m: int
    x: np.ndarray
    dx: float
    t: float
    f: np.ndarray  # (cells, 2m+1) coefficients, each in its own frame
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    tab: PolyTables | None = field(default=None, repr=False)

    @property
    def cells(self) -> int:
        return self.x.size

    def primitives(self) -> dict[str, np.ndarray]:
        from .moment_model import pos0, pos1
        from .orthopoly import eval_poly

        if self.m == 1:
            pi = np.zeros_like(self.rho)
            n1 = np.zeros_like(self.rho)
        else:
            tab = self.tab
            pi = -self.f[:, pos0(1)] / eval_poly(tab, 0, 1, np.zeros_like(self.rho))
            n1 = -self.f[:, pos1(0)] / tab.c[..., 1, 0]
        return {"x": self.x, "rho": self.rho, "u": self.u, "theta": self.theta,
                "p0": self.rho * self.theta, "pi": pi, "n1": n1}


def cell_tables(theta, m: int) -> PolyTables:
    return batch_tables(1.0 / np.asarray(theta, dtype=float), m + 2)


def take_tables(tab: PolyTables, idx) -> PolyTables:
    """Tables of a batch re-indexed along the cell axis."""
    pick = lambda arr: None if arr is None else np.asarray(arr)[idx]
    return dataclasses.replace(
        tab, zeta=pick(tab.zeta), g=pick(tab.g), a=pick(tab.a), b=pick(tab.b), c=pick(tab.c),
        p=pick(tab.p), q=pick(tab.q), r=pick(tab.r), pt=pick(tab.pt), qt=pick(tab.qt), rt=pick(tab.rt))


def _state(m: int, w) -> MomentState:
    w = np.zeros(2 * m + 1) + np.pad(np.asarray(w, dtype=float), (0, max(0, 2 * m + 1 - len(w))))[: 2 * m + 1]
    return MomentState.from_vector(m, w)


def initial_field(cfg: SolverConfig) -> GridField:
    m = cfg.m
    x = cfg.x_lo + (np.arange(cfg.cells) + 0.5) * cfg.dx
    left = x < 0.5 * (cfg.x_lo + cfg.x_hi)
    states = (_state(m, cfg.wl), _state(m, cfg.wr))
    f = np.empty((cfg.cells, 2 * m + 1))
    rho, u, theta = (np.empty(cfg.cells) for _ in range(3))
    for mask, w in ((left, states[0]), (~left, states[1])):
        f[mask] = coefficients(w, tables_for(w.theta, m))
        rho[mask], u[mask], theta[mask] = w.rho, w.u, w.theta
    return GridField(m, x, cfg.dx, 0.0, f, rho, u, theta, cell_tables(theta, m))


def wave_speed_bounds(tab: PolyTables, m: int, u):
    """Per-cell slowest and fastest characteristic speeds."""
    lam = max_frame_speed(tab, m)
    u = np.asarray(u, dtype=float)
    return (u - lam) / (1 - u * lam), (u + lam) / (1 + u * lam)


def hll_flux(flux_l, flux_r, cons_l, cons_r, lam_l, lam_r):
    """Three-branch HLL combination of projected fluxes and projected densities."""
    lam_l = np.asarray(lam_l, dtype=float)[..., None]
    lam_r = np.asarray(lam_r, dtype=float)[..., None]
    width = np.where(lam_r > lam_l, lam_r - lam_l, 1.0)
    mid = (lam_r * flux_l - lam_l * flux_r + lam_l * lam_r * (cons_r - cons_l)) / width
    return np.where(lam_l >= 0, flux_l, np.where(lam_r <= 0, flux_r, mid))


def _apply(mat, vec):
    return np.einsum("...jk,...k->...j", mat, vec)


def hll_interface(g: GridField, i: int):
    """(F-, F+) at interface i+1/2: F- in the frame of cell i, F+ in the frame of cell i+1."""
    m = g.m
    pair = np.array([i, i + 1])
    tab = take_tables(g.tab, pair)
    u = g.u[pair]
    mt, mx, _ = transport_matrices(tab, m, u)
    smin, smax = wave_speed_bounds(tab, m, u)
    lam_l, lam_r = smin.min(), smax.max()
    r_to_left = reprojection_matrix(take_tables(tab, [1]), u[1:], take_tables(tab, [0]), u[:1], m)[0]
    r_to_right = reprojection_matrix(take_tables(tab, [0]), u[:1], take_tables(tab, [1]), u[1:], m)[0]
    left_own, right_seen = g.f[i], r_to_left @ g.f[i + 1]
    left_seen, right_own = r_to_right @ g.f[i], g.f[i + 1]
    f_minus = hll_flux(mx[0] @ left_own, mx[0] @ right_seen, mt[0] @ left_own, mt[0] @ right_seen, lam_l, lam_r)
    f_plus = hll_flux(mx[1] @ left_seen, mx[1] @ right_own, mt[1] @ left_seen, mt[1] @ right_own, lam_l, lam_r)
    return f_minus, f_plus


def _neighbours(n: int):
    idx = np.arange(n)
    return np.maximum(idx - 1, 0), np.minimum(idx + 1, n - 1)


def convection_step(g: GridField, dt: float):
    """HLL update; returns (f*, Mt, rhs) with f* still in the time-n frames."""
    m, n = g.m, g.cells
    left, right = _neighbours(n)
    mt, mx, _ = transport_matrices(g.tab, m, g.u)
    smin, smax = wave_speed_bounds(g.tab, m, g.u)
    # interface k sits between cells k-1 and k (k = 0..n) with copied ghosts
    lo = np.concatenate([[0], np.arange(n)])
    hi = np.concatenate([np.arange(n), [n - 1]])
    lam_l = np.minimum(smin[lo], smin[hi])
    lam_r = np.maximum(smax[lo], smax[hi])
    r_from_right = reprojection_matrix(take_tables(g.tab, right), g.u[right], g.tab, g.u, m)
    r_from_left = reprojection_matrix(take_tables(g.tab, left), g.u[left], g.tab, g.u, m)
    own = g.f
    seen_r = _apply(r_from_right, g.f[right])
    seen_l = _apply(r_from_left, g.f[left])
    flux_own, cons_own = _apply(mx, own), _apply(mt, own)
    f_minus = hll_flux(flux_own, _apply(mx, seen_r), cons_own, _apply(mt, seen_r), lam_l[1:], lam_r[1:])
    f_plus = hll_flux(_apply(mx, seen_l), flux_own, _apply(mt, seen_l), cons_own, lam_l[:-1], lam_r[:-1])
    rhs = cons_own - (dt / g.dx) * (f_minus - f_plus)
    return np.linalg.solve(mt, rhs[..., None])[..., 0], mt, rhs


def _recover_frame(f, tab, u, m, t, stage):
    nm = frame_moments(f, tab, u, m)
    try:
        return recover_batch(nm)
    except AdmissibilityError as exc:
        bad = _first_bad_cell(nm)
        raise StepFailure(f"{stage} at t={t:.6g}: cell {bad}: {exc}") from exc
    except ConvergenceError as exc:
        raise StepFailure(f"{stage} at t={t:.6g}: {exc}") from exc


def _first_bad_cell(nm) -> int:
    t00, t01, t11 = (np.asarray(v) for v in (nm.t00, nm.t01, nm.t11))
    ok = (t00 > 0) & (t11 > 0) & ((t00 + t11) ** 2 > 4 * t01**2)
    s = t00 + t11
    with np.errstate(invalid="ignore", divide="ignore"):
        u = 2 * t01 / (s + np.sqrt(np.maximum(s * s - 4 * t01 * t01, 0.0)))
        rho = (np.asarray(nm.n0) - u * np.asarray(nm.n1)) / np.sqrt(1 - u * u)
        target = (t00 - u * t01) / rho
    ok &= (rho > 0) & (target > 1)
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if bad.size else -1


def _to_frame(f, tab_src, u_src, rho, u, theta, m):
    """Coefficients in the frame (u, theta); order 1 keeps only the equilibrium part."""
    tab = cell_tables(theta, m)
    if m == 1:
        out = np.zeros_like(f)
        out[:, 0] = rho / tab.c[..., 0, 0]
    else:
        out = _apply(reprojection_matrix(tab_src, u_src, tab, u, m), f)
    return out, tab


def collision_matrix(tab: PolyTables, m: int, u, rho, dt: float, kn: float):
    """Left-hand matrix Mt + (dt/tau) A0 (I - D_eq) and Mt itself, tau = kn/rho."""
    mt, _, pa0 = transport_matrices(tab, m, u)
    # D f = e0 (A0 f)_0 / c0^2; A0_00 equals c0^2 analytically and is used as the
    # normaliser so that equilibrium is an exact fixed point in floating point
    d_eq = np.zeros_like(pa0)
    d_eq[..., 0, :] = pa0[..., 0, :] / pa0[..., 0, :1]
    eye = np.eye(2 * m + 1)
    h = (dt * np.asarray(rho, dtype=float) / kn)[..., None, None]
    return mt + h * pa0 @ (eye - d_eq), mt


def collision_step(f, tab, u, rho, dt, kn, m):
    """Implicit relaxation of coefficients f held in frames (u, tab)."""
    lhs, mt = collision_matrix(tab, m, u, rho, dt, kn)
    return np.linalg.solve(lhs, _apply(mt, f)[..., None])[..., 0]


def _relax(f_star, g: GridField, frame, dt, kn, t_new):
    """Collision in the given frame; returns (f, tables, recovered frame of the result)."""
    rho, u, theta = frame
    fs, tab = _to_frame(f_star, g.tab, g.u, rho, u, theta, g.m)
    f = collision_step(fs, tab, u, rho, dt, kn, g.m)
    return f, tab, _recover_frame(f, tab, u, g.m, t_new, "collision recovery")


def _pack(frame):
    rho, u, theta = frame
    return np.stack([np.log(rho), u, np.log(theta)], axis=-1)


def _unpack(y):
    u = np.clip(y[:, 1], -1 + 1e-12, 1 - 1e-12)
    return np.exp(y[:, 0]), u, np.exp(y[:, 2])


def _consistent_frame(f_star, g, start, dt, kn, t_new, tol, max_iter, depth=3):
    """Anderson-accelerated fixed point: the relaxation frame equals the frame of its result."""
    y = _pack(start)
    dy_hist, df_hist = [], []
    y_prev = f_prev = None
    for _ in range(max_iter):
        f, tab, new = _relax(f_star, g, _unpack(y), dt, kn, t_new)
        res = _pack(new) - y
        if np.abs(res).max() < tol:
            return f, tab, _unpack(y), new
        if y_prev is not None:
            dy_hist.append(y - y_prev)
            df_hist.append(res - f_prev)
            dy_hist, df_hist = dy_hist[-depth:], df_hist[-depth:]
        y_prev, f_prev = y, res
        if df_hist:
            dfm = np.stack(df_hist, axis=-1)
            dym = np.stack(dy_hist, axis=-1)
            gam = np.einsum("cij,cj->ci", np.linalg.pinv(dfm), res)
            y = y + res - np.einsum("cij,cj->ci", dym + dfm, gam)
        else:
            y = y + res
    raise StepFailure(f"collision frame iteration did not converge at t={t_new:.6g}")


def step(g: GridField, dt: float, kn: float, collision_frame: str = "consistent",
         frame_tol: float = 1e-13, max_frame_iterations: int = 60) -> GridField:
    """One convection plus collision step.

    ``collision_frame="starred"`` relaxes in the frame recovered after convection, as
    in the plain semi-implicit splitting.  ``"consistent"`` iterates that frame until
    it equals the frame of the relaxed state, which makes the collision conserve
    N0, T00 and T01 exactly.
    """
    m = g.m
    f_star, _, _ = convection_step(g, dt)
    t_new = g.t + dt
    start = _recover_frame(f_star, g.tab, g.u, m, t_new, "convection recovery")
    if collision_frame == "starred" or m == 1:
        f_new, tab_s, new = _relax(f_star, g, start, dt, kn, t_new)
        used = start
    elif collision_frame == "consistent":
        f_new, tab_s, used, new = _consistent_frame(f_star, g, start, dt, kn, t_new,
                                                    frame_tol, max_frame_iterations)
    else:
        raise ValueError(f"unknown collision frame {collision_frame!r}")
    f_next, tab_n = _to_frame(f_new, tab_s, used[1], *new, m)
    return GridField(m, g.x, g.dx, t_new, f_next, *new, tab_n)


def conserved_totals(g: GridField, interior: slice | None = None) -> np.ndarray:
    """dx-weighted sums of N0, T00, T01 over the chosen cells."""
    nm = frame_moments(g.f, g.tab, g.u, g.m)
    sel = slice(None) if interior is None else interior
    return g.dx * np.array([np.sum(np.asarray(v)[sel]) for v in (nm.n0, nm.t00, nm.t01)])


def boundary_flux(g: GridField) -> np.ndarray:
    """Net inflow rate (left minus right) of N0, T00, T01 through the copy boundaries."""
    nm = frame_moments(g.f[[0, -1]], take_tables(g.tab, [0, -1]), g.u[[0, -1]], g.m)
    flux = np.array([np.asarray(v) for v in (nm.n1, nm.t01, nm.t11)])
    return flux[:, 0] - flux[:, 1]


def run(cfg: SolverConfig, on_snapshot=None, field0: GridField | None = None):
    """Advance to t_end; returns (snapshots, timings).  Steps are shortened to hit output times."""
    g = initial_field(cfg) if field0 is None else field0
    times = np.linspace(cfg.t_end / cfg.snapshots, cfg.t_end, cfg.snapshots)
    snaps = [g]
    if on_snapshot:
        on_snapshot(g)
    clock = {"steps": 0, "wall": 0.0}
    start = time.perf_counter()
    for t_out in times:
        while g.t < t_out - 1e-12 * max(1.0, t_out):
            dt = min(cfg.dt, t_out - g.t)
            g = step(g, dt, cfg.kn, cfg.collision_frame)
            clock["steps"] += 1
        snaps.append(g)
        if on_snapshot:
            on_snapshot(g)
    clock["wall"] = time.perf_counter() - start
    return snaps, clock
