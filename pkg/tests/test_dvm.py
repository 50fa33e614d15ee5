import numpy as np
import pytest

from relmoment.dvm_reference import (DvmField, dvm_initial, dvm_run, dvm_step, equilibrium,
                                     macroscopic, moments, velocity_grid)
from relmoment.hme_solver import SolverConfig
from relmoment.moment_model import MomentState
from relmoment.recovery import moments_from_state, recover_batch


def test_grid_is_subluminal_and_symmetric():
    g = velocity_grid(50)
    assert np.all(np.abs(g.speed) < 1)
    assert np.allclose(g.t, -g.t[::-1]) and np.allclose(g.w, g.w[::-1])
    assert g.w.sum() == pytest.approx(12.0, rel=1e-14)


def test_equilibrium_moments_match_closed_forms():
    g = velocity_grid(50)
    for rho, u, theta in ((1.0, 0.0, 1.0), (7.0, 0.5, 0.6), (0.3, -0.8, 0.3)):
        got = moments(g, equilibrium(g, rho, u, theta))
        want = moments_from_state(MomentState(1, rho, u, theta))
        assert np.allclose(got.as_array()[0], want.as_array(), rtol=1e-9)


def test_equilibrium_recovery_consistency():
    """Recovered (rho, u, theta) of node-sampled equilibria, theta in [0.3, 1], |u| <= 0.9."""
    g = velocity_grid(50)
    rho, u, theta = (a.ravel() for a in np.meshgrid([0.5, 1.0, 7.0], np.linspace(-0.9, 0.9, 7),
                                                  np.geomspace(0.3, 1.0, 6)))
    r, v, t = recover_batch(moments(g, equilibrium(g, rho, u, theta)))
    assert np.abs(r / rho - 1).max() < 1e-8
    assert np.abs(v - u).max() < 1e-8
    assert np.abs(t / theta - 1).max() < 1e-8


def test_macroscopic_of_equilibrium():
    g = velocity_grid(50)
    out = macroscopic(g, equilibrium(g, [2.0, 1.0], [0.3, -0.2], [0.8, 1.1]))
    assert np.allclose(out["p0"], [1.6, 1.1], rtol=1e-9)
    assert np.abs(out["pi"]).max() < 1e-8 and np.abs(out["n1"]).max() < 1e-8


def test_uniform_equilibrium_is_stationary():
    g = velocity_grid(50)
    x = np.linspace(0, 1, 20)
    fld = dvm_initial(x, (1.5, 0.4, 0.9), (1.5, 0.4, 0.9), g, 2.0)
    out = dvm_step(dvm_step(fld, 0.04, 0.05), 0.04, 0.05)
    assert np.abs(out.f - fld.f).max() < 1e-12 * fld.f.max()


def test_step_conserves_node_sums():
    g = velocity_grid(50)
    x = np.linspace(-1, 1, 80)
    fld = dvm_initial(x, (7.0, 0.0, 1.0), (1.0, 0.0, 1.0), g)
    dt = 0.9 * fld.dx
    total = lambda f: fld.dx * moments(g, f).as_array()[:, [0, 2, 3]].sum(axis=0)
    before = total(fld.f)
    # copy boundaries: inflow of p0 * (1, p0, p) f through each end
    edge = moments(g, fld.f[[0, -1]]).as_array()[:, [1, 3, 4]]
    out = dvm_step(fld, dt, 0.05)
    drift = total(out.f) - before - dt * (edge[0] - edge[1])
    assert np.abs(drift).max() < 1e-12 * np.abs(before).max()


def test_relaxation_drives_to_equilibrium():
    g = velocity_grid(50)
    f = np.vstack([equilibrium(g, 1.0, 0.0, 1.0)[0] * (1 + 0.3 * np.tanh(g.t))] * 3)
    fld = DvmField(np.arange(3.0), 1.0, 0.0, f, g)
    out = dvm_step(fld, 1e-3, 1e-9)
    prim = macroscopic(g, out.f)
    eq = equilibrium(g, prim["rho"], prim["u"], prim["theta"])
    assert np.abs(out.f - eq).max() < 1e-5 * eq.max()
    assert np.allclose(moments(g, out.f).n0, moments(g, f).n0, rtol=1e-12)


def test_node_refinement_orders_at_coarse_grid():
    cfg = SolverConfig(cells=200, t_end=0.1, kn=0.05)
    rho = {n: macroscopic(*(lambda s: (s.grid, s.f))(dvm_run(cfg, nodes=n)[0][-1]))["rho"]
           for n in (30, 50, 80)}
    l1 = lambda a, b: np.abs(rho[a] - rho[b]).sum() * cfg.dx
    assert l1(50, 80) < l1(30, 80)


@pytest.mark.slow
def test_node_refinement_reference_resolution():
    cfg = SolverConfig(cells=2000, t_end=0.3, kn=0.05)
    out = {}
    for n in (50, 80):
        s = dvm_run(cfg, nodes=n)[0][-1]
        out[n] = macroscopic(s.grid, s.f)
    for key in ("rho", "u", "theta"):
        assert np.abs(out[50][key] - out[80][key]).sum() * cfg.dx < 1e-4
