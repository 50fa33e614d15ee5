"""Matrices of the order-M moment system for a single state.

Coefficient vectors use the interleaved basis order
(P0_0, P0_1, P1_0, P0_2, P1_1, ..., P0_M, P1_{M-1}); family-0 degree n sits at
slot ``pos0(n)`` and family-1 degree n at slot ``pos1(n)``.  The unknown vector
is W = (rho, u, theta, Pi, n1_tilde, f0_3, f1_2, ...), where the entries past the
fifth are coefficients at their interleaved slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError
from .orthopoly import PolyTables, build_tables, eval_family, eval_poly
from .spectral import PencilSpectrum, assemble_pencil, pencil_eigens

__all__ = [
    "MomentState",
    "SystemMatrices",
    "pos0",
    "pos1",
    "permutation",
    "permutation_matrix",
    "permuted_pencil",
    "tables_for",
    "equilibrium_coefficients",
    "assemble_DW",
    "coefficients",
    "state_from_coefficients",
    "assemble_D",
    "transport_matrices",
    "assemble_transport",
    "source_aw",
    "dz_dzeta",
    "char_indicator",
]


def pos0(n: int) -> int:
    return 0 if n == 0 else 2 * n - 1


def pos1(n: int) -> int:
    return 2 * n + 2


@dataclass(frozen=True)
class MomentState:
    m: int
    rho: float
    u: float
    theta: float
    pi: float = 0.0
    n1_tilde: float = 0.0
    f_hi: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        f_hi = np.asarray(self.f_hi, dtype=float).ravel()
        need = max(2 * self.m - 4, 0)
        if f_hi.size == 0 and need:
            f_hi = np.zeros(need)
        if f_hi.size != need:
            raise ValueError(f"order {self.m} needs {need} higher coefficients, got {f_hi.size}")
        object.__setattr__(self, "f_hi", f_hi)
        if self.m < 1:
            raise ValueError("order must be >= 1")
        if self.m == 1 and (self.pi != 0.0 or self.n1_tilde != 0.0):
            raise ValueError("order 1 carries no Pi or n1_tilde")
        check_admissible(self.rho, self.u, self.theta, self.pi)

    @property
    def gamma(self) -> float:
        return 1.0 / np.sqrt(1.0 - self.u * self.u)

    @property
    def zeta(self) -> float:
        return 1.0 / self.theta

    def vector(self) -> np.ndarray:
        head = [self.rho, self.u, self.theta]
        if self.m >= 2:
            head += [self.pi, self.n1_tilde]
        return np.concatenate([head, self.f_hi])

    @classmethod
    def from_vector(cls, m: int, w) -> "MomentState":
        w = np.asarray(w, dtype=float)
        if w.size != 2 * m + 1:
            raise ValueError(f"order {m} state needs {2 * m + 1} entries")
        if m == 1:
            return cls(1, *w[:3])
        return cls(m, w[0], w[1], w[2], w[3], w[4], w[5:])

    def is_equilibrium(self) -> bool:
        return self.pi == 0.0 and self.n1_tilde == 0.0 and not np.any(self.f_hi)


def check_admissible(rho, u, theta, pi=0.0) -> None:
    if not (np.isfinite(rho) and rho > 0):
        raise AdmissibilityError(f"density must be positive, got {rho}")
    if not abs(u) < 1:
        raise AdmissibilityError(f"velocity must satisfy |u| < 1, got {u}")
    if not (np.isfinite(theta) and theta > 0):
        raise AdmissibilityError(f"temperature must be positive, got {theta}")
    if not pi > -rho * theta:
        raise AdmissibilityError(f"bulk pressure {pi} must exceed -rho*theta = {-rho * theta}")


@dataclass(frozen=True)
class SystemMatrices:
    DW: np.ndarray
    D: np.ndarray
    Mt: np.ndarray
    Mx: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    Pp: np.ndarray  # index map: interleaved slot j holds stacked index Pp[j]
    S: np.ndarray | None = None


def tables_for(theta: float, m: int) -> PolyTables:
    return build_tables(1.0 / theta, m + 2)


def permutation(m: int) -> np.ndarray:
    idx = np.empty(2 * m + 1, dtype=int)
    idx[0] = 0
    for k in range(1, m + 1):
        idx[2 * k - 1] = k
        idx[2 * k] = m + k
    return idx


def permutation_matrix(m: int) -> np.ndarray:
    idx = permutation(m)
    pp = np.zeros((idx.size, idx.size))
    pp[np.arange(idx.size), idx] = 1.0
    return pp


def permuted_pencil(tab: PolyTables, m: int):
    """A0, A1 reordered into the interleaved basis (batched over tables)."""
    a0, a1 = assemble_pencil(tab, m)
    idx = permutation(m)
    return a0[..., idx[:, None], idx[None, :]], a1[..., idx[:, None], idx[None, :]]


def transport_matrices(tab: PolyTables, m: int, u):
    """Mt, Mx and the permuted A0 for velocity u (broadcast over a batch)."""
    pa0, pa1 = permuted_pencil(tab, m)
    u = np.asarray(u, dtype=float)[..., None, None]
    g0 = 1.0 / np.sqrt(1.0 - u * u)
    g1 = g0 * u
    return g0 * pa0 - g1 * pa1, g1 * pa0 - g0 * pa1, pa0


def equilibrium_coefficients(m: int, rho: float, tab: PolyTables) -> np.ndarray:
    f = np.zeros(2 * m + 1)
    f[0] = rho / tab.c[0][0]
    return f


def _values_at_zero(tab: PolyTables, m: int):
    return eval_family(tab, 0, m + 1, 0.0), eval_family(tab, 1, m, 0.0)


def assemble_DW(w: MomentState, tab: PolyTables) -> np.ndarray:
    """Linear map W -> coefficient vector; the u and theta columns are zero."""
    m = w.m
    size = 2 * m + 1
    dw = np.zeros((size, size))
    dw[0, 0] = 1.0 / tab.c[0][0]
    if m == 1:
        return dw
    v0, v1 = _values_at_zero(tab, m)
    # f_j = int Pi_M f * psi_j; degree <= 2 test functions only see rho, Pi, n1
    for n in range(3):
        dw[pos0(n), 3] = -v0[n]
    for n in range(2):
        dw[pos1(n), 4] = -v1[n]
    for j in range(5, size):
        dw[j, j] = 1.0
    return dw


def coefficients(w: MomentState, tab: PolyTables) -> np.ndarray:
    return assemble_DW(w, tab) @ w.vector()


def state_from_coefficients(m: int, f, rho: float, u: float, theta: float,
                            tab: PolyTables) -> MomentState:
    """Inverse of ``coefficients`` for a vector expressed in its own Landau frame."""
    f = np.asarray(f, dtype=float)
    if m == 1:
        return MomentState(1, rho, u, theta)
    pi = -f[pos0(1)] / eval_poly(tab, 0, 1, 0.0)
    n1 = -f[pos1(0)] / tab.c[1][0]
    return MomentState(m, rho, u, theta, pi, n1, f[5:])


def _dzeta_values_at_zero(tab: PolyTables, m: int):
    """d/dzeta of P_n^(ell)(0) for n = 0..m (family 0) and 0..m-1 (family 1)."""
    out = []
    for ell, top in ((0, m + 1), (1, m)):
        vals = eval_family(tab, ell, top, 0.0)
        d = np.empty(top + 1)
        for n in range(top + 1):
            half = 0.5 * (tab.g - tab.theta - tab.b[ell][n])
            d[n] = -half * vals[n] + (tab.a[ell][n - 1] * vals[n - 1] if n else 0.0)
        out.append(d)
    return out


def _theta_dw_w(w: MomentState, tab: PolyTables) -> np.ndarray:
    """(d D^W / d theta) W."""
    m = w.m
    zeta2 = tab.zeta**2
    d0, d1 = _dzeta_values_at_zero(tab, m)
    out = np.zeros(2 * m + 1)
    # d(1/c0)/dzeta = -(dc0/dzeta)/c0^2 and c0 = P0(0)
    out[0] = -zeta2 * (-d0[0] / tab.c[0][0] ** 2) * w.rho
    if m >= 2:
        for n in range(3):
            out[pos0(n)] += -zeta2 * (-d0[n]) * w.pi
        for n in range(2):
            out[pos1(n)] += -zeta2 * (-d1[n]) * w.n1_tilde
    return out


def _basis_derivative_terms(f, m: int, tab: PolyTables, u: float):
    """Projected (d/du, d/dtheta) of sum_k f_k phi_k, holding coefficients fixed."""
    zeta = tab.zeta
    a, b, p, q, r, pt = tab.a, tab.b, tab.p, tab.q, tab.r, tab.pt
    du = np.zeros(2 * m + 1)
    dth = np.zeros(2 * m + 1)
    f0 = lambda n: f[pos0(n)] if 0 <= n <= m else 0.0
    f1 = lambda n: f[pos1(n)] if 0 <= n <= m - 1 else 0.0
    for n in range(m + 1):
        # family-0 slot n collects the u-derivatives of family-1 functions
        val = 0.0
        if n >= 1:
            val += (n * pt[n - 1] - zeta * q[n - 1]) * f1(n - 1)
        if n >= 2:
            val -= zeta * r[n - 1] * f1(n - 2)
        du[pos0(n)] = val
        dth[pos0(n)] = 0.5 * (tab.g - tab.theta - b[0][n]) * f0(n) - (a[0][n - 1] * f0(n - 1) if n else 0.0)
    for n in range(m):
        du[pos1(n)] = ((n + 1) / pt[n] - zeta * q[n]) * f0(n + 1) - zeta * p[n] * f0(n)
        dth[pos1(n)] = 0.5 * (tab.g - tab.theta - b[1][n]) * f1(n) - (a[1][n - 1] * f1(n - 1) if n else 0.0)
    return du / (1.0 - u * u), -zeta * zeta * dth


def assemble_D(w: MomentState, tab: PolyTables) -> np.ndarray:
    """Jacobian of the projected distribution: D dW = coefficients of d(Pi_M f)."""
    dw = assemble_DW(w, tab)
    f = dw @ w.vector()
    du, dth = _basis_derivative_terms(f, w.m, tab, w.u)
    d = dw.copy()
    d[:, 1] += du
    d[:, 2] += dth + _theta_dw_w(w, tab)
    return d


def assemble_transport(w: MomentState, tab: PolyTables | None = None,
                       spec: PencilSpectrum | None = None, tau: float | None = None) -> SystemMatrices:
    if tab is None:
        tab = tables_for(w.theta, w.m)
    mt, mx, pa0 = transport_matrices(tab, w.m, w.u)
    pa1 = permuted_pencil(tab, w.m)[1]
    dw = assemble_DW(w, tab)
    d = assemble_D(w, tab)
    s = source_aw(w, tab, tau) if tau is not None else None
    return SystemMatrices(dw, d, mt, mx, mt @ d, mx @ d, pa0, pa1, permutation(w.m), s)


def source_aw(w: MomentState, tab: PolyTables, tau: float) -> np.ndarray:
    """Projected Anderson-Witting source -(1/tau) A0 (f - f_eq) in the interleaved basis."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    f = coefficients(w, tab)
    f[0] -= w.rho / tab.c[0][0]
    pa0 = permuted_pencil(tab, w.m)[0]
    s = -(pa0 @ f) / tau
    return s


def dz_dzeta(tab: PolyTables, m: int, z: float) -> float:
    """Derivative of a positive zero of Q_2m with respect to zeta (implicit function ratio)."""
    pt = tab.pt[m]
    p0 = eval_poly(tab, 0, m + 1, -z)
    p1 = eval_poly(tab, 1, m, -z)
    s = pt + 1.0 / pt
    num = s * z * p1 * p0 + (z * z - 1) * p1 * p1 + p0 * p0
    den = tab.zeta * (s * p0 * p1 + z * p1 * p1 + z / (z * z - 1) * p0 * p0)
    return -num / den


def char_indicator(tab: PolyTables, spec: PencilSpectrum, m: int, i: int) -> float:
    """Sign indicator for genuine nonlinearity of the i-th field at equilibrium."""
    i = abs(i)
    if i < 1:
        raise ValueError("index must be nonzero")
    z = spec.z[i + m]
    zeta, g = tab.zeta, tab.g
    ratio = eval_poly(tab, 1, m, z) / eval_poly(tab, 1, m, -z)
    dz = dz_dzeta(tab, m, z)
    k = g * g * zeta * zeta - 3 * g * zeta - zeta * zeta + 1
    return (k / (g * (g * zeta - 1)) * (1 + ratio)
            - zeta / (z * z - 1) * (1 - ratio) * dz
            + zeta * zeta * z / ((z * z - 1) * (g * zeta - 1)) * (1 + ratio) * dz)
