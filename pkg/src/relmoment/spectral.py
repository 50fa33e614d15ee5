"""The (A0, A1) matrix pencil, the even polynomial Q_2n and frame wave speeds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .orthopoly import PolyTables, eval_family, eval_poly, jacobi_matrix

__all__ = [
    "PencilSpectrum",
    "cross_matrix",
    "assemble_pencil",
    "pencil_eigens",
    "closed_form_eigvec",
    "q2n_eval",
    "wave_speeds",
    "max_frame_speed",
]


@dataclass(frozen=True)
class PencilSpectrum:
    """Generalized eigenpairs of (A1, A0); index i = -m..m maps to array slot i + m."""

    m: int
    zeta: float
    lambda_hat: np.ndarray
    z: np.ndarray  # z[i + m]; slot m (i = 0) holds nan
    y: np.ndarray  # columns are unit-length eigenvectors, same ordering

    def eigenvalue(self, i: int) -> float:
        return float(self.lambda_hat[i + self.m])

    def eigenvector(self, i: int) -> np.ndarray:
        return self.y[:, i + self.m]


def cross_matrix(tab: PolyTables, m: int) -> np.ndarray:
    """Rectangular J_{m-1}: m rows (family 1), m+1 columns (family 0)."""
    shape = np.shape(tab.p)[:-1]
    out = np.zeros(shape + (m, m + 1))
    k = np.arange(m)
    out[..., k, k] = tab.p[..., :m]
    out[..., k, k + 1] = tab.q[..., :m]
    if m >= 2:
        out[..., k[:-1], k[:-1] + 2] = tab.r[..., 1:m]
    return out


def assemble_pencil(tab: PolyTables, m: int):
    """A0 = blockdiag(J_m^(0), J_{m-1}^(1)); A1 couples the families through J_{m-1}."""
    if m < 1 or m + 1 > tab.n_max + 1:
        raise ValueError(f"order {m} exceeds table capacity n_max={tab.n_max}")
    shape = np.shape(tab.p)[:-1]
    size = 2 * m + 1
    a0 = np.zeros(shape + (size, size))
    a1 = np.zeros(shape + (size, size))
    a0[..., : m + 1, : m + 1] = jacobi_matrix(tab, 0, m)
    a0[..., m + 1 :, m + 1 :] = jacobi_matrix(tab, 1, m - 1)
    jc = cross_matrix(tab, m)
    a1[..., m + 1 :, : m + 1] = jc
    a1[..., : m + 1, m + 1 :] = np.swapaxes(jc, -1, -2)
    return a0, a1


def _reduced_pencil(a0, a1):
    chol = np.linalg.cholesky(a0)
    linv = np.linalg.inv(chol)
    sym = linv @ a1 @ np.swapaxes(linv, -1, -2)
    return 0.5 * (sym + np.swapaxes(sym, -1, -2)), linv


def pencil_eigens(tab: PolyTables, m: int) -> PencilSpectrum:
    """Solve A1 y = lambda_hat A0 y by Cholesky reduction to a symmetric problem."""
    a0, a1 = assemble_pencil(tab, m)
    sym, linv = _reduced_pencil(a0, a1)
    lam, w = np.linalg.eigh(sym)
    y = linv.T @ w
    y /= np.linalg.norm(y, axis=0)
    # deterministic sign: largest-magnitude component positive
    pick = np.argmax(np.abs(y), axis=0)
    y *= np.sign(y[pick, np.arange(y.shape[1])])
    lam[m] = 0.0 if abs(lam[m]) < 1e-13 else lam[m]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.sign(lam) / np.sqrt(1.0 - lam * lam)
    z[m] = np.nan
    return PencilSpectrum(m, float(tab.zeta), lam, z, y)


def max_frame_speed(tab: PolyTables, m: int) -> np.ndarray:
    """Largest pencil eigenvalue for (possibly batched) tables."""
    a0, a1 = assemble_pencil(tab, m)
    sym, _ = _reduced_pencil(a0, a1)
    return np.linalg.eigvalsh(sym)[..., -1]


def closed_form_eigvec(tab: PolyTables, m: int, z: float | None) -> np.ndarray:
    """Eigenvector built from polynomial values at +-z; z=None gives the zero-eigenvalue vector."""
    if z is None:
        p0_pos = eval_family(tab, 0, m + 1, 1.0)
        p0_neg = eval_family(tab, 0, m + 1, -1.0)
        u = p0_pos[: m + 1] * p0_neg[m + 1] - p0_neg[: m + 1] * p0_pos[m + 1]
        return np.concatenate([u, np.zeros(m)])
    p0_pos = eval_family(tab, 0, m, z)
    p0_neg = eval_family(tab, 0, m, -z)
    p1_pos = eval_family(tab, 1, m, z)
    p1_neg = eval_family(tab, 1, m, -z)
    u = p0_pos * p1_neg[m] + p0_neg * p1_pos[m]
    v = np.sqrt(z * z - 1.0) * (p1_pos[:m] * p1_neg[m] - p1_neg[:m] * p1_pos[m])
    return np.concatenate([u, v])


def q2n_eval(tab: PolyTables, n: int, x):
    """Q_2n(x) = P0_{n+1}(x) P1_n(-x) + P0_{n+1}(-x) P1_n(x)."""
    x = np.asarray(x, dtype=float)
    return (eval_poly(tab, 0, n + 1, x) * eval_poly(tab, 1, n, -x)
            + eval_poly(tab, 0, n + 1, -x) * eval_poly(tab, 1, n, x))


def wave_speeds(spec: PencilSpectrum | np.ndarray, u: float) -> np.ndarray:
    """Lab-frame characteristic speeds (u - lambda_hat) / (1 - u lambda_hat), ascending."""
    if not abs(u) < 1.0:
        raise ValueError("|u| must be < 1")
    lam = spec.lambda_hat if isinstance(spec, PencilSpectrum) else np.asarray(spec)
    return np.sort((u - lam) / (1.0 - u * lam))
