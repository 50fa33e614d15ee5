"""Orthonormal polynomial families on [1, inf) for the two weights of ``specfun``.

Family 0 is orthonormal under (x^2-1)^(-1/2) e^(-zeta x)/K1, family 1 under
(x^2-1)^(1/2) e^(-zeta x)/K1.  Besides the three-term recurrences

    x P_n = a_{n-1} P_{n-1} + b_n P_n + a_n P_{n+1},

the tables carry the cross coefficients linking the two families

    (x^2-1) P^1_n = p_n P^0_n + q_n P^0_{n+1} + r_{n+1} P^0_{n+2}
    P^0_{n+1}     = r_n P^1_{n-1} + q_n P^1_n + p_{n+1} P^1_{n+1}

and the two-term variants built from pt, qt, rt.

Two construction routes exist.  ``build_tables`` Cholesky-factors the exact
Hankel moment matrix in multiprecision arithmetic.  ``batch_tables`` runs a
discretized Lanczos process in double precision over many parameter values at
once; the solver uses it per cell and the tests tie it to the exact route.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import special
from scipy.linalg import eigh_tridiagonal

from .specfun import N_MAX, ThermoContext, g_ratio, weight_moments_mp

__all__ = [
    "ZETA_MIN",
    "ZETA_MAX",
    "PolyTables",
    "build_tables",
    "batch_tables",
    "eval_poly",
    "eval_family",
    "poly_zeros",
    "zero_sums",
    "dpoly_dzeta",
    "dpoly_dx",
    "gauss_rule",
    "jacobi_matrix",
]

ZETA_MIN = 0.05
ZETA_MAX = 50.0


@dataclass(frozen=True)
class PolyTables:
    """Recurrence data at one zeta (or a batch of zetas along leading axes).

    Arrays are indexed ``a[..., ell, n]``; for a single zeta ``a[ell][n]`` works too.
    Shapes: a, b -> (..., 2, n_max+2); c -> (..., 2, n_max+3); cross
    coefficients -> (..., n_max+1).  ``r[..., 0]`` is unused and set to 0.
    """

    ctx: ThermoContext | None
    zeta: np.ndarray | float
    g: np.ndarray | float
    n_max: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    pt: np.ndarray
    qt: np.ndarray
    rt: np.ndarray
    zeros: tuple | None = None

    @property
    def theta(self):
        return 1.0 / self.zeta


def _cross_coefficients(a, b, c, n_max):
    """Cross coefficients from recurrence data (works on float or mpf object arrays)."""
    c0, c1 = c[..., 0, :], c[..., 1, :]
    b0, b1 = b[..., 0, :], b[..., 1, :]
    # sum of the zeros of P_n is the trace of the leading n x n Jacobi block
    s0 = np.concatenate([np.zeros_like(b0[..., :1]), np.cumsum(b0, axis=-1)], axis=-1)
    s1 = np.concatenate([np.zeros_like(b1[..., :1]), np.cumsum(b1, axis=-1)], axis=-1)
    n = np.arange(n_max + 1)
    p = c0[..., n] / c1[..., n]
    pt = c1[..., n] / c0[..., n + 1]
    r = np.zeros_like(p)
    r[..., 1:] = c1[..., n[1:] - 1] / c0[..., n[1:] + 1]
    qt = s0[..., n + 1] - s1[..., n]
    q = pt * (b0[..., n + 1] + qt)
    rt = p * (1 - pt * pt)
    return p, q, r, pt, qt, rt


def _check_zeta_range(zeta) -> None:
    z = np.asarray(zeta)
    if np.any(~np.isfinite(z)) or np.any(z < ZETA_MIN) or np.any(z > ZETA_MAX):
        raise ValueError(f"zeta outside validated range [{ZETA_MIN}, {ZETA_MAX}]: {zeta}")


def _mp_cholesky_upper(h):
    """Upper factor R of h = R^T R; names the degree where positivity is lost."""
    n = len(h)
    r = [[mpmath.mpf(0)] * n for _ in range(n)]
    for i in range(n):
        s = h[i][i] - mpmath.fsum(r[k][i] ** 2 for k in range(i))
        if s <= 0:
            raise FloatingPointError(f"Gram factorization lost positive definiteness at degree {i}")
        r[i][i] = mpmath.sqrt(s)
        for j in range(i + 1, n):
            r[i][j] = (h[i][j] - mpmath.fsum(r[k][i] * r[k][j] for k in range(i))) / r[i][i]
    return r


def _recurrence_from_moments(m, size):
    h = [[m[i + j] for j in range(size)] for i in range(size)]
    r = _mp_cholesky_upper(h)
    c = [1 / r[n][n] for n in range(size)]
    a = [r[n + 1][n + 1] / r[n][n] for n in range(size - 1)]
    s = [mpmath.mpf(0)] + [r[n - 1][n] / r[n - 1][n - 1] for n in range(1, size)]
    b = [s[n + 1] - s[n] for n in range(size - 1)]
    return a, b, c


def _working_digits(n_max: int) -> int:
    return 40 + 5 * n_max


@lru_cache(maxsize=256)
def _build_cached(zeta: float, n_max: int) -> PolyTables:
    size = n_max + 3
    with mpmath.workdps(_working_digits(n_max)):
        m0, m1 = weight_moments_mp(zeta, 2 * size - 2)
        a0, b0, c0 = _recurrence_from_moments(m0, size)
        a1, b1, c1 = _recurrence_from_moments(m1, size)
        a = np.array([a0, a1], dtype=object)
        b = np.array([b0, b1], dtype=object)
        c = np.array([c0, c1], dtype=object)
        cross = _cross_coefficients(a, b, c, n_max)
        cross = [np.array(x, dtype=float) for x in cross]
    a = a.astype(float)
    b = b.astype(float)
    c = c.astype(float)
    zeros = []
    for ell in range(2):
        fam = [np.empty(0)]
        for n in range(1, n_max + 2):
            if n == 1:
                fam.append(np.array([b[ell, 0]]))
            else:
                fam.append(eigh_tridiagonal(b[ell, :n], a[ell, : n - 1], eigvals_only=True))
        zeros.append(tuple(fam))
    ctx = ThermoContext.from_zeta(zeta)
    tab = PolyTables(ctx, ctx.zeta, ctx.g, n_max, a, b, c, *cross, zeros=tuple(zeros))
    for arr in (tab.a, tab.b, tab.c, tab.p, tab.q, tab.r, tab.pt, tab.qt, tab.rt):
        arr.setflags(write=False)
    return tab


def build_tables(ctx: ThermoContext | float, n_max: int) -> PolyTables:
    """Exact-moment tables at one zeta (multiprecision Hankel factorization)."""
    zeta = ctx.zeta if isinstance(ctx, ThermoContext) else float(ctx)
    if n_max < 1 or n_max > N_MAX:
        raise ValueError(f"n_max must lie in 1..{N_MAX}")
    _check_zeta_range(zeta)
    return _build_cached(float(zeta), int(n_max))


# --- batched double-precision route -------------------------------------------------

def _lanczos(x, w, steps):
    """Orthonormal recurrence of the discrete measure sum_j w_j delta(x - x_j).

    x, w: (B, N).  Returns a (B, steps), b (B, steps), mass (B,).
    Full reorthogonalization keeps the Krylov basis orthonormal to rounding.
    """
    mass = w.sum(axis=-1)
    v = np.sqrt(w) / np.sqrt(mass)[:, None]
    basis = [v]
    a = np.empty((x.shape[0], steps))
    b = np.empty((x.shape[0], steps))
    prev = np.zeros_like(v)
    for k in range(steps):
        y = x * v
        b[:, k] = np.einsum("bn,bn->b", v, y)
        y -= b[:, k, None] * v
        if k:
            y -= a[:, k - 1, None] * prev
        for _ in range(2):
            for q in basis:
                y -= np.einsum("bn,bn->b", q, y)[:, None] * q
        a[:, k] = np.sqrt(np.einsum("bn,bn->b", y, y))
        prev, v = v, y / a[:, k, None]
        basis.append(v)
    return a, b, mass


def _discrete_measure(zeta, degree, nodes=200):
    """Trapezoid rule in t (x = cosh t) for both weights, truncated where negligible."""
    # cut-off x_max with zeta (x-1) - 2 (degree+1) log x > 60
    xm = 1 + 60.0 / zeta
    for _ in range(30):
        xm = 1 + (60.0 + 2 * (degree + 1) * np.log(xm)) / zeta
    t_max = np.arccosh(xm)
    frac = np.linspace(0.0, 1.0, nodes)
    t = t_max[:, None] * frac[None, :]
    h = (t_max / (nodes - 1))[:, None] * np.ones(nodes)
    h[:, 0] *= 0.5
    x = np.cosh(t)
    base = h * np.exp(-zeta[:, None] * (x - 1)) / special.kve(1, zeta)[:, None]
    return x, base, base * np.sinh(t) ** 2


def batch_tables(zeta, n_max: int) -> PolyTables:
    """Recurrence tables for an array of zetas in double precision.

    The ``zeros`` field is not filled; use ``gauss_rule`` on the result instead.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    shape = zeta.shape
    zf = zeta.ravel()
    _check_zeta_range(zf)
    steps = n_max + 2
    x, w0, w1 = _discrete_measure(zf, 2 * steps + 2)
    a = np.empty((zf.size, 2, steps))
    b = np.empty((zf.size, 2, steps))
    c = np.empty((zf.size, 2, steps + 1))
    for ell, w in enumerate((w0, w1)):
        aa, bb, mass = _lanczos(x, w, steps)
        a[:, ell], b[:, ell] = aa, bb
        c[:, ell, 0] = 1.0 / np.sqrt(mass)
        c[:, ell, 1:] = c[:, ell, :1] / np.cumprod(aa, axis=-1)
    cross = _cross_coefficients(a, b, c, n_max)
    re = lambda arr: arr.reshape(shape + arr.shape[1:])
    return PolyTables(None, zeta.reshape(shape), g_ratio(zeta).reshape(shape), n_max,
                      re(a), re(b), re(c), *[re(v) for v in cross])


# --- evaluation --------------------------------------------------------------------

def eval_family(tab: PolyTables, ell: int, n: int, x):
    """Values of P_0..P_n of family ``ell`` at x; result shape (n+1,) + broadcast shape.

    For batched tables, x must broadcast against the batch shape.
    """
    a = tab.a[..., ell, :]
    b = tab.b[..., ell, :]
    c0 = tab.c[..., ell, 0]
    x = np.asarray(x, dtype=float)
    # align table batch dims with trailing dims of x when x has extra axes
    extra = x.ndim - np.ndim(c0)
    if extra > 0 and np.ndim(c0) > 0:
        expand = lambda arr: arr.reshape(arr.shape + (1,) * extra)
    else:
        expand = lambda arr: arr
    p_prev = np.zeros(np.broadcast(expand(c0), x).shape)
    p_cur = expand(c0) * np.ones_like(x)
    out = [p_cur]
    for k in range(n):
        ak = expand(a[..., k])
        nxt = (x - expand(b[..., k])) * p_cur
        if k:
            nxt = nxt - expand(a[..., k - 1]) * p_prev
        p_prev, p_cur = p_cur, nxt / ak
        out.append(p_cur)
    return np.stack(out)


def eval_poly(tab: PolyTables, ell: int, n: int, x):
    """P_n^(ell)(x; zeta) by the three-term recurrence."""
    if n < 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    if n > tab.n_max + 1:
        raise ValueError(f"degree {n} exceeds table bound {tab.n_max + 1}")
    vals = eval_family(tab, ell, n, x)[n]
    return float(vals) if np.ndim(vals) == 0 else vals


def _p(tab, ell, n, x):
    return eval_poly(tab, ell, n, x) if n >= 0 else 0.0 * np.asarray(x, dtype=float)


def poly_zeros(tab: PolyTables, ell: int, n: int) -> np.ndarray:
    """Sorted zeros of P_n^(ell) (Golub-Welsch eigenvalues of the Jacobi block)."""
    if n < 1 or n > tab.n_max + 1:
        raise ValueError(f"degree {n} outside 1..{tab.n_max + 1}")
    if tab.zeros is not None:
        return tab.zeros[ell][n].copy()
    if n == 1:
        return np.asarray(tab.b[..., ell, :1]).copy()
    return eigh_tridiagonal(tab.b[ell, :n], tab.a[ell, : n - 1], eigvals_only=True)


def zero_sums(tab: PolyTables, ell: int, n: int):
    """Sum of the zeros of P_n^(ell) as the trace of the Jacobi block."""
    return np.sum(tab.b[..., ell, :n], axis=-1)


def dpoly_dzeta(tab: PolyTables, ell: int, n: int, x):
    """Derivative of P_n^(ell)(x; zeta) with respect to zeta, n >= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    half = 0.5 * (tab.g - tab.theta - tab.b[..., ell, n])
    return tab.a[..., ell, n - 1] * _p(tab, ell, n - 1, x) - half * _p(tab, ell, n, x)


def dpoly_dx(tab: PolyTables, ell: int, n: int, x):
    """Derivative of P_n^(ell) in x through the cross-family identities."""
    x = np.asarray(x, dtype=float)
    if ell == 0:
        if n < 1:
            raise ValueError("n must be >= 1 for family 0")
        out = (n / tab.pt[n - 1]) * _p(tab, 1, n - 1, x)
        if n >= 2:
            out = out + tab.zeta * tab.r[n - 1] * _p(tab, 1, n - 2, x)
        return out
    if np.any(np.abs(x * x - 1.0) < 1e-12):
        raise ZeroDivisionError("family-1 derivative identity is singular at x = +-1")
    rhs = (n + 1) * tab.pt[n] * _p(tab, 0, n + 1, x) + tab.zeta * tab.p[n] * _p(tab, 0, n, x)
    return (rhs - x * _p(tab, 1, n, x)) / (x * x - 1.0)


def jacobi_matrix(tab: PolyTables, ell: int, n: int) -> np.ndarray:
    """Symmetric tridiagonal J_n^(ell) of size n+1 (batched along leading axes)."""
    b = tab.b[..., ell, : n + 1]
    a = tab.a[..., ell, :n]
    out = np.zeros(b.shape[:-1] + (n + 1, n + 1))
    i = np.arange(n + 1)
    out[..., i, i] = b
    out[..., i[:-1], i[1:]] = a
    out[..., i[1:], i[:-1]] = a
    return out


def gauss_rule(tab: PolyTables, ell: int, nodes: int):
    """Gauss nodes and weights for weight family ``ell`` (weights sum to m_0)."""
    if nodes < 1 or nodes > tab.n_max + 2:
        raise ValueError(f"Gauss rule with {nodes} nodes exceeds table capacity")
    jm = jacobi_matrix(tab, ell, nodes - 1)
    x, vec = np.linalg.eigh(jm)
    mass = 1.0 / tab.c[..., ell, 0] ** 2
    w = vec[..., 0, :] ** 2 * np.asarray(mass)[..., None]
    return x, w
