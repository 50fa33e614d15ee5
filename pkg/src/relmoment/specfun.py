"""Modified Bessel functions of the second kind and weight moments.

The two weight functions on [1, inf) are

    w0(x; zeta) = (x^2 - 1)^(-1/2) exp(-zeta x) / K1(zeta)
    w1(x; zeta) = (x^2 - 1)^(+1/2) exp(-zeta x) / K1(zeta)

With x = cosh(t) their moments reduce to integrals of cosh(t)^k exp(-zeta cosh t),
which expand into finite positive sums of K_n(zeta).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import mpmath
import numpy as np
from scipy import special

__all__ = [
    "N_MAX",
    "ThermoContext",
    "bessel_k",
    "bessel_k_sequence",
    "g_ratio",
    "g_ratio_prime",
    "weight_moment",
    "weight_moments_mp",
]

# largest polynomial degree the tables are built for
N_MAX = 16


def _check_zeta(zeta: float) -> None:
    if not np.isfinite(zeta) or zeta <= 0:
        raise ValueError(f"zeta must be positive and finite, got {zeta!r}")


def bessel_k_sequence(n_hi: int, zeta: float) -> np.ndarray:
    """K_0..K_{n_hi} at ``zeta`` by upward recurrence from K_0, K_1."""
    _check_zeta(zeta)
    if n_hi < 0:
        raise ValueError("n_hi must be nonnegative")
    out = np.empty(n_hi + 1)
    out[0] = special.k0(zeta)
    if n_hi >= 1:
        out[1] = special.k1(zeta)
    with np.errstate(over="raise"):
        try:
            for n in range(1, n_hi):
                out[n + 1] = out[n - 1] + (2.0 * n / zeta) * out[n]
        except FloatingPointError as exc:
            raise OverflowError(f"K_n overflows for n={n_hi}, zeta={zeta}") from exc
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"K_n overflows for n={n_hi}, zeta={zeta}")
    if out[0] == 0.0:
        raise OverflowError(f"K_0 underflows at zeta={zeta}")
    return out


def bessel_k(n: int, zeta: float) -> float:
    """Modified Bessel function of the second kind K_n(zeta), integer n >= 0."""
    if n < 0:
        raise ValueError("order must be nonnegative")
    if n > 2 * N_MAX + 8:
        raise ValueError(f"order {n} beyond supported bound {2 * N_MAX + 8}")
    return float(bessel_k_sequence(n, zeta)[n])


def g_ratio(zeta):
    """G(zeta) = K2/K1, vectorized and safe for large zeta."""
    zeta = np.asarray(zeta, dtype=float)
    return special.kve(2, zeta) / special.kve(1, zeta)


def g_ratio_prime(zeta):
    """dG/dzeta = G^2 - 3G/zeta - 1."""
    g = g_ratio(zeta)
    return g * g - 3.0 * g / zeta - 1.0


@dataclass(frozen=True)
class ThermoContext:
    zeta: float
    theta: float
    k0: float
    k1: float
    k2: float
    g: float

    @classmethod
    def from_zeta(cls, zeta: float) -> "ThermoContext":
        _check_zeta(zeta)
        k = bessel_k_sequence(2, zeta)
        return cls(float(zeta), 1.0 / zeta, float(k[0]), float(k[1]), float(k[2]),
                   float(g_ratio(zeta)))

    @classmethod
    def from_theta(cls, theta: float) -> "ThermoContext":
        return cls.from_zeta(1.0 / theta)


def _cosh_power_integrals(kseq, k_hi: int):
    """I_k = int_0^inf cosh(t)^k exp(-zeta cosh t) dt for k = 0..k_hi.

    Uses cosh^k = 2^-k sum_j C(k, j) cosh((k - 2j) t); every term is positive.
    Works for float arrays and for lists of mpmath numbers alike.
    """
    out = []
    for k in range(k_hi + 1):
        s = 0
        for j in range(k + 1):
            s = s + comb(k, j) * kseq[abs(k - 2 * j)]
        out.append(s / 2**k)
    return out


def weight_moment(ell: int, k: int, ctx: ThermoContext) -> float:
    """m_k^(ell) = int_1^inf x^k w_ell(x; zeta) dx in closed form."""
    if ell not in (0, 1):
        raise ValueError("ell must be 0 or 1")
    if k < 0 or k > 2 * N_MAX + 2:
        raise ValueError(f"moment index {k} beyond supported bound {2 * N_MAX + 2}")
    kseq = bessel_k_sequence(k + 2 * ell, ctx.zeta)
    ints = _cosh_power_integrals(kseq, k + 2 * ell)
    if ell == 0:
        return float(ints[k] / ctx.k1)
    # (x^2 - 1)^(1/2) dx = sinh^2 t dt = (cosh^2 t - 1) dt
    return float((ints[k + 2] - ints[k]) / ctx.k1)


def weight_moments_mp(zeta, k_hi: int):
    """Both moment sequences m_0..m_{k_hi} as mpmath numbers at the current precision.

    Returns (m0, m1) lists. Used by the table builder, which needs the Hankel
    matrices to many more digits than double precision carries.
    """
    z = mpmath.mpf(zeta)
    kseq = [mpmath.besselk(0, z), mpmath.besselk(1, z)]
    for n in range(1, k_hi + 2):
        kseq.append(kseq[n - 1] + (2 * n / z) * kseq[n])
    ints = _cosh_power_integrals(kseq, k_hi + 2)
    k1 = kseq[1]
    m0 = [ints[k] / k1 for k in range(k_hi + 1)]
    m1 = [(ints[k + 2] - ints[k]) / k1 for k in range(k_hi + 1)]
    return m0, m1
