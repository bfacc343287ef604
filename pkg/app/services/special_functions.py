"""
Special Functions
Physicists' Hermite polynomials at complex argument and the oscillator-invariant
eigenfunctions built from them.
"""
import numpy as np
from scipy.special import gammaln

from app.exceptions import HermiteOrderError, NonFiniteError

# Upward recurrence stays accurate in double precision up to this order for |z| <= 20
HERMITE_MAX_ORDER = 200


def hermite(n: int, z):
    """H_n(z) by the three-term recurrence H_{k+1} = 2z H_k - 2k H_{k-1}"""
    if not 0 <= n <= HERMITE_MAX_ORDER:
        raise HermiteOrderError(f"Hermite order {n} outside [0, {HERMITE_MAX_ORDER}]")
    zz = np.asarray(z, dtype=complex)
    previous = np.ones_like(zz)
    if n == 0:
        return previous if zz.ndim else complex(previous)
    current = 2.0 * zz
    for k in range(1, n):
        previous, current = current, 2.0 * zz * current - 2.0 * k * previous
    return current if zz.ndim else complex(current)


def eigenfunction_Ih(n: int, z, sigma: float, sigma_dot: float, m: float = 1.0, hbar: float = 1.0):
    """
    Normalised eigenfunction of the Hermitian oscillator invariant, evaluated at
    (possibly complex) position z:

        [n! 2^n sigma sqrt(pi hbar)]^(-1/2) exp[(i m / 2 hbar)(sigma'/sigma + i/(m sigma^2)) z^2]
            H_n(z / (sqrt(hbar) sigma))
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    zz = np.asarray(z, dtype=complex)
    log_norm = -0.5 * (gammaln(n + 1) + n * np.log(2.0) + np.log(sigma * np.sqrt(np.pi * hbar)))
    width = sigma_dot / sigma + 1j / (m * sigma * sigma)
    with np.errstate(over="ignore", invalid="ignore"):
        values = np.exp(log_norm + (1j * m / (2.0 * hbar)) * width * zz * zz)
        values = values * hermite(n, zz / (np.sqrt(hbar) * sigma))
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(
            f"eigenfunction n={n} overflowed (max |Im z| = {np.max(np.abs(zz.imag))!r})", stage="states"
        )
    return values if zz.ndim else complex(values)
