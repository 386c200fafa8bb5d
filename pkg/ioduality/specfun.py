"""Cylinder Bessel and Hankel functions of integer order.

Thin checked layer over `scipy.special`. All functions accept scalars or arrays
and broadcast like numpy ufuncs. Orders are limited to |m| <= 120 and arguments
to x <= 200; requests outside that box raise instead of silently degrading.
"""
from typing import List
from typing import Tuple
from typing import Union

import numpy as np

from scipy import special
from scipy.optimize import brentq

from ioduality.exceptions import SpecialFunctionDomainError

MAX_ORDER = 120
MAX_ARGUMENT = 200.0
ZERO_SCAN_STEP = np.pi / 8
ZERO_XTOL = 1e-12

ArrayLike = Union[float, int, np.ndarray]


def _check(m: ArrayLike, x: ArrayLike, strictly_positive: bool = False):
    m = np.asarray(m)
    x = np.asarray(x, dtype=float)
    if not np.issubdtype(m.dtype, np.integer):
        if not np.all(np.equal(np.mod(m, 1), 0)):
            raise SpecialFunctionDomainError(f"Bessel orders must be integers, got {m}")
        m = m.astype(int)
    if np.any(np.abs(m) > MAX_ORDER):
        raise SpecialFunctionDomainError(f"Bessel order above the supported cap of {MAX_ORDER}")
    if not np.all(np.isfinite(x)):
        raise SpecialFunctionDomainError("Bessel argument must be finite")
    if strictly_positive and np.any(x <= 0):
        raise SpecialFunctionDomainError("Bessel argument must be strictly positive")
    if np.any(x < 0):
        raise SpecialFunctionDomainError("Bessel argument must be non-negative")
    if np.any(x > MAX_ARGUMENT):
        raise SpecialFunctionDomainError(
            f"Bessel argument above the supported cap of {MAX_ARGUMENT}"
        )
    return m, x


def bessel_j(m: ArrayLike, x: ArrayLike):
    """Bessel function of the first kind J_m(x)

    Args:
        m: integer order. Negative orders follow J_{-m} = (-1)^m J_m.
        x: non-negative argument
    """
    m, x = _check(m, x)
    return special.jv(m, x)


def bessel_y(m: ArrayLike, x: ArrayLike):
    """Bessel function of the second kind Y_m(x), defined for x > 0"""
    m, x = _check(m, x, strictly_positive=True)
    return special.yv(m, x)


def hankel1(m: ArrayLike, x: ArrayLike):
    """Hankel function of the first kind H_m(x) = J_m(x) + i Y_m(x), x > 0"""
    m, x = _check(m, x, strictly_positive=True)
    return special.jv(m, x) + 1j * special.yv(m, x)


def deriv_j(m: ArrayLike, x: ArrayLike):
    """Derivative J_m'(x) = (J_{m-1}(x) - J_{m+1}(x)) / 2"""
    m, x = _check(m, x)
    return special.jvp(m, x, 1)


def deriv_y(m: ArrayLike, x: ArrayLike):
    """Derivative Y_m'(x), x > 0"""
    m, x = _check(m, x, strictly_positive=True)
    return special.yvp(m, x, 1)


def deriv_hankel1(m: ArrayLike, x: ArrayLike):
    """Derivative H_m'(x) of the Hankel function of the first kind, x > 0"""
    m, x = _check(m, x, strictly_positive=True)
    return special.jvp(m, x, 1) + 1j * special.yvp(m, x, 1)


def _scan_zeros(fn, interval: Tuple[float, float], step: float = ZERO_SCAN_STEP) -> List[float]:
    """Find every sign change of `fn` over `interval` then polish it with Brent's method.

    The point x = 0 is never reported.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not 0 <= lo < hi <= MAX_ARGUMENT:
        raise SpecialFunctionDomainError(
            f"Zero search interval must satisfy 0 <= lo < hi <= {MAX_ARGUMENT}, got {interval}"
        )
    n_steps = max(int(np.ceil((hi - lo) / step)), 1)
    grid = np.linspace(lo, hi, n_steps + 1)
    values = fn(grid)
    zeros = []
    for i in range(n_steps):
        a, b = grid[i], grid[i + 1]
        fa, fb = values[i], values[i + 1]
        if fa == 0 and a > 0:
            zeros.append(a)
        elif fa * fb < 0:
            zeros.append(brentq(fn, a, b, xtol=ZERO_XTOL, rtol=4 * np.finfo(float).eps))
    if values[-1] == 0 and grid[-1] > 0:
        zeros.append(grid[-1])
    return sorted(set(zeros))


def bessel_j_zeros(m: int, interval: Tuple[float, float]) -> List[float]:
    """All zeros of J_m inside `interval`

    Args:
        m: non-negative integer order
        interval: search interval [x_lo, x_hi] with 0 <= x_lo < x_hi <= 200

    Returns:
        zeros: sorted list of zeros, each polished to 1e-12
    """
    _check(m, 0.0)
    return _scan_zeros(lambda x: special.jv(m, x), interval)


def deriv_j_zeros(m: int, interval: Tuple[float, float]) -> List[float]:
    """All zeros of J_m' inside `interval` (x = 0 excluded)"""
    _check(m, 0.0)
    return _scan_zeros(lambda x: special.jvp(m, x, 1), interval)
