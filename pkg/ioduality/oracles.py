"""Analytic interior eigenvalues of a disk."""
from typing import List
from typing import Literal
from typing import Sequence
from typing import Tuple

import numpy as np

from pydantic import BaseModel
from scipy.optimize import brentq
from scipy.signal import argrelmin

from ioduality import specfun
from ioduality.forward.base import ScatteringProblem

ORDER_MARGIN = 8
ITE_SCAN_STEP = 0.01
EVEN_ROOT_TOL = 1e-8


class OracleEigenvalue(BaseModel):
    lam: float
    order: int
    radial_index: int
    multiplicity: int
    kind: Literal["dirichlet", "neumann", "ite"]
    possibly_invisible: bool = False
    certified: bool = True

    @property
    def k(self) -> float:
        return float(np.sqrt(self.lam))


def _check_interval(interval: Sequence[float]) -> Tuple[float, float]:
    lo, hi = float(interval[0]), float(interval[1])
    if not 0 <= lo < hi:
        raise ValueError(f"Interval must satisfy 0 <= lo < hi, got {interval}")
    return lo, hi


def _max_order(k_hi: float, a: float) -> int:
    return min(int(np.ceil(k_hi * a)) + ORDER_MARGIN, specfun.MAX_ORDER)


def _bessel_family(zero_fn, a: float, interval, kind: str) -> List[OracleEigenvalue]:
    if a <= 0:
        raise ValueError(f"Disk radius must be positive, got {a}")
    lo, hi = _check_interval(interval)
    x_hi = np.sqrt(hi) * a
    eigs = []
    for m in range(_max_order(np.sqrt(hi), a) + 1):
        for index, z in enumerate(zero_fn(m, (0.0, x_hi)), start=1):
            lam = (z / a) ** 2
            if lo <= lam <= hi:
                eigs.append(
                    OracleEigenvalue(
                        lam=lam,
                        order=m,
                        radial_index=index,
                        multiplicity=1 if m == 0 else 2,
                        kind=kind,
                    )
                )
    return sorted(eigs, key=lambda e: (e.lam, e.order))


def dirichlet_disk_eigs(a: float, interval: Sequence[float]) -> List[OracleEigenvalue]:
    """Dirichlet Laplacian eigenvalues (j_{m,n} / a)^2 of a disk inside `interval`

    Args:
        a: disk radius
        interval: closed interval [lo, hi] of the spectral parameter
    """
    return _bessel_family(specfun.bessel_j_zeros, a, interval, "dirichlet")


def neumann_disk_eigs(a: float, interval: Sequence[float]) -> List[OracleEigenvalue]:
    """Neumann Laplacian eigenvalues (j'_{m,n} / a)^2 of a disk, the zero eigenvalue excluded"""
    return _bessel_family(specfun.deriv_j_zeros, a, interval, "neumann")


def ite_determinant(m: int, k: np.ndarray, a: float, n: float, normalized: bool = False):
    """d_m(k) = sqrt(n) J_m'(sqrt(n) k a) J_m(k a) - J_m'(k a) J_m(sqrt(n) k a)"""
    kappa = np.sqrt(n)
    x = np.asarray(k, dtype=float) * a
    first = kappa * specfun.deriv_j(m, kappa * x) * specfun.bessel_j(m, x)
    second = specfun.deriv_j(m, x) * specfun.bessel_j(m, kappa * x)
    if normalized:
        scale = np.abs(first) + np.abs(second)
        return (first - second) / np.where(scale > 0, scale, 1.0)
    return first - second


def ite_disk_eigs(a: float, n: float, interval: Sequence[float]) -> List[OracleEigenvalue]:
    """Interior transmission eigenvalues of a disk with constant index n

    Roots of the separated determinant are bracketed by a sign scan in k at step 0.01 and
    polished with Brent's method. Tangential roots, which a sign scan cannot see, are
    reported with `certified=False` when the normalized determinant has a local minimum
    below 1e-8.

    Args:
        a: disk radius
        n: refractive index, positive and different from one
        interval: closed interval [lo, hi] of the spectral parameter
    """
    if a <= 0:
        raise ValueError(f"Disk radius must be positive, got {a}")
    if n <= 0 or n == 1:
        raise ValueError(f"The refractive index must be positive and different from one, got {n}")
    lo, hi = _check_interval(interval)
    k_lo, k_hi = max(np.sqrt(lo), 1e-6), np.sqrt(hi)
    # scan from the origin so that radial indices count every root of the order
    grid = np.append(np.arange(min(ITE_SCAN_STEP, k_lo), k_hi, ITE_SCAN_STEP), k_hi)
    eigs = []
    for m in range(_max_order(np.sqrt(n) * k_hi, a) + 1):
        values = ite_determinant(m, grid, a, n)
        roots = []
        for i in range(len(grid) - 1):
            if values[i] == 0 and grid[i] >= k_lo:
                roots.append(grid[i])
            elif values[i] * values[i + 1] < 0:
                roots.append(
                    brentq(
                        lambda kk: ite_determinant(m, kk, a, n), grid[i], grid[i + 1], xtol=1e-13
                    )
                )
        if values[-1] == 0:
            roots.append(grid[-1])
        multiplicity = 1 if m == 0 else 2
        for index, root in enumerate(sorted(roots), start=1):
            eigs.append(
                OracleEigenvalue(
                    lam=root**2,
                    order=m,
                    radial_index=index,
                    multiplicity=multiplicity,
                    kind="ite",
                    possibly_invisible=multiplicity % 2 == 0,
                )
            )
        normalized = np.abs(ite_determinant(m, grid, a, n, normalized=True))
        for i in argrelmin(normalized)[0]:
            isolated = all(abs(grid[i] - r) > ITE_SCAN_STEP for r in roots)
            if normalized[i] < EVEN_ROOT_TOL and isolated:
                eigs.append(
                    OracleEigenvalue(
                        lam=grid[i] ** 2,
                        order=m,
                        radial_index=0,
                        multiplicity=2 * multiplicity,
                        kind="ite",
                        possibly_invisible=True,
                        certified=False,
                    )
                )
    eigs = [e for e in eigs if lo <= e.lam <= hi]
    return sorted(eigs, key=lambda e: (e.lam, e.order))


def disk_oracle(
    problem: ScatteringProblem, a: float, interval: Sequence[float]
) -> List[OracleEigenvalue]:
    """Interior eigenvalues relevant to a scattering problem on a disk of radius `a`"""
    if problem.kind == "dirichlet":
        return dirichlet_disk_eigs(a, interval)
    if problem.kind == "neumann":
        return neumann_disk_eigs(a, interval)
    return ite_disk_eigs(a, problem.n, interval)


def distance_to_oracle(lam: float, eigs: Sequence[OracleEigenvalue]) -> float:
    """Distance from `lam` to the nearest oracle eigenvalue, infinite for an empty list"""
    if not eigs:
        return float("inf")
    return float(min(abs(lam - e.lam) for e in eigs))
