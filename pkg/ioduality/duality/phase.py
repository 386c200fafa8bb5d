from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np

from dataclasses import dataclass
from dataclasses import field
from scipy import optimize

from ioduality.exceptions import DegenerateRangeError
from ioduality.nearfield import FormMatrix

TWO_PI = 2 * np.pi
ZERO_TOL = 1e-13
ARG_SNAP = 1e-12
HALF_TURN_TOL = 1e-6
CHUNK = 60


def wrap_phase(values: np.ndarray) -> np.ndarray:
    """Arguments mapped to [0, 2 pi), with roundoff just below 2 pi sent to 0"""
    args = np.mod(np.angle(values), TWO_PI)
    return np.where(args > TWO_PI - ARG_SNAP, 0.0, args)


@dataclass
class PhaseSample:
    """Phase information of the form matrix at one spectral parameter

    `phi` is the smallest argument in [0, 2 pi) over the filtered numerical range and
    `phi_sup` the largest. `psi` is the duality indicator, `phi` for sigma = +1 and
    2 pi - `phi_sup` for sigma = -1.
    """

    lam: float
    sigma: int = 1
    phi: float = float("nan")
    phi_sup: float = float("nan")
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    nr_boundary: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    nr_support: np.ndarray = field(default_factory=lambda: np.zeros(0))
    skipped: bool = False
    reason: str = ""

    @classmethod
    def skip(cls, lam: float, sigma: int, reason: str) -> "PhaseSample":
        return cls(lam=lam, sigma=sigma, skipped=True, reason=reason)

    @property
    def psi(self) -> float:
        if self.skipped:
            return float("nan")
        if self.sigma == 1:
            return max(self.phi, 0.0)
        return max(TWO_PI - self.phi_sup, 0.0)

    @property
    def eigenphases(self) -> np.ndarray:
        return wrap_phase(self.eigenvalues)

    @property
    def n_retained(self) -> int:
        return len(self.eigenvalues)

    @property
    def min_eigphase(self) -> float:
        if self.skipped or not len(self.eigenvalues):
            return float("nan")
        return float(np.min(self.eigenphases))


def _hermitian_part(A: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    rot = np.exp(-1j * thetas)[:, None, None] * A[None, :, :]
    return 0.5 * (rot + np.conj(np.swapaxes(rot, 1, 2)))


def _boundary(A: np.ndarray, thetas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Numerical range boundary points v^H A v and support values along the directions"""
    points = np.empty(len(thetas), dtype=complex)
    support = np.empty(len(thetas))
    for start in range(0, len(thetas), CHUNK):
        block = thetas[start : start + CHUNK]
        values, vectors = np.linalg.eigh(_hermitian_part(A, block))
        top = vectors[:, :, -1]
        points[start : start + CHUNK] = np.einsum("ti,ij,tj->t", top.conj(), A, top)
        support[start : start + CHUNK] = values[:, -1]
    return points, support


def _arc(args: np.ndarray) -> Tuple[float, float]:
    """Reference direction in the middle of the largest gap and the gap size"""
    ordered = np.sort(args)
    gaps = np.diff(np.append(ordered, ordered[0] + TWO_PI))
    g = int(np.argmax(gaps))
    return float(ordered[g] + gaps[g] / 2), float(gaps[g])


def _refine(
    A: np.ndarray,
    thetas: np.ndarray,
    rel: np.ndarray,
    idx: int,
    ref: float,
    sign: int,
    cutoff: float,
):
    """Golden-section search in the direction angle around grid index `idx`

    Minimizes sign * (argument relative to `ref`) over boundary points of modulus at least
    `cutoff` and falls back to the grid value when the grid triple does not bracket a minimum.
    """
    n = len(thetas)
    step = TWO_PI / n

    def objective(theta):
        point, _ = _boundary(A, np.array([theta]))
        if abs(point[0]) < cutoff:
            return np.inf
        return sign * np.mod(np.angle(point[0]) - ref, TWO_PI)

    theta0 = thetas[idx]
    best = sign * rel[idx]
    try:
        theta_star = optimize.golden(
            objective, brack=(theta0 - step, theta0, theta0 + step), tol=1e-8
        )
        best = min(best, objective(theta_star))
    except (ValueError, RuntimeError):
        pass
    return sign * best


def phase_floor(
    M: Union[FormMatrix, np.ndarray],
    delta_rel: float = 1e-6,
    theta_points: int = 720,
    lam: Optional[float] = None,
    refine: bool = True,
) -> PhaseSample:
    """Smallest argument over the numerical range of the form matrix

    Eigenvalues and numerical range boundary points whose modulus is below `delta_rel`
    times the largest one are discarded. The retained points lie in an arc of directions,
    the complement of the largest angular gap; its ends are refined by golden-section
    search in the direction angle.

    Args:
        M: form matrix or a square complex array
        delta_rel: relative modulus filter in (0, 1)
        theta_points: number of directions sampled on the unit circle
        lam: spectral parameter recorded in the sample
        refine: whether to refine the arc ends beyond the direction grid

    Raises:
        DegenerateRangeError: if the matrix is numerically zero or if the retained points
            surround the origin so that the phase spans the full circle
    """
    if not 0 < delta_rel < 1:
        raise ValueError(f"delta_rel must lie in (0, 1), got {delta_rel}")
    sigma = M.sigma if isinstance(M, FormMatrix) else 1
    A = np.asarray(M.M if isinstance(M, FormMatrix) else M, dtype=complex)
    lam = float("nan") if lam is None else float(lam)
    fro = np.linalg.norm(A)
    if not np.isfinite(fro):
        raise ValueError("Form matrix has non-finite entries")
    mu = np.linalg.eigvals(A)
    mu_max = np.max(np.abs(mu)) if fro > 0 else 0.0
    if fro == 0 or mu_max < ZERO_TOL * fro:
        raise DegenerateRangeError(
            "Spectrum is numerically zero, the phase of the numerical range spans the full circle"
        )
    eigs = mu[np.abs(mu) >= delta_rel * mu_max]

    thetas = TWO_PI * np.arange(theta_points) / theta_points
    points, support = _boundary(A, thetas)
    cutoff = delta_rel * np.max(np.abs(points))
    keep = np.abs(points) >= cutoff
    candidates = np.concatenate([points[keep], eigs])
    ref, gap = _arc(wrap_phase(candidates))
    if gap < np.pi - HALF_TURN_TOL:
        raise DegenerateRangeError(
            "Retained numerical range surrounds the origin, phase spans full circle"
        )

    rel_points = np.mod(np.angle(points) - ref, TWO_PI)
    rel_all = np.mod(np.angle(candidates) - ref, TWO_PI)
    lo, hi = float(np.min(rel_all)), float(np.max(rel_all))
    if refine:
        masked = np.where(keep, rel_points, np.inf)
        lo = min(lo, _refine(A, thetas, rel_points, int(np.argmin(masked)), ref, 1, cutoff))
        masked = np.where(keep, rel_points, -np.inf)
        hi = max(hi, _refine(A, thetas, rel_points, int(np.argmax(masked)), ref, -1, cutoff))

    start = float(np.mod(ref + lo, TWO_PI))
    if start > TWO_PI - ARG_SNAP:
        start = 0.0
    span = hi - lo
    if start + span >= TWO_PI:
        # the arc crosses the positive real axis
        phi, phi_sup = 0.0, TWO_PI
    else:
        phi, phi_sup = start, start + span
    return PhaseSample(
        lam=lam,
        sigma=sigma,
        phi=phi,
        phi_sup=phi_sup,
        eigenvalues=eigs,
        nr_boundary=points[keep],
        nr_support=support,
    )


def arc_distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    """Hausdorff distance between two arcs of directions given as (start, end)"""

    def circ(x, y):
        d = abs(x - y) % TWO_PI
        return min(d, TWO_PI - d)

    return max(circ(a[0], b[0]), circ(a[1], b[1]))
