"""Helmholtz layer potentials in the plane.

The fundamental solution is G_k(x, y) = (i/4) H_0(k|x - y|). Matrices between two
disjoint curves use the plain trapezoid rule. On-surface operators split off the
logarithmic part of the kernel and integrate it with trigonometric product weights.
"""
from typing import Dict
from typing import Optional
from typing import Union

import functools
import numpy as np

from dataclasses import dataclass
from dataclasses import field
from loguru import logger
from scipy import signal
from scipy.spatial.distance import cdist

from ioduality import specfun
from ioduality.exceptions import CoincidenceError
from ioduality.exceptions import NearSurfaceError
from ioduality.geometry import DiscretizedCurve
from ioduality.geometry import SceneGeometry
from ioduality.geometry import make_circle

NEAR_SURFACE_TOL = 1e-6
COINCIDENCE_TOL = 1e-12
# offsets used to reach the boundary from one side, in multiples of `offset`
_SIDE_STEPS = np.arange(1, 5)
_EXTRAPOLATION_WEIGHTS = np.array([4.0, -6.0, 4.0, -1.0])


@dataclass(frozen=True)
class WaveContext:
    """Spectral parameter lambda = k^2 > 0"""

    lam: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValueError(f"Spectral parameter must be positive, got {self.lam}")

    @property
    def k(self) -> float:
        return float(np.sqrt(self.lam))

    @classmethod
    def from_wavenumber(cls, k: float) -> "WaveContext":
        return cls(float(k) ** 2)


@dataclass
class OperatorMatrix:
    """Dense complex matrix mapping nodal values on `source` to nodal values on `target`"""

    entries: np.ndarray
    source: Optional[DiscretizedCurve]
    target: Optional[DiscretizedCurve]
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        rows, cols = self.entries.shape
        if self.target is not None and rows != len(self.target):
            raise ValueError(
                f"{self.kind} has {rows} rows for a target of {len(self.target)} nodes"
            )
        if self.source is not None and cols != len(self.source):
            raise ValueError(
                f"{self.kind} has {cols} columns for a source of {len(self.source)} nodes"
            )

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(
                self.entries @ other.entries, other.source, self.target, f"{self.kind}*{other.kind}"
            )
        return self.entries @ other

    def __array__(self, dtype=None):
        return np.asarray(self.entries, dtype=dtype)


def _hankel_of_distance(k: float, r: np.ndarray, order: int = 0):
    if np.any(r < COINCIDENCE_TOL):
        raise CoincidenceError("Fundamental solution evaluated at coincident points")
    return specfun.hankel1(order, k * r)


def green2d(k: float, x: np.ndarray, y: np.ndarray):
    """Outgoing fundamental solution (i/4) H_0(k|x - y|)

    Args:
        k: wavenumber
        x: point(s) of shape (..., 2)
        y: point(s) of shape (..., 2), broadcast against x
    """
    r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    return 0.25j * _hankel_of_distance(k, r)


def _check_distance(curve: DiscretizedCurve, points: np.ndarray):
    distance = cdist(np.atleast_2d(points), curve.points)
    if np.min(distance) <= NEAR_SURFACE_TOL:
        raise NearSurfaceError(
            f"Evaluation point within {NEAR_SURFACE_TOL} of {curve!r}, use an on-surface operator"
        )
    return distance


def single_layer_matrix(curve: DiscretizedCurve, points: np.ndarray, k: float) -> np.ndarray:
    """Trapezoid matrix of the single layer potential from `curve` to off-surface `points`"""
    r = _check_distance(curve, points)
    return 0.25j * _hankel_of_distance(k, r) * curve.weights[None, :]


def double_layer_matrix(curve: DiscretizedCurve, points: np.ndarray, k: float) -> np.ndarray:
    """Trapezoid matrix of the double layer potential (normal derivative in y of G_k)"""
    points = np.atleast_2d(points)
    r = _check_distance(curve, points)
    diff = points[:, None, :] - curve.points[None, :, :]
    cos_term = np.einsum("ijd,jd->ij", diff, curve.normals) / r
    return 0.25j * k * _hankel_of_distance(k, r, 1) * cos_term * curve.weights[None, :]


def single_layer_gradient(curve: DiscretizedCurve, points: np.ndarray, k: float) -> np.ndarray:
    """Gradient in x of the single layer matrix, shape (2, n_points, n_nodes)"""
    points = np.atleast_2d(points)
    r = _check_distance(curve, points)
    diff = points[:, None, :] - curve.points[None, :, :]
    radial = -0.25j * k * _hankel_of_distance(k, r, 1) / r * curve.weights[None, :]
    return np.moveaxis(radial[..., None] * diff, -1, 0)


def assemble_L(scene: SceneGeometry, ctx: WaveContext) -> OperatorMatrix:
    """Incident-wave operator from densities on the source curve to traces on the scatterer

    Entries are conj(G_k(x_i, y_j)) w_j with x_i on the scatterer and y_j on the source curve.
    """
    r = cdist(scene.obstacle.points, scene.source.points)
    entries = np.conj(0.25j * _hankel_of_distance(ctx.k, r)) * scene.source.weights[None, :]
    return OperatorMatrix(entries, scene.source, scene.obstacle, "L", {"lam": ctx.lam})


def assemble_Lstar(scene: SceneGeometry, ctx: WaveContext) -> OperatorMatrix:
    """Single layer from densities on the scatterer boundary to values on the source curve"""
    r = cdist(scene.source.points, scene.obstacle.points)
    entries = 0.25j * _hankel_of_distance(ctx.k, r) * scene.obstacle.weights[None, :]
    return OperatorMatrix(entries, scene.obstacle, scene.source, "Lstar", {"lam": ctx.lam})


def weighted_adjoint(op: OperatorMatrix) -> np.ndarray:
    """Matrix of the L2 adjoint of `op` with respect to the quadrature weights

    Returns W_source^-1 (W_target A)^H.
    """
    weighted = op.target.weights[:, None] * op.entries
    return weighted.conj().T / op.source.weights[:, None]


def eval_single_layer(
    curve: DiscretizedCurve, density: np.ndarray, ctx: WaveContext, points: np.ndarray
) -> np.ndarray:
    """Single layer field sum_j G_k(p, y_j) mu_j w_j at points away from the curve

    Raises:
        NearSurfaceError: if a point lies within 1e-6 of a node of the curve
    """
    return single_layer_matrix(curve, points, ctx.k) @ np.asarray(density)


def eval_combined_layer(
    curve: DiscretizedCurve,
    density: np.ndarray,
    ctx: WaveContext,
    points: np.ndarray,
    eta: float,
) -> np.ndarray:
    """Combined field (double layer - i eta single layer) of a density"""
    matrix = double_layer_matrix(curve, points, ctx.k) - 1j * eta * single_layer_matrix(
        curve, points, ctx.k
    )
    return matrix @ np.asarray(density)


@functools.lru_cache(maxsize=16)
def kress_log_weights(N: int) -> np.ndarray:
    """Trigonometric product weights for the kernel ln(4 sin^2((t - tau)/2))

    Returns the N x N circulant matrix R with R[i, j] = R(t_i - t_j) for N = 2n nodes.
    """
    n = N // 2
    t = 2 * np.pi * np.arange(N) / N
    m = np.arange(1, n)
    r = -2 * np.pi / n * np.sum(np.cos(np.outer(t, m)) / m, axis=1)
    r -= np.pi / n**2 * np.cos(n * t)
    idx = np.subtract.outer(np.arange(N), np.arange(N)) % N
    weights = r[idx]
    weights.setflags(write=False)
    return weights


def assemble_singular_ops(curve: DiscretizedCurve, ctx: WaveContext) -> Dict[str, OperatorMatrix]:
    """Single, double and adjoint double layer operators on the curve itself

    Args:
        curve: analytic curve with an even node count
        ctx: spectral parameter

    Returns:
        ops: dictionary with `S_op`, `K_op` and `Kp_op` acting on nodal densities
    """
    N = len(curve)
    k = ctx.k
    t = curve.t
    x = curve.points
    speed = curve.jacobian
    raw_normal = curve.normals * speed[:, None]

    diff = x[:, None, :] - x[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    off = ~np.eye(N, dtype=bool)
    r_safe = np.where(off, r, 1.0)
    dt = np.subtract.outer(t, t)
    log_term = np.where(off, np.log(4 * np.sin(dt / 2) ** 2 + (~off)), 0.0)

    j0 = specfun.bessel_j(0, k * r_safe)
    j1 = specfun.bessel_j(1, k * r_safe)
    h0 = specfun.hankel1(0, k * r_safe)
    h1 = specfun.hankel1(1, k * r_safe)
    R = kress_log_weights(N)
    h = 2 * np.pi / N

    # single layer
    m_full = 0.25j * h0 * speed[None, :]
    m1 = -j0 * speed[None, :] / (4 * np.pi)
    m2 = np.where(off, m_full - m1 * log_term, 0.0)
    diag_m2 = (
        0.25j - np.euler_gamma / (2 * np.pi) - np.log(k * speed / 2) / (2 * np.pi)
    ) * speed
    m2[~off] = diag_m2
    m1 = np.where(off, m1, -speed[None, :] / (4 * np.pi) * np.ones((N, 1)))
    S_op = R * m1 + h * m2

    curvature_term = np.einsum("id,id->i", curve.second, raw_normal) / speed**2 / (4 * np.pi)

    # double layer, normal at the integration node
    cos_src = np.einsum("ijd,jd->ij", diff, raw_normal) / r_safe
    l_full = 0.25j * k * h1 * cos_src
    l1 = np.where(off, -k * j1 * cos_src / (4 * np.pi), 0.0)
    l2 = np.where(off, l_full - l1 * log_term, 0.0)
    l2[~off] = curvature_term
    K_op = R * l1 + h * l2

    # adjoint double layer, normal at the target node
    cos_tgt = np.einsum("ijd,id->ij", diff, curve.normals) / r_safe
    k_full = -0.25j * k * h1 * cos_tgt * speed[None, :]
    k1 = np.where(off, k * j1 * cos_tgt * speed[None, :] / (4 * np.pi), 0.0)
    k2 = np.where(off, k_full - k1 * log_term, 0.0)
    k2[~off] = curvature_term
    Kp_op = R * k1 + h * k2

    meta = {"lam": ctx.lam}
    return {
        "S_op": OperatorMatrix(S_op, curve, curve, "singlelayer", meta),
        "K_op": OperatorMatrix(K_op, curve, curve, "doublelayer", meta),
        "Kp_op": OperatorMatrix(Kp_op, curve, curve, "adjointdouble", meta),
    }


def upsample_density(values: np.ndarray, n_fine: int) -> np.ndarray:
    """Trigonometric interpolation of periodic nodal values onto `n_fine` uniform nodes"""
    values = np.asarray(values)
    if n_fine == values.shape[-1]:
        return values
    return signal.resample(values, n_fine, axis=-1)


def _side_points(curve: DiscretizedCurve, offset: float, side: int) -> np.ndarray:
    """Points x_i + side * s * offset * nu_i for s = 1..4, shape (4, N, 2)"""
    steps = side * offset * _SIDE_STEPS
    return curve.points[None, :, :] + steps[:, None, None] * curve.normals[None, :, :]


def extrapolate_to_boundary(values: np.ndarray) -> np.ndarray:
    """Cubic extrapolation to s = 0 from samples at s = h, 2h, 3h, 4h (leading axis)"""
    return np.tensordot(_EXTRAPOLATION_WEIGHTS, values, axes=1)


def boundary_limit(
    field_fn, curve: DiscretizedCurve, offset: float = 5e-3, side: int = 1
) -> np.ndarray:
    """One-sided boundary limit of a field sampled along the normals

    Args:
        field_fn: callable mapping an (M, 2) array of points to M values
        curve: curve on whose nodes the limit is taken
        offset: smallest normal offset, the samples sit at 1..4 times this value
        side: +1 for the exterior (outward normal side), -1 for the interior
    """
    pts = _side_points(curve, offset, side)
    values = field_fn(pts.reshape(-1, 2)).reshape(len(_SIDE_STEPS), len(curve))
    return extrapolate_to_boundary(values)


def single_layer_normal_jump(
    curve: DiscretizedCurve,
    density: np.ndarray,
    ctx: WaveContext,
    offset: float = 5e-3,
    n_fine: int = 8192,
) -> np.ndarray:
    """Exterior minus interior normal derivative of the single layer field on the curve nodes

    The density is interpolated onto a fine copy of the curve so that the trapezoid
    rule stays accurate at the small normal offsets used for the one-sided limits.
    """
    fine = curve.refine(n_fine)
    fine_density = upsample_density(density, n_fine)
    normal_derivative = {}
    for side in (1, -1):
        pts = _side_points(curve, offset, side)
        grad = single_layer_gradient(fine, pts.reshape(-1, 2), ctx.k) @ fine_density
        grad = grad.reshape(2, len(_SIDE_STEPS), len(curve))
        dn = grad[0] * curve.normals[None, :, 0] + grad[1] * curve.normals[None, :, 1]
        normal_derivative[side] = extrapolate_to_boundary(dn)
    return normal_derivative[1] - normal_derivative[-1]


def measure_jump_constant(
    ctx: Optional[WaveContext] = None,
    curve: Optional[DiscretizedCurve] = None,
    offset: float = 5e-3,
) -> complex:
    """Numerically measured constant c in [d_nu u]_(ext - int) = c mu for a single layer field

    Args:
        ctx: spectral parameter, defaults to k = 1.5
        curve: test curve, defaults to the unit circle with 128 nodes
        offset: smallest normal offset of the one-sided samples
    """
    ctx = ctx or WaveContext.from_wavenumber(1.5)
    curve = curve or make_circle((0.0, 0.0), 1.0, 128)
    density = 1.0 + 0.5 * np.cos(curve.t) + 0.25 * np.sin(2 * curve.t)
    jump = single_layer_normal_jump(curve, density, ctx, offset=offset)
    return complex(np.mean(jump / density))


@functools.lru_cache(maxsize=None)
def jump_sign() -> int:
    """Sign of the single layer normal derivative jump, fixed once by `measure_jump_constant`"""
    constant = measure_jump_constant()
    sign = int(np.sign(constant.real))
    if abs(constant - sign) > 1e-4:
        raise ValueError(f"Measured jump constant {constant} is not a unit sign")
    logger.debug(f"Single layer jump constant measured as {constant:.10f}")
    return sign


def as_density(values: Union[np.ndarray, float], curve: DiscretizedCurve) -> np.ndarray:
    """Broadcast a scalar or validate a nodal array against a curve"""
    values = np.asarray(values, dtype=complex)
    if values.ndim == 0:
        return np.full(len(curve), values)
    if values.shape[0] != len(curve):
        raise ValueError(f"Density has {values.shape[0]} values for {len(curve)} nodes")
    return values
