"""Source synthesis: emitted-wave densities reproducing the near field of a probing density."""
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from dataclasses import dataclass
from dataclasses import field
from loguru import logger

from ioduality import oracles
from ioduality.exceptions import GeometryError
from ioduality.exceptions import OverlapError
from ioduality.forward import ScatteringProblem
from ioduality.forward import get_solver
from ioduality.geometry import DiscretizedCurve
from ioduality.geometry import SceneGeometry
from ioduality.geometry import make_circle
from ioduality.nearfield import assemble_FS_direct
from ioduality.potentials import WaveContext
from ioduality.potentials import as_density
from ioduality.potentials import single_layer_matrix

DEFAULT_ALPHAS = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)
EIGENVALUE_TOL = 1e-6
MODE_MARGIN = 2


def _check_alphas(alphas: Sequence[float]) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or not len(alphas) or np.any(alphas <= 0):
        raise ValueError("Tikhonov parameters must be a non-empty list of positive values")
    if np.any(np.diff(alphas) >= 0):
        raise ValueError("Tikhonov parameters must be strictly decreasing")
    return alphas


def _weighted_norm(curve_weights: np.ndarray, values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(curve_weights * np.abs(values) ** 2)))


def tikhonov_path(A: np.ndarray, b: np.ndarray, alphas: Sequence[float]):
    """Tikhonov solutions x_a = V diag(s / (s^2 + a)) U^H b for every a in `alphas`

    Returns:
        solutions: one row per parameter
        residuals: ||A x_a - b|| per parameter
        singular_values: singular values of A
    """
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    coeffs = U.conj().T @ b
    outside = np.linalg.norm(b - U @ coeffs) ** 2
    solutions, residuals = [], []
    for alpha in alphas:
        filt = s / (s**2 + alpha)
        solutions.append(Vh.conj().T @ (filt * coeffs))
        misfit = (alpha / (s**2 + alpha)) * coeffs
        residuals.append(float(np.sqrt(np.linalg.norm(misfit) ** 2 + outside)))
    return np.array(solutions), np.array(residuals), s


@dataclass
class DensityProbeResult:
    """Regularized least squares fits L phi ~ target along a Tikhonov path

    `mode_gains[i]` is the weighted norm of L applied to the normalized Fourier mode of
    order `modes[i]` on the source circle; their spread grows sharply when the spectral
    parameter is a Dirichlet eigenvalue of the region the source curve encloses.
    """

    alphas: np.ndarray
    residuals: np.ndarray
    target_norm: float
    singular_values: np.ndarray
    modes: np.ndarray
    mode_gains: np.ndarray
    warnings: List[str] = field(default_factory=list)

    @property
    def condition_ratio(self) -> float:
        """Largest to smallest gain over the low Fourier modes"""
        return float(np.max(self.mode_gains) / np.min(self.mode_gains))

    @property
    def relative_residuals(self) -> np.ndarray:
        if self.target_norm == 0:
            return np.zeros_like(self.residuals)
        return self.residuals / self.target_norm


def _eigenvalue_warnings(curves: Sequence[DiscretizedCurve], ctx: WaveContext) -> List[str]:
    warnings = []
    window = (max(ctx.lam - EIGENVALUE_TOL, 0.0), ctx.lam + EIGENVALUE_TOL)
    for curve in curves:
        if not curve.is_circle:
            continue
        for eig in oracles.dirichlet_disk_eigs(curve.shape.radius, window):
            msg = (
                f"lambda={ctx.lam} is within {EIGENVALUE_TOL} of the Dirichlet eigenvalue "
                f"{eig.lam:.9f} (order {eig.order}) of the disk bounded by {curve!r}"
            )
            logger.warning(msg)
            warnings.append(msg)
    return warnings


def density_probe(
    curve_pair: Tuple[DiscretizedCurve, DiscretizedCurve],
    ctx: WaveContext,
    target: np.ndarray,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
) -> DensityProbeResult:
    """How well incident waves L phi from the source curve approximate a target trace

    Minimizes ||L phi - target||^2 + alpha ||phi||^2 in the weighted L2 norms of the two
    curves by a singular value decomposition of the weighted L matrix. Residuals that keep
    decreasing as alpha decreases are the numerical counterpart of a dense range.

    Args:
        curve_pair: (source curve, target curve)
        ctx: spectral parameter
        target: nodal values on the target curve
        alphas: strictly decreasing Tikhonov parameters
    """
    source, receiver = curve_pair
    alphas = _check_alphas(alphas)
    target = as_density(target, receiver)
    warnings = _eigenvalue_warnings([source, receiver], ctx)

    L = np.conj(single_layer_matrix(source, receiver.points, ctx.k))
    root_t, root_s = np.sqrt(receiver.weights), np.sqrt(source.weights)
    A = root_t[:, None] * L / root_s[None, :]
    b = root_t * target
    _, residuals, s = tikhonov_path(A, b, alphas)

    radius = source.shape.radius if source.is_circle else source.bounding_radius()
    top = int(np.ceil(ctx.k * radius)) + MODE_MARGIN
    modes = np.arange(-top, top + 1)
    basis = np.exp(1j * np.outer(source.t, modes)) / np.sqrt(source.arclength)
    gains = np.linalg.norm(root_t[:, None] * (L @ basis), axis=0)
    return DensityProbeResult(
        alphas=alphas,
        residuals=residuals,
        target_norm=float(np.linalg.norm(b)),
        singular_values=s,
        modes=modes,
        mode_gains=gains,
        warnings=warnings,
    )


@dataclass
class SynthesisGeometry:
    """Fitting circle around the presumed scatterer region and an exclusion circle around
    the source domain

    Emitted waves are outgoing from the source curve while L phi is not, so the two fields
    can only be matched on a region that leaves the source domain outside. The fit runs on
    `gamma_outer`, whose disk must contain the scatterer and stay clear of `gamma_inner`.

    Args:
        gamma_outer: circle of radius `presumed_region_radius`, the fitting surface
        gamma_inner: circle of radius rho_B + epsilon around the source domain
        epsilon: margin of the inner circle
    """

    gamma_outer: DiscretizedCurve
    gamma_inner: DiscretizedCurve
    epsilon: float

    @classmethod
    def around(
        cls,
        source: DiscretizedCurve,
        presumed_region_radius: float = 1.2,
        epsilon: float = 0.1,
        center: Sequence[float] = (0.0, 0.0),
        n_outer: int = 128,
        n_inner: int = 64,
    ) -> "SynthesisGeometry":
        """Build the surface from the source curve and the presumed region alone

        Raises:
            GeometryError: if the source curve is not a circle or the inner circle reaches
                into the presumed region
        """
        if not source.is_circle:
            raise GeometryError("Source synthesis needs a circular source curve")
        if epsilon <= 0:
            raise GeometryError(f"epsilon must be positive, got {epsilon}")
        disk = source.shape
        inner = make_circle(disk.center, disk.radius + epsilon, n_inner)
        outer = make_circle(center, presumed_region_radius, n_outer)
        gap = np.linalg.norm(np.asarray(disk.center) - np.asarray(center)) - disk.radius - epsilon
        if gap <= presumed_region_radius:
            raise GeometryError(
                f"Inner circle of radius {disk.radius + epsilon} reaches into the presumed "
                f"region of radius {presumed_region_radius}"
            )
        return cls(outer, inner, float(epsilon))

    @property
    def points(self) -> np.ndarray:
        return self.gamma_outer.points

    @property
    def weights(self) -> np.ndarray:
        return self.gamma_outer.weights

    def check(self, scene: SceneGeometry):
        """Check the surface against a scene

        Raises:
            OverlapError: if the scatterer is not strictly inside the outer circle, or if the
                inner circle meets the scatterer or does not enclose the source curve
        """
        obstacle = scene.obstacle.points
        if not np.all(self.gamma_outer.contains(obstacle)):
            raise OverlapError("Scatterer is not inside the outer synthesis circle")
        if np.any(self.gamma_inner.contains(obstacle)) or np.any(
            scene.obstacle.contains(self.gamma_inner.points)
        ):
            raise OverlapError("Inner synthesis circle meets the scatterer")
        if not np.all(self.gamma_inner.contains(scene.source.points)):
            raise OverlapError("Inner synthesis circle does not enclose the source curve")


@dataclass
class SynthesisResult:
    alphas: np.ndarray
    psis: np.ndarray
    surrogate_residuals: np.ndarray
    data_residuals: np.ndarray
    trace_misfits: np.ndarray
    target_norm: float
    trace_norm: float

    @property
    def psi_norms(self) -> np.ndarray:
        return np.linalg.norm(self.psis, axis=1)


def synthesize_sources(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
    phi: np.ndarray,
    geometry: Optional[SynthesisGeometry] = None,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    solver: str = "auto",
) -> SynthesisResult:
    """Densities psi whose emitted waves conj(L) psi scatter like the incident wave L phi

    For each alpha, psi minimizes ||conj(L_G) psi - L_G phi||^2 + alpha ||psi||^2 on the
    fitting circle G of the presumed region, using only the source curve and the surface.
    The forward solver then scatters conj(L) psi off the true obstacle and the field on the
    source curve is compared with F_S phi. A spectral parameter at a Dirichlet eigenvalue
    of the presumed disk is logged as a warning.

    Args:
        scene: validated scene
        problem: scattering problem
        ctx: spectral parameter
        phi: probing density on the source curve
        geometry: synthesis surface, built around the source curve when not given
        alphas: strictly decreasing Tikhonov parameters
        solver: forward solver name

    Raises:
        OverlapError: if the surface does not fit the scene
        ExceptionalLambdaError: propagated from the forward solver
    """
    alphas = _check_alphas(alphas)
    source = scene.source
    phi = as_density(phi, source)
    geometry = geometry or SynthesisGeometry.around(source)
    geometry.check(scene)
    _eigenvalue_warnings([geometry.gamma_outer], ctx)

    emitted = single_layer_matrix(source, geometry.points, ctx.k)
    root_g, root_s = np.sqrt(geometry.weights), np.sqrt(source.weights)
    A = root_g[:, None] * emitted / root_s[None, :]
    b = root_g * (np.conj(emitted) @ phi)
    scaled, surrogate, _ = tikhonov_path(A, b, alphas)
    psis = scaled / root_s[None, :]

    engine = get_solver(solver, scene, problem, ctx)
    target = assemble_FS_direct(scene, problem, ctx, solver).apply(phi)
    to_obstacle = single_layer_matrix(source, scene.obstacle.points, ctx.k)
    incident_ref = np.conj(to_obstacle) @ phi
    data, traces = [], []
    for psi in psis:
        solution = engine.emit(psi, kernel="direct")
        scattered = solution.evaluate(source.points)
        data.append(_weighted_norm(source.weights, scattered - target))
        traces.append(_weighted_norm(scene.obstacle.weights, to_obstacle @ psi - incident_ref))
    logger.info(
        f"Synthesis at lambda={ctx.lam}: data residual {data[-1]:.3e} at alpha={alphas[-1]:.0e}"
    )
    return SynthesisResult(
        alphas=alphas,
        psis=psis,
        surrogate_residuals=surrogate,
        data_residuals=np.array(data),
        trace_misfits=np.array(traces),
        target_norm=_weighted_norm(source.weights, target),
        trace_norm=_weighted_norm(scene.obstacle.weights, incident_ref),
    )
