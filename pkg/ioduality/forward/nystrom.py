"""Combined field integral equation for the sound-soft obstacle on any analytic curve."""
from typing import Optional

import numpy as np
import scipy.linalg

from loguru import logger

from ioduality import potentials
from ioduality import specfun
from ioduality.exceptions import GeometryError
from ioduality.exceptions import LinearSolveError
from ioduality.forward.base import ForwardSolver
from ioduality.forward.base import ModalCore
from ioduality.forward.base import ScatterSolution
from ioduality.forward.base import ScatteringProblem
from ioduality.forward.modal import default_truncation
from ioduality.geometry import DiscretizedCurve
from ioduality.geometry import SceneGeometry
from ioduality.potentials import WaveContext

MAX_CONDITION = 1e12


class NystromSolution(ScatterSolution):
    """Scattered field (double layer - i eta single layer)[psi] of a boundary density"""

    def __init__(
        self,
        problem: ScatteringProblem,
        ctx: WaveContext,
        curve: DiscretizedCurve,
        density: np.ndarray,
        eta: float,
        incident_trace: Optional[np.ndarray] = None,
    ):
        super().__init__(problem, ctx)
        self.curve = curve
        self.density = density
        self.eta = eta
        self.incident_trace = incident_trace

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return potentials.eval_combined_layer(self.curve, self.density, self.ctx, points, self.eta)

    def far_field(self, angles: np.ndarray) -> np.ndarray:
        k = self.ctx.k
        angles = np.asarray(angles, dtype=float)
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        phase = np.exp(-1j * k * directions @ self.curve.points.T)
        factor = -1j * k * directions @ self.curve.normals.T - 1j * self.eta
        prefactor = np.exp(0.25j * np.pi) / np.sqrt(8 * np.pi * k)
        return prefactor * (factor * phase * self.curve.weights[None, :]) @ self.density

    def boundary_trace(self, offset: float = 5e-3, n_fine: int = 8192) -> np.ndarray:
        """Exterior limit of the scattered field on the curve nodes

        The density is interpolated onto a fine copy of the curve and the field, sampled at
        one to four times `offset` along the normals, is extrapolated to the boundary.
        """
        fine = self.curve.refine(n_fine)
        fine_density = potentials.upsample_density(self.density, n_fine)

        def field(pts):
            return potentials.eval_combined_layer(fine, fine_density, self.ctx, pts, self.eta)

        return potentials.boundary_limit(field, self.curve, offset=offset, side=1)


class DirichletNystromSolver:
    """Factorized (1/2 + K - i eta S) on one curve, reused for many right-hand sides

    Args:
        curve: analytic closed curve with an even node count
        ctx: spectral parameter
        eta: coupling parameter, defaults to k
    """

    def __init__(self, curve: DiscretizedCurve, ctx: WaveContext, eta: Optional[float] = None):
        self.curve = curve
        self.ctx = ctx
        self.eta = ctx.k if eta is None else float(eta)
        ops = potentials.assemble_singular_ops(curve, ctx)
        system = (
            0.5 * np.eye(len(curve)) + ops["K_op"].entries - 1j * self.eta * ops["S_op"].entries
        )
        self.condition = float(np.linalg.cond(system))
        if not np.isfinite(self.condition) or self.condition > MAX_CONDITION:
            raise LinearSolveError(
                f"Combined field system is ill conditioned (cond={self.condition:.3g}) at k={ctx.k}"
            )
        self._lu = scipy.linalg.lu_factor(system)
        logger.trace(f"Nystrom system factorized, cond={self.condition:.3g}")

    def solve(self, incident_trace: np.ndarray) -> np.ndarray:
        """Density psi for the boundary data -incident_trace, one column per right-hand side"""
        return scipy.linalg.lu_solve(self._lu, -np.asarray(incident_trace, dtype=complex))


def solve_dirichlet_nystrom(
    curve: DiscretizedCurve,
    ctx: WaveContext,
    incident_trace: np.ndarray,
    eta: Optional[float] = None,
) -> NystromSolution:
    """Sound-soft scattering of an incident field given by its trace on the curve

    Args:
        curve: scatterer boundary
        ctx: spectral parameter
        incident_trace: incident field at the nodes
        eta: coupling parameter, defaults to k

    Raises:
        LinearSolveError: if the system is numerically singular
    """
    solver = DirichletNystromSolver(curve, ctx, eta)
    density = solver.solve(incident_trace)
    problem = ScatteringProblem(kind="dirichlet")
    return NystromSolution(problem, ctx, curve, density, solver.eta, np.asarray(incident_trace))


class NystromSolver(ForwardSolver):
    """Integral equation solver for sound-soft obstacles of any supported shape"""

    name = "nystrom"
    route_tag = 2

    def __init__(self, scene: SceneGeometry, problem: ScatteringProblem, ctx: WaveContext):
        super().__init__(scene, problem, ctx)
        self._solver = DirichletNystromSolver(scene.obstacle, ctx)

    @classmethod
    def supports(cls, scene: SceneGeometry, problem: ScatteringProblem) -> bool:
        return problem.kind == "dirichlet"

    def _incident_matrix(self, kernel: str) -> np.ndarray:
        entries = potentials.assemble_L(self.scene, self.ctx).entries
        if kernel == "conjugate":
            return entries
        if kernel == "direct":
            return np.conj(entries / self.scene.source.weights[None, :]) * self.scene.source.weights
        raise ValueError(f"Unknown kernel {kernel!r}")

    def emit(self, density: np.ndarray, kernel: str = "conjugate") -> NystromSolution:
        trace = self._incident_matrix(kernel) @ np.asarray(density)
        psi = self._solver.solve(trace)
        obstacle = self.scene.obstacle
        return NystromSolution(self.problem, self.ctx, obstacle, psi, self._solver.eta, trace)

    def near_field(self) -> np.ndarray:
        """Scattered field on the source curve for every unit nodal density"""
        psi = self._solver.solve(self._incident_matrix("conjugate"))
        k = self.ctx.k
        receivers = self.scene.source.points
        measure = potentials.double_layer_matrix(self.scene.obstacle, receivers, k)
        Lstar = potentials.assemble_Lstar(self.scene, self.ctx).entries
        measure = measure - 1j * self._solver.eta * Lstar
        return measure @ psi

    def modal_core(self) -> ModalCore:
        """Scattering matrix from far field patterns of regular cylindrical waves

        The expansion center is the quadrature centroid of the obstacle. Each incident wave
        J_n(k r) e^{i n theta} is scattered once through the factorized system and the
        outgoing coefficients are read off the far field by a discrete Fourier transform.

        Raises:
            GeometryError: if a source node lies inside the circle circumscribing the
                obstacle about the centroid
        """
        k = self.ctx.k
        obstacle = self.scene.obstacle
        center = np.average(obstacle.points, axis=0, weights=obstacle.weights)
        rel = obstacle.points - center
        radius = float(np.max(np.hypot(rel[:, 0], rel[:, 1])))
        gap = self.scene.source.points - center
        if np.min(np.hypot(gap[:, 0], gap[:, 1])) <= radius:
            raise GeometryError(
                "The source curve must lie outside the circle circumscribing the obstacle"
            )
        M = default_truncation(k, radius)
        orders = np.arange(-M, M + 1)
        theta = np.arctan2(rel[:, 1], rel[:, 0])
        regular = specfun.bessel_j(
            orders[None, :], k * np.hypot(rel[:, 0], rel[:, 1])[:, None]
        ) * np.exp(1j * np.outer(theta, orders))
        density = self._solver.solve(regular)
        solution = NystromSolution(self.problem, self.ctx, obstacle, density, self._solver.eta)

        n_angles = 4 * (M + 1)
        angles = 2 * np.pi * np.arange(n_angles) / n_angles
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        pattern = solution.far_field(angles) * np.exp(1j * k * directions @ center)[:, None]
        coeffs = np.exp(-1j * np.outer(orders, angles)) @ pattern / n_angles
        prefactor = np.sqrt(2 / (np.pi * k)) * np.exp(-0.25j * np.pi)
        T = (1j**orders)[:, None] * coeffs / prefactor
        logger.trace(f"Nystrom scattering matrix with {len(orders)} orders about {center}")
        return ModalCore(T, center, k)
