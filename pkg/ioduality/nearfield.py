"""Near field operator on the source curve, by simulation and by DtN factorization."""
from typing import Optional
from typing import Union

import numpy as np

from dataclasses import dataclass
from loguru import logger

from ioduality.exceptions import UnsupportedProblemError
from ioduality.forward import ForwardSolver
from ioduality.forward import ModalCore
from ioduality.forward import ScatteringProblem
from ioduality.forward import dtn_disk
from ioduality.forward import get_solver
from ioduality.geometry import DiscretizedCurve
from ioduality.geometry import SceneGeometry
from ioduality.potentials import WaveContext
from ioduality.potentials import assemble_L
from ioduality.potentials import assemble_Lstar
from ioduality.potentials import jump_sign

FACTORIZED_ROUTE_TAG = 3
CORE_ROUTE_OFFSET = 8


@dataclass
class NearFieldMatrix:
    """Matrix sending nodal source densities on S to the scattered field on S

    `entries[:, j]` is the scattered field for the incident wave L e_j, so quadrature
    weights of the source curve are folded into the columns.
    """

    entries: np.ndarray
    lam: float
    scene: SceneGeometry
    problem: ScatteringProblem
    route: str
    route_tag: int

    @property
    def ctx(self) -> WaveContext:
        return WaveContext(self.lam)

    @property
    def weights(self) -> np.ndarray:
        return self.scene.source.weights

    @property
    def kernel(self) -> np.ndarray:
        """Entries with the column quadrature weights divided out"""
        return self.entries / self.weights[None, :]

    def apply(self, density: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(density)

    def distance(self, other: "NearFieldMatrix") -> float:
        """Relative Frobenius distance to another near field matrix"""
        return relative_distance(self.entries, other.entries)


@dataclass
class FormMatrix:
    """Matrix M of the quadratic form of sigma F_S in outgoing wave coordinates"""

    M: np.ndarray
    sigma: int

    def quadratic_form(self, coordinates: np.ndarray) -> complex:
        v = np.asarray(coordinates)
        return complex(np.vdot(v, self.M @ v))


@dataclass
class NearFieldCore:
    """Near field form in outgoing cylindrical waves on the source curve

    The near field factors as F_S = A T (-i/4) A^H W with A[i, m] = H_m(k rho_i) e^{i m theta_i}
    about `center`, so (F_S phi, phi) = v^H C v for v = A^H W phi and C = (-i/4) T. The
    arguments taken by both forms coincide once A has full column rank on the source nodes,
    and C keeps every mode at its own scale.
    """

    entries: np.ndarray
    lam: float
    problem: ScatteringProblem
    route_tag: int
    center: np.ndarray

    @property
    def orders(self) -> np.ndarray:
        M = (len(self.entries) - 1) // 2
        return np.arange(-M, M + 1)

    def form(self, sigma: Optional[int] = None) -> FormMatrix:
        """Form matrix sigma C"""
        sigma = self.problem.sigma if sigma is None else int(sigma)
        return FormMatrix(sigma * self.entries, sigma)

    def coordinates(self, source: DiscretizedCurve, density: np.ndarray) -> np.ndarray:
        """Outgoing wave coordinates v = A^H W phi of a source density"""
        basis = ModalCore(self.entries, self.center, WaveContext(self.lam).k).outgoing_basis(
            source.points
        )
        return np.conj(basis).T @ (source.weights * np.asarray(density))


def assemble_core(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
    solver: Union[str, type] = "auto",
) -> NearFieldCore:
    """Near field form core (-i/4) T from the scattering matrix of the forward solver

    Args:
        scene: validated scene
        problem: scattering problem
        ctx: spectral parameter
        solver: forward solver name (`auto`, `modal`, `nystrom`) or class

    Raises:
        ExceptionalLambdaError: propagated from the forward solver
    """
    engine: ForwardSolver = get_solver(solver, scene, problem, ctx)
    core = engine.modal_core()
    route_tag = CORE_ROUTE_OFFSET + engine.route_tag
    return NearFieldCore(-0.25j * core.T, ctx.lam, problem, route_tag, core.center)


def relative_distance(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def assemble_FS_direct(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
    solver: Union[str, type] = "auto",
) -> NearFieldMatrix:
    """Near field by emitting L e_j from every source node, solving and measuring on S

    Args:
        scene: validated scene
        problem: scattering problem
        ctx: spectral parameter
        solver: forward solver name (`auto`, `modal`, `nystrom`) or class

    Raises:
        ExceptionalLambdaError: propagated from the forward solver
    """
    engine: ForwardSolver = get_solver(solver, scene, problem, ctx)
    entries = engine.near_field()
    return NearFieldMatrix(entries, ctx.lam, scene, problem, "direct", engine.route_tag)


def factorized_symbol(problem: ScatteringProblem, a: float, ctx: WaveContext, M: int):
    """Middle multiplier of the factorization and its sign relative to the jump constant

    Returns:
        symbol: DtN combination acting on traces on the scatterer boundary
        sign: -1 or +1, the near field is (sign / c) L* symbol L for the jump constant c
    """
    interior = dtn_disk("interior", a, ctx, M=M)
    exterior = dtn_disk("exterior", a, ctx, M=M)
    if problem.kind == "dirichlet":
        return interior - exterior, 1
    if problem.kind == "neumann":
        return interior - interior * exterior.inverse() * interior, -1
    index = dtn_disk("interior_n", a, ctx, n=problem.n, M=M)
    return (interior - exterior) * (index - exterior).inverse() * (interior - index), -1


def assemble_FS_factorized(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
    flip_sign: bool = False,
) -> NearFieldMatrix:
    """Near field from the Dirichlet-to-Neumann factorization on a disk

    The single layer density on the scatterer boundary equals the jump of the normal
    derivatives, so the near field reads (s / c) L* T L where T combines the interior,
    exterior and index DtN maps and c is the numerically measured jump constant.

    Args:
        scene: scene whose scatterer is a circle
        problem: scattering problem
        ctx: spectral parameter
        flip_sign: negate the result, used to check that validation catches a sign error

    Raises:
        UnsupportedProblemError: if the scatterer is not a circle
        PoleError: if an interior DtN map has a pole at this spectral parameter
    """
    if not scene.is_disk:
        raise UnsupportedProblemError("The factorized near field needs a circular scatterer")
    obstacle = scene.obstacle
    symbol, sign = factorized_symbol(problem, obstacle.shape.radius, ctx, len(obstacle) // 2)
    coef = sign / jump_sign()
    if flip_sign:
        logger.warning("Factorized near field sign flipped on request")
        coef = -coef
    incident = assemble_L(scene, ctx).entries
    measure = assemble_Lstar(scene, ctx).entries
    entries = coef * measure @ symbol.apply(incident)
    return NearFieldMatrix(entries, ctx.lam, scene, problem, "factorized", FACTORIZED_ROUTE_TAG)


def self_convergence(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
    solver: Union[str, type] = "auto",
) -> float:
    """Relative change of the direct near field when the scatterer nodes are doubled"""
    coarse = assemble_FS_direct(scene, problem, ctx, solver)
    fine_scene = scene.with_resolution(len(scene.source), 2 * len(scene.obstacle))
    fine = assemble_FS_direct(fine_scene, problem, ctx, solver)
    return coarse.distance(fine)


def refine_scene(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
    solver: Union[str, type] = "auto",
    tol: float = 1e-8,
    max_nodes: int = 1024,
) -> SceneGeometry:
    """Double the scatterer nodes until the direct near field is self-converged to `tol`"""
    while True:
        change = self_convergence(scene, problem, ctx, solver)
        if change <= tol:
            return scene
        if 2 * len(scene.obstacle) > max_nodes:
            logger.warning(
                f"Near field not converged to {tol} with {len(scene.obstacle)} nodes "
                f"(change {change:.2e})"
            )
            return scene
        logger.info(
            f"Doubling scatterer nodes to {2 * len(scene.obstacle)} (change {change:.2e} > {tol})"
        )
        scene = scene.with_resolution(len(scene.source), 2 * len(scene.obstacle))
