from typing import Literal
from typing import Optional
from typing import Union

import abc
import numpy as np

from dataclasses import dataclass
from loguru import logger
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import model_validator

from ioduality import specfun
from ioduality.exceptions import UnsupportedProblemError
from ioduality.geometry import DiscretizedCurve
from ioduality.geometry import SceneGeometry
from ioduality.potentials import WaveContext

_SOLVERS = {}


class ScatteringProblem(BaseModel):
    """Kind of scatterer and its sign constant

    `sigma` is +1 for a Dirichlet obstacle and for a transmission problem with n < 1,
    and -1 for a Neumann obstacle and for a transmission problem with n > 1.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["dirichlet", "neumann", "transmission"]
    n: Optional[float] = None

    @model_validator(mode="after")
    def _check_index(self):
        if self.kind == "transmission":
            if self.n is None or not np.isfinite(self.n) or self.n <= 0:
                raise ValueError("A transmission problem needs a positive refractive index n")
            if self.n == 1:
                raise ValueError("The refractive index must differ from one")
        elif self.n is not None:
            raise ValueError(f"A {self.kind} obstacle takes no refractive index")
        return self

    @property
    def sigma(self) -> int:
        if self.kind == "dirichlet":
            return 1
        if self.kind == "neumann":
            return -1
        return 1 if self.n < 1 else -1

    def __str__(self):
        if self.kind == "transmission":
            return f"transmission(n={self.n:g})"
        return self.kind


class ScatterSolution(abc.ABC):
    """Scattered field produced by a forward solve

    Args:
        problem: scattering problem
        ctx: spectral parameter
    """

    def __init__(self, problem: ScatteringProblem, ctx: WaveContext):
        self.problem = problem
        self.ctx = ctx

    @abc.abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Scattered field at exterior points of shape (M, 2)"""
        ...

    @abc.abstractmethod
    def far_field(self, angles: np.ndarray) -> np.ndarray:
        """Far field pattern u_inf at observation angles, with u ~ u_inf e^{ikr} / sqrt(r)"""
        ...

    def radiation_profile(self, angle: float, radii: np.ndarray) -> np.ndarray:
        """|u(r x_hat)| sqrt(r) along a ray, approaching |u_inf| for large r"""
        radii = np.asarray(radii, dtype=float)
        pts = np.outer(radii, [np.cos(angle), np.sin(angle)])
        return np.abs(self.evaluate(pts)) * np.sqrt(radii)


@dataclass
class ModalCore:
    """Scattering matrix of the obstacle in cylindrical waves about `center`

    `T[m, n]` is the coefficient of H_m(k r) e^{i m theta} in the field scattered by the
    regular wave J_n(k r) e^{i n theta}, orders running from -M to M. For a source curve
    outside the circle circumscribing the obstacle about `center`, the near field reads
    A T (-i/4) A^H W with A[i, m] = H_m(k rho_i) e^{i m theta_i}.
    """

    T: np.ndarray
    center: np.ndarray
    k: float

    @property
    def M(self) -> int:
        return (self.T.shape[0] - 1) // 2

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def outgoing_basis(self, points: np.ndarray) -> np.ndarray:
        """Matrix A of outgoing waves H_m(k rho) e^{i m theta} at the points"""
        rel = np.atleast_2d(points) - np.asarray(self.center, dtype=float)
        rho, theta = np.hypot(rel[:, 0], rel[:, 1]), np.arctan2(rel[:, 1], rel[:, 0])
        hankel = specfun.hankel1(self.orders[None, :], self.k * rho[:, None])
        return hankel * np.exp(1j * np.outer(theta, self.orders))

    def near_field(self, source: DiscretizedCurve) -> np.ndarray:
        """Near field matrix A T (-i/4) A^H W on the source curve"""
        A = self.outgoing_basis(source.points)
        return (A @ self.T) @ (-0.25j * np.conj(A).T * source.weights[None, :])


class _SolverMeta(abc.ABCMeta):
    """Metaclass to register forward solvers by name"""

    def __init__(cls, name, bases, attrs):
        super().__init__(name, bases, attrs)
        solver_name = attrs.get("name")
        if solver_name is None:
            return
        if solver_name in _SOLVERS:
            logger.warning(f"The {solver_name!r} solver has been superseded by {name}")
        _SOLVERS[solver_name] = cls


class ForwardSolver(abc.ABC, metaclass=_SolverMeta):
    """Forward solver bound to one scene, one problem and one spectral parameter

    A solver is created per spectral parameter and reuses its factorization for every
    right-hand side. Subclasses set `name` and the one-byte `route_tag` stored in the
    matrix cache.
    """

    name: Optional[str] = None
    route_tag: int = 0

    def __init__(self, scene: SceneGeometry, problem: ScatteringProblem, ctx: WaveContext):
        if not self.supports(scene, problem):
            raise UnsupportedProblemError(
                f"The {self.name!r} solver cannot handle {problem} on {scene.obstacle.shape!r}"
            )
        self.scene = scene
        self.problem = problem
        self.ctx = ctx

    @classmethod
    @abc.abstractmethod
    def supports(cls, scene: SceneGeometry, problem: ScatteringProblem) -> bool:
        ...

    @abc.abstractmethod
    def emit(self, density: np.ndarray, kernel: str = "conjugate") -> ScatterSolution:
        """Scatter the wave emitted by a density on the source curve

        Args:
            density: nodal values on the source curve
            kernel: `conjugate` for the incident operator L, `direct` for the kernel G_k
        """
        ...

    @abc.abstractmethod
    def near_field(self) -> np.ndarray:
        """Near field matrix: column j is the scattered field on the source curve for L e_j"""
        ...

    @abc.abstractmethod
    def modal_core(self) -> ModalCore:
        """Scattering matrix in cylindrical waves about the obstacle's expansion center"""
        ...


def available_solvers():
    return sorted(_SOLVERS)


def resolve_solver(
    name: Union[str, type],
    scene: SceneGeometry,
    problem: ScatteringProblem,
) -> type:
    """Solver class for a name, a class, or `auto`

    `auto` picks the modal solver on disks and the integral equation solver otherwise.

    Raises:
        UnsupportedProblemError: for an unknown name or a solver that cannot treat the problem
    """
    if isinstance(name, type):
        cls = name
    else:
        if name == "auto":
            name = "modal" if scene.is_disk else "nystrom"
        if name not in _SOLVERS:
            raise UnsupportedProblemError(
                f"Unknown solver {name!r}, available: {available_solvers()}"
            )
        cls = _SOLVERS[name]
    if not cls.supports(scene, problem):
        raise UnsupportedProblemError(
            f"Solver {cls.name!r} does not support {problem} on this scene"
        )
    return cls


def get_solver(
    name: Union[str, type],
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
) -> ForwardSolver:
    """Instantiate a forward solver

    Args:
        name: registered solver name, a solver class, or `auto`
        scene: validated scene
        problem: scattering problem
        ctx: spectral parameter
    """
    return resolve_solver(name, scene, problem)(scene, problem, ctx)
