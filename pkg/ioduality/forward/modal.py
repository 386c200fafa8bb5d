"""Exact separation-of-variables solvers on a disk."""
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from dataclasses import dataclass
from loguru import logger

from ioduality import specfun
from ioduality.exceptions import GeometryError
from ioduality.exceptions import SingularModeError
from ioduality.exceptions import TruncationError
from ioduality.forward.base import ForwardSolver
from ioduality.forward.base import ModalCore
from ioduality.forward.base import ScatterSolution
from ioduality.forward.base import ScatteringProblem
from ioduality.geometry import Circle
from ioduality.geometry import DiscretizedCurve
from ioduality.geometry import SceneGeometry
from ioduality.potentials import WaveContext

TAIL_TOL = 1e-12
SINGULAR_TOL = 1e-13
MIN_ORDER = 20
ORDER_MARGIN = 15
ORDER_GROWTH = 10


def default_truncation(k: float, radius: float) -> int:
    """Initial truncation max(20, ceil(k R) + 15)"""
    return int(min(max(MIN_ORDER, np.ceil(k * radius) + ORDER_MARGIN), specfun.MAX_ORDER))


def _polar(points: np.ndarray, center: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    rel = np.atleast_2d(points) - np.asarray(center, dtype=float)
    return np.hypot(rel[:, 0], rel[:, 1]), np.arctan2(rel[:, 1], rel[:, 0])


def _tail_ok(trace_coeffs: np.ndarray, orders: np.ndarray) -> bool:
    """Whether the outermost orders are negligible against the largest coefficient"""
    mags = np.abs(trace_coeffs).reshape(len(orders), -1)
    peak = np.max(mags)
    tail = np.max(mags[np.abs(orders) >= np.max(np.abs(orders)) - 2])
    return bool(tail <= TAIL_TOL * peak)


@dataclass
class ModalCoeffs:
    """Coefficients a_m of an incident field sum_m a_m J_m(k r) e^{i m theta} about `center`

    `values` has shape (2M + 1,) or (2M + 1, n_fields), orders running from -M to M.
    """

    center: np.ndarray
    values: np.ndarray
    truncation_ok: bool = True

    @property
    def M(self) -> int:
        return (self.values.shape[0] - 1) // 2

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def evaluate(self, k: float, points: np.ndarray) -> np.ndarray:
        """Regular expansion at points inside the expansion circle"""
        r, theta = _polar(points, self.center)
        basis = specfun.bessel_j(self.orders[None, :], k * r[:, None]) * np.exp(
            1j * np.outer(theta, self.orders)
        )
        return basis @ self.values


def source_basis(
    points: np.ndarray,
    weights: np.ndarray,
    center: Sequence[float],
    k: float,
    orders: np.ndarray,
    kernel: str = "conjugate",
) -> np.ndarray:
    """Matrix B with a = B @ density for the field emitted by nodal densities

    Args:
        points: source nodes
        weights: quadrature weights of the source nodes
        center: expansion center
        k: wavenumber
        orders: modal orders
        kernel: `conjugate` for conj(G_k) (the incident operator L) or `direct` for G_k
    """
    rho, theta = _polar(points, center)
    h = specfun.hankel1(orders[:, None], k * rho[None, :])
    phase = np.exp(-1j * np.outer(orders, theta))
    if kernel == "conjugate":
        basis = -0.25j * np.conj(h) * phase
    elif kernel == "direct":
        basis = 0.25j * h * phase
    else:
        raise ValueError(f"Unknown kernel {kernel!r}")
    return basis * weights[None, :]


def incident_modal_coeffs(
    source: DiscretizedCurve,
    density: np.ndarray,
    disk: Circle,
    ctx: WaveContext,
    M: Optional[int] = None,
    kernel: str = "conjugate",
) -> ModalCoeffs:
    """Graf expansion about the disk center of the wave emitted by a density on `source`

    Args:
        source: source curve
        density: nodal values, shape (N,) or (N, n_fields)
        disk: scatterer disk
        ctx: spectral parameter
        M: truncation order. When omitted it grows from the default by steps of 10 until the
            tail of |a_m J_m(k a)| falls below 1e-12 of its peak.
        kernel: `conjugate` (incident operator) or `direct` (kernel G_k)

    Raises:
        GeometryError: if a source node lies inside the circle of radius a about the center
        TruncationError: if the automatic truncation exceeds the order cap
    """
    rho, _ = _polar(source.points, disk.center)
    if np.any(rho <= disk.radius):
        raise GeometryError("Source nodes must lie outside the scatterer disk")
    density = np.asarray(density)
    ka = ctx.k * disk.radius

    def _coeffs(order):
        orders = np.arange(-order, order + 1)
        values = source_basis(source.points, source.weights, disk.center, ctx.k, orders, kernel)
        values = values @ density
        trace = values * specfun.bessel_j(orders, ka).reshape((-1,) + (1,) * (density.ndim - 1))
        return values, _tail_ok(trace, orders)

    if M is not None:
        values, ok = _coeffs(int(M))
        if not ok:
            logger.warning(f"Modal expansion truncated at M={M} has not decayed to {TAIL_TOL}")
        return ModalCoeffs(np.asarray(disk.center, dtype=float), values, ok)

    order = default_truncation(ctx.k, disk.radius)
    while True:
        values, ok = _coeffs(order)
        if ok:
            return ModalCoeffs(np.asarray(disk.center, dtype=float), values, True)
        if order >= specfun.MAX_ORDER:
            raise TruncationError(f"Incident expansion does not decay before order {order}")
        order = min(order + ORDER_GROWTH, specfun.MAX_ORDER)


def plane_wave_coeffs(
    angle: float, center: Sequence[float], ctx: WaveContext, M: int
) -> ModalCoeffs:
    """Jacobi-Anger coefficients of e^{i k d . x} with d = (cos angle, sin angle)"""
    orders = np.arange(-M, M + 1)
    d = np.array([np.cos(angle), np.sin(angle)])
    shift = np.exp(1j * ctx.k * d @ np.asarray(center, dtype=float))
    values = (1j**orders) * np.exp(-1j * orders * angle) * shift
    return ModalCoeffs(np.asarray(center, dtype=float), values, True)


def modal_transfer(
    problem: ScatteringProblem, k: float, a: float, orders: np.ndarray
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Per-mode ratios c_m / a_m of the scattered field, and b_m / a_m inside for transmission

    Raises:
        SingularModeError: if a transmission matching system is numerically singular
    """
    ka = k * a
    jm = specfun.bessel_j(orders, ka)
    hm = specfun.hankel1(orders, ka)
    if problem.kind == "dirichlet":
        return -jm / hm, None
    djm = specfun.deriv_j(orders, ka)
    dhm = specfun.deriv_hankel1(orders, ka)
    if problem.kind == "neumann":
        return -djm / dhm, None

    kappa = np.sqrt(problem.n) * k
    jk = specfun.bessel_j(orders, kappa * a)
    djk = specfun.deriv_j(orders, kappa * a)
    system = np.empty((len(orders), 2, 2), dtype=complex)
    system[:, 0, 0] = hm
    system[:, 0, 1] = -jk
    system[:, 1, 0] = k * dhm
    system[:, 1, 1] = -kappa * djk
    det = np.linalg.det(system)
    scale = np.abs(hm * kappa * djk) + np.abs(k * dhm * jk)
    singular = np.abs(det) < SINGULAR_TOL * scale
    if np.any(singular):
        raise SingularModeError(
            f"Transmission matching is singular for order(s) {orders[singular].tolist()} at k={k}"
        )
    rhs = np.stack([-jm, -k * djm], axis=-1).astype(complex)
    sol = np.linalg.solve(system, rhs[..., None])[..., 0]
    return sol[:, 0], sol[:, 1]


class ModalSolution(ScatterSolution):
    """Scattered field sum_m c_m H_m(k r) e^{i m theta} outside a disk"""

    def __init__(
        self,
        problem: ScatteringProblem,
        ctx: WaveContext,
        radius: float,
        incident: ModalCoeffs,
        coeffs: np.ndarray,
        interior: Optional[np.ndarray] = None,
    ):
        super().__init__(problem, ctx)
        self.radius = radius
        self.incident = incident
        self.coeffs = coeffs
        self.interior = interior

    @property
    def center(self):
        return self.incident.center

    @property
    def orders(self):
        return self.incident.orders

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        r, theta = _polar(points, self.center)
        if np.any(r < self.radius):
            raise GeometryError("The modal scattered field is only available outside the disk")
        basis = specfun.hankel1(self.orders[None, :], self.ctx.k * r[:, None]) * np.exp(
            1j * np.outer(theta, self.orders)
        )
        return basis @ self.coeffs

    def far_field(self, angles: np.ndarray) -> np.ndarray:
        return farfield_modal(self, angles)

    def mode_traces(self) -> Tuple[np.ndarray, np.ndarray]:
        """Total field value and radial derivative per mode on the exterior side of r = a"""
        k, ka = self.ctx.k, self.ctx.k * self.radius
        orders = self.orders.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        value = self.incident.values * specfun.bessel_j(orders, ka) + self.coeffs * specfun.hankel1(
            orders, ka
        )
        slope = k * (
            self.incident.values * specfun.deriv_j(orders, ka)
            + self.coeffs * specfun.deriv_hankel1(orders, ka)
        )
        return value, slope

    def interface_residual(self) -> Tuple[np.ndarray, np.ndarray]:
        """Mismatch of value and normal derivative across r = a for a transmission solution"""
        if self.interior is None:
            raise ValueError("Interface residuals are only defined for transmission solutions")
        value, slope = self.mode_traces()
        kappa = np.sqrt(self.problem.n) * self.ctx.k
        orders = self.orders.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        inner_value = self.interior * specfun.bessel_j(orders, kappa * self.radius)
        inner_slope = kappa * self.interior * specfun.deriv_j(orders, kappa * self.radius)
        return value - inner_value, slope - inner_slope


def solve_disk_modal(
    problem: ScatteringProblem, a: float, ctx: WaveContext, incident: ModalCoeffs
) -> ModalSolution:
    """Scatter a modal incident field off a disk of radius `a` centered at `incident.center`

    Raises:
        SingularModeError: when a transmission mode cannot be matched at this spectral parameter
    """
    ratio, interior = modal_transfer(problem, ctx.k, a, incident.orders)
    shape = (-1,) + (1,) * (incident.values.ndim - 1)
    coeffs = ratio.reshape(shape) * incident.values
    inner = None if interior is None else interior.reshape(shape) * incident.values
    return ModalSolution(problem, ctx, a, incident, coeffs, inner)


def farfield_modal(solution: ModalSolution, angles: Optional[np.ndarray] = None) -> np.ndarray:
    """Far field pattern of a modal solution

    u_inf(theta) = sqrt(2 / (pi k)) e^{-i pi / 4} sum_m c_m (-i)^m e^{i m theta} e^{-i k x_hat . c}

    Args:
        solution: modal solution
        angles: observation angles, defaults to 64 uniform directions
    """
    if angles is None:
        angles = 2 * np.pi * np.arange(64) / 64
    angles = np.asarray(angles, dtype=float)
    k = solution.ctx.k
    orders = solution.orders
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    shift = np.exp(-1j * k * directions @ solution.center)
    basis = ((-1j) ** orders)[None, :] * np.exp(1j * np.outer(angles, orders))
    prefactor = np.sqrt(2 / (np.pi * k)) * np.exp(-0.25j * np.pi)
    pattern = prefactor * (basis @ solution.coeffs)
    return pattern * shift.reshape((-1,) + (1,) * (pattern.ndim - 1))


def far_field_matrix(
    problem: ScatteringProblem,
    disk: Circle,
    ctx: WaveContext,
    n_directions: int = 64,
    M: Optional[int] = None,
) -> np.ndarray:
    """Discrete far field operator F[p, q] = u_inf(x_p; d_q) 2 pi / Q on Q uniform directions"""
    angles = 2 * np.pi * np.arange(n_directions) / n_directions
    if M is None:
        M = default_truncation(ctx.k, disk.radius)
        while M < specfun.MAX_ORDER:
            orders = np.arange(-M, M + 1)
            if _tail_ok(specfun.bessel_j(orders, ctx.k * disk.radius), orders):
                break
            M = min(M + ORDER_GROWTH, specfun.MAX_ORDER)
    orders = np.arange(-M, M + 1)
    shift = np.exp(1j * ctx.k * np.stack([np.cos(angles), np.sin(angles)], -1) @ disk.center)
    values = (1j ** orders)[:, None] * np.exp(-1j * np.outer(orders, angles)) * shift[None, :]
    incident = ModalCoeffs(np.asarray(disk.center, dtype=float), values, True)
    solution = solve_disk_modal(problem, disk.radius, ctx, incident)
    return farfield_modal(solution, angles) * (2 * np.pi / n_directions)


def choose_truncation(
    problem: ScatteringProblem, k: float, a: float, rho_min: float, rho_max: float
) -> int:
    """Smallest order, growing by 10, at which |c_m / a_m| |H_m(k rho_min)|^2 has decayed

    Raises:
        TruncationError: if the decay is not reached before the order cap
    """
    order = default_truncation(k, rho_max)
    while True:
        orders = np.arange(0, order + 1)
        ratio, _ = modal_transfer(problem, k, a, orders)
        weight = np.abs(ratio) * np.abs(specfun.hankel1(orders, k * rho_min)) ** 2
        if _tail_ok(weight, orders):
            return order
        if order >= specfun.MAX_ORDER:
            raise TruncationError(f"Modal near field does not decay before order {order} at k={k}")
        order = min(order + ORDER_GROWTH, specfun.MAX_ORDER)


class ModalSolver(ForwardSolver):
    """Separation of variables for a disk scatterer, all three problem kinds"""

    name = "modal"
    route_tag = 1

    @classmethod
    def supports(cls, scene: SceneGeometry, problem: ScatteringProblem) -> bool:
        return scene.is_disk

    @property
    def disk(self) -> Circle:
        return self.scene.obstacle.shape

    def emit(self, density: np.ndarray, kernel: str = "conjugate") -> ModalSolution:
        incident = incident_modal_coeffs(
            self.scene.source, density, self.disk, self.ctx, kernel=kernel
        )
        return solve_disk_modal(self.problem, self.disk.radius, self.ctx, incident)

    def near_field(self) -> np.ndarray:
        """Modal near field H diag(t) (-i/4) H^H W on the source curve"""
        k = self.ctx.k
        rho, _ = _polar(self.scene.source.points, self.disk.center)
        M = choose_truncation(self.problem, k, self.disk.radius, rho.min(), rho.max())
        ratio, _ = modal_transfer(self.problem, k, self.disk.radius, np.arange(-M, M + 1))
        core = ModalCore(np.diag(ratio), np.asarray(self.disk.center, dtype=float), k)
        return core.near_field(self.scene.source)

    def modal_core(self) -> ModalCore:
        """Diagonal scattering matrix, truncated once the ratios |c_m / a_m| have decayed

        Raises:
            TruncationError: if the ratios do not decay before the order cap
        """
        k, a = self.ctx.k, self.disk.radius
        order = default_truncation(k, a)
        while True:
            orders = np.arange(-order, order + 1)
            ratio, _ = modal_transfer(self.problem, k, a, orders)
            if _tail_ok(ratio, orders):
                return ModalCore(np.diag(ratio), np.asarray(self.disk.center, dtype=float), k)
            if order >= specfun.MAX_ORDER:
                raise TruncationError(f"Modal ratios do not decay before order {order} at k={k}")
            order = min(order + ORDER_GROWTH, specfun.MAX_ORDER)
