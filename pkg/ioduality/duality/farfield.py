"""Cross-check of the near field phase against the far field operator of a disk."""
from typing import Optional
from typing import Tuple

import numpy as np

from loguru import logger
from pydantic import BaseModel
from scipy import optimize

from ioduality.duality.phase import arc_distance
from ioduality.duality.phase import phase_floor
from ioduality.duality.phase import wrap_phase
from ioduality.exceptions import UnsupportedProblemError
from ioduality.forward import ScatteringProblem
from ioduality.forward import far_field_matrix
from ioduality.geometry import SceneGeometry
from ioduality.nearfield import FormMatrix
from ioduality.nearfield import assemble_core
from ioduality.potentials import WaveContext

PHASE_TOL = 0.05
UNITARITY_TOL = 1e-6


class FarFieldReport(BaseModel):
    """Outcome of the far field comparison at one spectral parameter"""

    lam: float
    n_directions: int
    gamma_re: float
    gamma_im: float
    unitarity_residual: float
    circle_residual: float
    gamma_ratio_candidate: float
    gamma_ratio_derived: float
    phase_floor_farfield: float
    phase_floor_nearfield: float
    phase_floor_distance: float
    arc_distance: float
    eigphase_distance: float
    passed: bool

    @property
    def gamma(self) -> complex:
        return complex(self.gamma_re, self.gamma_im)


def _unitarity_residual(F: np.ndarray, gamma: complex) -> float:
    S = np.eye(len(F)) + gamma * F
    return float(np.linalg.norm(S.conj().T @ S - np.eye(len(F))))


def fit_gamma(F: np.ndarray, delta_rel: float = 1e-6) -> Tuple[complex, float]:
    """Complex factor making I + gamma F unitary

    Eigenvalues of a normal F with unitary I + gamma F lie on a circle through the origin,
    |chi|^2 + 2 Re(chi u) = 0 with gamma = 1 / conj(u). A linear least squares fit of u on
    the retained eigenvalues gives the starting point of a nonlinear refinement of the
    unitarity defect.

    Returns:
        gamma and the Frobenius norm of (I + gamma F)^H (I + gamma F) - I
    """
    chi = np.linalg.eigvals(F)
    chi = chi[np.abs(chi) >= delta_rel * np.max(np.abs(chi))]
    design = np.stack([2 * chi.real, -2 * chi.imag], axis=-1)
    (u_re, u_im), *_ = np.linalg.lstsq(design, -np.abs(chi) ** 2, rcond=None)
    gamma0 = 1 / np.conj(complex(u_re, u_im))

    def residual(x):
        S = np.eye(len(F)) + complex(x[0], x[1]) * F
        defect = S.conj().T @ S - np.eye(len(F))
        return np.concatenate([defect.real.ravel(), defect.imag.ravel()])

    fit = optimize.least_squares(
        residual, [gamma0.real, gamma0.imag], xtol=1e-15, ftol=1e-15, gtol=1e-15
    )
    gamma = complex(fit.x[0], fit.x[1])
    return gamma, _unitarity_residual(F, gamma)


def _one_sided(a: np.ndarray, b: np.ndarray) -> float:
    """Largest circular distance from a point of `a` to the set `b`"""
    if not len(a) or not len(b):
        return float("nan")
    d = np.abs(a[:, None] - b[None, :]) % (2 * np.pi)
    d = np.minimum(d, 2 * np.pi - d)
    return float(np.max(np.min(d, axis=1)))


def farfield_phase_check(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    ctx: WaveContext,
    n_directions: int = 64,
    delta_rel: float = 1e-6,
    theta_points: int = 720,
    tol: float = PHASE_TOL,
    modes: Optional[int] = None,
) -> FarFieldReport:
    """Compare the phase of the near field form with the phase of the rotated far field operator

    The far field operator F of the disk is built from its modal coefficients on
    `n_directions` equispaced directions. Its eigenvalues, rotated by exp(-i pi / 4), carry
    the arguments of the near field form, so the phase floors, the phase arcs and the
    eigenphase sets of sigma exp(-i pi / 4) F and of the near field core must agree within
    `tol`. The unitarity factor gamma of I + gamma F is
    fitted and compared to sqrt(k / (8 pi)) exp(i pi / 4) and sqrt(k / (2 pi)) exp(i pi / 4).

    Args:
        scene: scene with a circular scatterer
        problem: scattering problem
        ctx: spectral parameter
        n_directions: number of far field directions
        delta_rel: relative modulus filter
        theta_points: number of directions for the numerical range boundary
        tol: tolerance on the phase floor, arc and eigenphase distances
        modes: modal truncation of the far field operator, automatic when not given

    Raises:
        UnsupportedProblemError: if the scatterer is not a circle
    """
    if not scene.is_disk:
        raise UnsupportedProblemError("The far field check needs a circular scatterer")
    k = ctx.k
    sigma = problem.sigma
    F = far_field_matrix(problem, scene.obstacle.shape, ctx, n_directions=n_directions, M=modes)
    gamma, unitarity = fit_gamma(F, delta_rel)
    chi = np.linalg.eigvals(F)
    chi = chi[np.abs(chi) >= delta_rel * np.max(np.abs(chi))]
    circle = float(np.max(np.abs(np.abs(1 + gamma * chi) - 1)))

    rotated = FormMatrix(sigma * np.exp(-0.25j * np.pi) * F, sigma)
    far = phase_floor(rotated, delta_rel=delta_rel, theta_points=theta_points, lam=ctx.lam)
    core = assemble_core(scene, problem, ctx)
    near = phase_floor(core.form(), delta_rel=delta_rel, theta_points=theta_points, lam=ctx.lam)

    floor_distance = abs(far.psi - near.psi)
    arcs = arc_distance((far.phi, far.phi_sup), (near.phi, near.phi_sup))
    far_phases, near_phases = wrap_phase(far.eigenvalues), wrap_phase(near.eigenvalues)
    eig_distance = max(_one_sided(far_phases, near_phases), _one_sided(near_phases, far_phases))
    rotation = np.exp(0.25j * np.pi)
    candidate = np.sqrt(k / (8 * np.pi)) * rotation
    derived = np.sqrt(k / (2 * np.pi)) * rotation
    passed = (
        unitarity <= UNITARITY_TOL
        and floor_distance <= tol
        and arcs <= tol
        and eig_distance <= tol
    )
    report = FarFieldReport(
        lam=ctx.lam,
        n_directions=n_directions,
        gamma_re=gamma.real,
        gamma_im=gamma.imag,
        unitarity_residual=unitarity,
        circle_residual=circle,
        gamma_ratio_candidate=abs(gamma / candidate),
        gamma_ratio_derived=abs(gamma / derived),
        phase_floor_farfield=far.psi,
        phase_floor_nearfield=near.psi,
        phase_floor_distance=floor_distance,
        arc_distance=arcs,
        eigphase_distance=eig_distance,
        passed=passed,
    )
    log = logger.info if passed else logger.warning
    log(
        f"Far field check at lambda={ctx.lam}: unitarity {unitarity:.2e}, "
        f"phase floor distance {floor_distance:.3e}, |gamma| ratio {report.gamma_ratio_derived:.6f}"
    )
    return report
