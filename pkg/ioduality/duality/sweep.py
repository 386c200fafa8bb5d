from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd

from dataclasses import dataclass
from dataclasses import field
from joblib import Parallel
from joblib import delayed
from loguru import logger
from tqdm.auto import tqdm

from ioduality.duality.phase import PhaseSample
from ioduality.duality.phase import phase_floor
from ioduality.exceptions import DegenerateRangeError
from ioduality.exceptions import ExceptionalLambdaError
from ioduality.forward import ScatteringProblem
from ioduality.forward import resolve_solver
from ioduality.geometry import SceneGeometry
from ioduality.nearfield import CORE_ROUTE_OFFSET
from ioduality.nearfield import NearFieldCore
from ioduality.nearfield import assemble_core
from ioduality.potentials import WaveContext
from ioduality.utils.cache import NearFieldCache
from ioduality.utils.log import silenced

WORKER_SILENCED = ["ioduality.forward", "ioduality.nearfield", "ioduality.potentials"]


class PhaseEvaluator:
    """Phase sample of the near field form at one spectral parameter

    The form is taken in outgoing wave coordinates on the source curve, see
    `ioduality.nearfield.NearFieldCore`. Instances are picklable and hold no open resources,
    so joblib workers can receive them. Spectral parameters where the forward problem is
    exceptional or the range degenerate give a skipped sample instead of an error.

    Args:
        scene: validated scene
        problem: scattering problem
        solver: forward solver name
        delta_rel: relative modulus filter of the phase floor
        theta_points: number of directions for the numerical range boundary
        cache: optional near field cache
    """

    def __init__(
        self,
        scene: SceneGeometry,
        problem: ScatteringProblem,
        solver: str = "auto",
        delta_rel: float = 1e-6,
        theta_points: int = 720,
        cache: Optional[NearFieldCache] = None,
    ):
        self.scene = scene
        self.problem = problem
        self.solver = solver
        self.delta_rel = delta_rel
        self.theta_points = theta_points
        self.cache = cache
        self.route_tag = CORE_ROUTE_OFFSET + resolve_solver(solver, scene, problem).route_tag

    def core(self, lam: float) -> Tuple[NearFieldCore, bool]:
        """Near field core at `lam` and whether it came from the cache"""
        shape = (len(self.scene.source), len(self.scene.obstacle))
        key = None
        if self.cache is not None:
            key = self.cache.key(lam, shape, self.route_tag)
            record = self.cache.get(key)
            if record is not None:
                entries, _, route_tag = record
                return NearFieldCore(entries, lam, self.problem, route_tag, self.center), True
        core = assemble_core(self.scene, self.problem, WaveContext(lam), self.solver)
        if key is not None:
            self.cache.put(key, core.entries, lam, core.route_tag)
        return core, False

    @property
    def center(self) -> np.ndarray:
        obstacle = self.scene.obstacle
        return np.average(obstacle.points, axis=0, weights=obstacle.weights)

    def __call__(self, lam: float) -> Tuple[PhaseSample, bool]:
        lam = float(lam)
        hit = False
        try:
            core, hit = self.core(lam)
            sample = phase_floor(
                core.form(), delta_rel=self.delta_rel, theta_points=self.theta_points, lam=lam
            )
        except (ExceptionalLambdaError, DegenerateRangeError) as e:
            logger.debug(f"Skipping lambda={lam:.6f}: {e}")
            sample = PhaseSample.skip(lam, self.problem.sigma, f"{type(e).__name__}: {e}")
        return sample, hit


@dataclass
class PhaseCurve:
    """Phase samples on a uniform grid of spectral parameters"""

    samples: List[PhaseSample]
    problem: ScatteringProblem
    interval: Tuple[float, float]
    step: float
    evaluator: Optional[PhaseEvaluator] = None
    cache_hits: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, index):
        return self.samples[index]

    @property
    def psi(self) -> np.ndarray:
        return np.array([s.psi for s in self.samples])

    @property
    def valid(self) -> List[PhaseSample]:
        return [s for s in self.samples if not s.skipped]

    @property
    def n_skipped(self) -> int:
        return sum(s.skipped for s in self.samples)

    def to_dataframe(self) -> pd.DataFrame:
        """One row per sample with the phase floor, the indicator and eigenvalue statistics"""
        return pd.DataFrame(
            {
                "lambda": [s.lam for s in self.samples],
                "phi": [s.phi for s in self.samples],
                "psi": [s.psi for s in self.samples],
                "n_retained_eigs": [s.n_retained for s in self.samples],
                "min_eigphase": [s.min_eigphase for s in self.samples],
                "skipped": [int(s.skipped) for s in self.samples],
            }
        )


def evaluate_quietly(evaluator: PhaseEvaluator, lam: float, quiet: bool = False):
    """Evaluate one grid point, muting solver logs when running in a worker process"""
    if not quiet:
        return evaluator(lam)
    with silenced(WORKER_SILENCED):
        return evaluator(lam)


def lambda_grid(interval: Sequence[float], step: float) -> np.ndarray:
    """Uniform grid lo, lo + step, ... not exceeding hi, built from integer multiples"""
    lo, hi = float(interval[0]), float(interval[1])
    if not 0 < lo < hi:
        raise ValueError(f"Interval must satisfy 0 < lo < hi, got {interval}")
    if step <= 0:
        raise ValueError(f"Step must be positive, got {step}")
    count = int(np.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(count + 1)


def sweep(
    scene: SceneGeometry,
    problem: ScatteringProblem,
    interval: Sequence[float],
    step: float,
    parallelism: int = 1,
    evaluator: Optional[PhaseEvaluator] = None,
    progress: Union[bool, int] = False,
    **evaluator_kwargs,
) -> PhaseCurve:
    """Phase floor of the near field on a uniform grid of spectral parameters

    The output depends only on the inputs: each grid point is computed independently and
    results are collected in grid order whatever the number of workers.

    Args:
        scene: validated scene
        problem: scattering problem
        interval: closed interval [lo, hi] of the spectral parameter
        step: grid step
        parallelism: number of joblib workers
        evaluator: phase evaluator, built from `scene`, `problem` and `evaluator_kwargs`
            when not given
        progress: whether to show a progress bar
        evaluator_kwargs: keyword arguments for `PhaseEvaluator`
    """
    grid = lambda_grid(interval, step)
    evaluator = evaluator or PhaseEvaluator(scene, problem, **evaluator_kwargs)
    logger.info(f"Sweeping {len(grid)} values of lambda in [{grid[0]}, {grid[-1]}] for {problem}")
    outputs = Parallel(n_jobs=parallelism)(
        delayed(evaluate_quietly)(evaluator, lam, parallelism != 1)
        for lam in tqdm(grid, disable=not progress, leave=False, desc="sweep")
    )
    samples = [sample for sample, _ in outputs]
    hits = sum(hit for _, hit in outputs)
    curve = PhaseCurve(
        samples=samples,
        problem=problem,
        interval=(float(interval[0]), float(interval[1])),
        step=float(step),
        evaluator=evaluator,
        cache_hits=int(hits),
    )
    logger.info(
        f"{len(samples) - hits} forward solves, {hits} cache hits, "
        f"{curve.n_skipped} skipped samples"
    )
    return curve
