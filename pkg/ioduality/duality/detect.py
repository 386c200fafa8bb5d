from typing import List
from typing import Literal
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np

from loguru import logger
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field

from ioduality.duality.phase import TWO_PI
from ioduality.duality.phase import PhaseSample
from ioduality.duality.phase import wrap_phase
from ioduality.duality.sweep import PhaseCurve
from ioduality.duality.sweep import PhaseEvaluator

COINCIDENCE_TOL = 1e-6
MULTIPLICITY_WINDOW = 6


class Thresholds(BaseModel):
    """Detection thresholds on the duality indicator"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    tau_dip: float = Field(0.2, gt=0)
    tau_jump: float = Field(0.75, gt=0)
    refine_width: float = Field(1e-4, gt=0)


class Detection(BaseModel):
    """Interior eigenvalue estimate

    The estimate lies in the half-open bracket (bracket_lo, bracket_hi].
    """

    lambda_hat: float
    bracket_lo: float
    bracket_hi: float
    sigma: int
    side: Literal["below", "above", "two-sided"]
    phase_floor_at_dip: float
    multiplicity_estimate: Optional[Union[int, Literal["indeterminate"]]] = None
    notes: List[str] = Field(default_factory=list)


def _candidates(samples: List[PhaseSample], thresholds: Thresholds, pattern: str):
    """Grid brackets where the indicator drops below tau_dip next to a jump of tau_jump

    Returns tuples (lo, hi, dip value, whether the dip sits at lo).
    """
    found = []
    for i in range(len(samples) - 1):
        left, right = samples[i], samples[i + 1]
        if pattern == "below":
            if left.psi < thresholds.tau_dip and right.psi - left.psi > thresholds.tau_jump:
                found.append((left.lam, right.lam, left.psi, True))
        elif right.psi < thresholds.tau_dip and left.psi - right.psi > thresholds.tau_jump:
            found.append((left.lam, right.lam, right.psi, False))
    return found


def _bisect(
    evaluator: PhaseEvaluator,
    lo: float,
    hi: float,
    dip_at_lo: bool,
    dip: float,
    thresholds: Thresholds,
) -> Tuple[float, float, float]:
    """Shrink a bracket on the indicator psi < tau_dip down to `refine_width`"""
    while hi - lo > thresholds.refine_width:
        width = hi - lo
        mid = 0.5 * (lo + hi)
        sample, _ = evaluator(mid)
        if sample.skipped:
            # exceptional midpoint, nudge it
            sample, _ = evaluator(mid + 1e-3 * width)
            if sample.skipped:
                logger.warning(f"Bracket refinement stopped at width {width:.2e}: {sample.reason}")
                break
        below = sample.psi < thresholds.tau_dip
        if below:
            dip = min(dip, sample.psi)
        if below == dip_at_lo:
            lo = sample.lam
        else:
            hi = sample.lam
    return lo, hi, dip


def _merge(detections: List[Detection], gap: float) -> List[Detection]:
    merged: List[Detection] = []
    for det in sorted(detections, key=lambda d: d.lambda_hat):
        if merged and det.lambda_hat - merged[-1].lambda_hat <= gap:
            previous = merged[-1]
            if previous.side != det.side:
                merged[-1] = previous.model_copy(update={"side": "two-sided"})
            continue
        merged.append(det)
    return merged


def detect(
    curve: PhaseCurve,
    thresholds: Optional[Thresholds] = None,
    evaluator: Optional[PhaseEvaluator] = None,
    multiplicity: bool = True,
) -> List[Detection]:
    """Interior eigenvalue estimates from the dips of the duality indicator

    For sigma = +1 the indicator approaches zero as the spectral parameter increases to an
    eigenvalue and jumps right after it. For sigma = -1 the pattern is mirrored. Both
    patterns are searched for transmission problems. Skipped samples are left out when
    looking at neighbours, and each grid bracket is refined by bisection with fresh
    evaluations.

    Args:
        curve: phase curve of a sweep
        thresholds: detection thresholds
        evaluator: evaluator for bracket refinement, defaults to the one of the sweep. The
            bracket is not refined if none is available.
        multiplicity: whether to attach the multiplicity diagnostic
    """
    thresholds = thresholds or Thresholds()
    evaluator = evaluator or curve.evaluator
    problem = curve.problem
    if problem.kind == "transmission":
        patterns = ["below", "above"]
    else:
        patterns = ["below"] if problem.sigma == 1 else ["above"]
    valid = curve.valid

    detections = []
    for pattern in patterns:
        for lo, hi, dip, dip_at_lo in _candidates(valid, thresholds, pattern):
            notes = []
            if evaluator is not None:
                lo, hi, dip = _bisect(evaluator, lo, hi, dip_at_lo, dip, thresholds)
            else:
                notes.append("bracket not refined")
            detections.append(
                Detection(
                    lambda_hat=0.5 * (lo + hi),
                    bracket_lo=lo,
                    bracket_hi=hi,
                    sigma=problem.sigma,
                    side="two-sided" if problem.kind == "transmission" else pattern,
                    phase_floor_at_dip=dip,
                    notes=notes,
                )
            )
    detections = _merge(detections, 2 * curve.step)
    if multiplicity:
        detections = [
            det.model_copy(
                update={"multiplicity_estimate": multiplicity_diagnostic(curve, det, thresholds)}
            )
            for det in detections
        ]
    logger.info(f"{len(detections)} detections for {problem}")
    return detections


def _side_phase(values: np.ndarray, sigma: int) -> np.ndarray:
    phase = wrap_phase(values)
    return phase if sigma == 1 else np.where(phase > 0, TWO_PI - phase, 0.0)


def _features(sample: PhaseSample) -> np.ndarray:
    values = sample.eigenvalues
    return np.stack([np.log(np.abs(values)), _side_phase(values, sample.sigma)], axis=-1)


def _clusters(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Distinct feature rows and the number of eigenvalues sharing each"""
    reps: List[np.ndarray] = []
    counts: List[int] = []
    for row in features:
        for i, rep in enumerate(reps):
            if np.linalg.norm(row - rep) < COINCIDENCE_TOL:
                counts[i] += 1
                break
        else:
            reps.append(row)
            counts.append(1)
    return np.array(reps).reshape(-1, 2), np.array(counts, dtype=int)


def multiplicity_diagnostic(
    curve: PhaseCurve,
    detection: Detection,
    thresholds: Optional[Thresholds] = None,
    window: int = MULTIPLICITY_WINDOW,
) -> Union[int, Literal["indeterminate"]]:
    """Count eigenvalue trajectories whose phase descends below tau_dip at the detection

    Coinciding eigenvalues of a sample form one trajectory carrying their number. Clusters
    of consecutive samples approaching the detection are matched by nearest neighbour in
    (log modulus, phase). The answer is `indeterminate` when the matching is not one to one
    or a trajectory changes its number of eigenvalues on the way.

    Args:
        curve: phase curve of the sweep
        detection: detection to inspect
        thresholds: detection thresholds
        window: number of samples approaching the detection
    """
    thresholds = thresholds or Thresholds()
    if detection.side == "above" or (detection.side == "two-sided" and detection.sigma == -1):
        approach = [s for s in curve.valid if s.lam >= detection.bracket_hi][:window][::-1]
    else:
        approach = [s for s in curve.valid if s.lam <= detection.bracket_lo][-window:]
    if len(approach) < 2 or any(s.n_retained == 0 for s in approach):
        return "indeterminate"

    clusters = [_clusters(_features(s)) for s in approach]
    last, last_counts = clusters[-1]
    tracks = np.flatnonzero(last[:, 1] < thresholds.tau_dip)
    if not len(tracks):
        return 0
    current = tracks
    for (feat, counts), (prev, prev_counts) in zip(clusters[::-1][1:], clusters[::-1][:-1]):
        dist = np.linalg.norm(prev[current][:, None, :] - feat[None, :, :], axis=-1)
        matched = np.argmin(dist, axis=1)
        if len(set(matched.tolist())) != len(matched):
            return "indeterminate"
        if np.any(counts[matched] != prev_counts[current]):
            return "indeterminate"
        current = matched
    start_phase = clusters[0][0][current, 1]
    descending = last[tracks, 1] < start_phase
    return int(np.sum(last_counts[tracks][descending]))
