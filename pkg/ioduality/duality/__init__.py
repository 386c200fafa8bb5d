from .phase import PhaseSample
from .phase import phase_floor
from .phase import wrap_phase
from .phase import arc_distance
from .sweep import PhaseCurve
from .sweep import PhaseEvaluator
from .sweep import evaluate_quietly
from .sweep import lambda_grid
from .sweep import sweep
from .detect import Detection
from .detect import Thresholds
from .detect import detect
from .detect import multiplicity_diagnostic
from .farfield import FarFieldReport
from .farfield import farfield_phase_check
from .farfield import fit_gamma
