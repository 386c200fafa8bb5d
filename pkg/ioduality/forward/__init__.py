from .base import ScatteringProblem
from .base import ScatterSolution
from .base import ForwardSolver
from .base import ModalCore
from .base import get_solver
from .base import resolve_solver
from .base import available_solvers
from .modal import ModalCoeffs
from .modal import ModalSolution
from .modal import ModalSolver
from .modal import incident_modal_coeffs
from .modal import plane_wave_coeffs
from .modal import solve_disk_modal
from .modal import farfield_modal
from .modal import far_field_matrix
from .dtn import DtNSymbol
from .dtn import dtn_disk
from .nystrom import NystromSolution
from .nystrom import NystromSolver
from .nystrom import DirichletNystromSolver
from .nystrom import solve_dirichlet_nystrom
