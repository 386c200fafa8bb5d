"""Errors raised across the package.

Errors deriving from `ExceptionalLambdaError` mark a spectral parameter at which a
solver cannot produce data. Sweeps record such points as skipped.
"""


class IODualityError(Exception):
    """Base class of every error raised by ioduality."""

    ...


class SpecialFunctionDomainError(IODualityError, ValueError):
    """Raised when a Bessel function is requested outside its supported domain."""

    ...


class ConfigError(IODualityError, ValueError):
    """Raised when a run configuration is malformed or inconsistent."""

    ...


class GeometryError(IODualityError, ValueError):
    """Raised on an invalid curve or scene."""

    ...


class OverlapError(GeometryError):
    """Raised when the scatterer and the measurement curve are not well separated."""

    ...


class NearSurfaceError(GeometryError):
    """Raised when a field is requested too close to a discretized curve."""

    ...


class CoincidenceError(GeometryError):
    """Raised when the fundamental solution is evaluated at coincident points."""

    ...


class UnsupportedProblemError(IODualityError, NotImplementedError):
    """Raised when a solver cannot handle the requested problem or geometry."""

    ...


class ExceptionalLambdaError(IODualityError):
    """Raised at isolated spectral parameters where the data cannot be produced."""

    ...


class PoleError(ExceptionalLambdaError):
    """Raised when a Dirichlet-to-Neumann symbol hits a pole."""

    def __init__(self, message: str, mode: int = None, zero: float = None):
        super().__init__(message)
        self.mode = mode
        self.zero = zero


class SingularModeError(ExceptionalLambdaError):
    """Raised when a modal matching system is numerically singular."""

    ...


class TruncationError(ExceptionalLambdaError):
    """Raised when a modal expansion does not decay before the order cap."""

    ...


class LinearSolveError(ExceptionalLambdaError):
    """Raised when a boundary integral system cannot be solved reliably."""

    ...


class DegenerateRangeError(IODualityError):
    """Raised when the numerical range carries no usable phase information."""

    ...
