"""Parametrized closed curves, their trapezoid discretization and scene validation."""
from typing import Optional
from typing import Sequence
from typing import Tuple

import abc
import numpy as np

from loguru import logger
from matplotlib.path import Path
from scipy.spatial.distance import cdist
from scipy.special import i0

from ioduality.exceptions import GeometryError
from ioduality.exceptions import OverlapError

SEPARATION_TOL = 1e-6

_SHAPES = {}


class _ShapeMeta(abc.ABCMeta):
    """Metaclass to register closed curves by shape name"""

    def __init__(cls, name, bases, attrs):
        super().__init__(name, bases, attrs)
        shape_name = attrs.get("shape_name")
        if shape_name is None:
            return
        if shape_name in _SHAPES:
            logger.warning(f"The {shape_name!r} shape has been superseded by {name}")
        _SHAPES[shape_name] = cls


class ClosedCurve(abc.ABC, metaclass=_ShapeMeta):
    """Analytic 2pi-periodic, positively oriented parametrization x(t) of a closed curve

    ???+ tip "Adding a shape"
        Subclass `ClosedCurve`, set a `shape_name` and implement `point`, `derivative`
        and `second_derivative`. The shape then becomes available to `get_curve` and
        to the `geometry.obstacle.shape` configuration key.
    """

    shape_name: Optional[str] = None

    @abc.abstractmethod
    def point(self, t: np.ndarray) -> np.ndarray:
        ...

    @abc.abstractmethod
    def derivative(self, t: np.ndarray) -> np.ndarray:
        ...

    @abc.abstractmethod
    def second_derivative(self, t: np.ndarray) -> np.ndarray:
        ...

    @property
    def center(self) -> np.ndarray:
        return np.zeros(2)

    @property
    def params(self) -> dict:
        return {}

    def discretize(self, N: int) -> "DiscretizedCurve":
        """Sample the curve on the uniform nodes t_i = 2 pi i / N

        Args:
            N: even number of nodes, at least 8
        """
        if int(N) != N or N < 8 or N % 2:
            raise GeometryError(f"Node count must be an even integer >= 8, got {N}")
        t = 2 * np.pi * np.arange(N) / N
        return DiscretizedCurve(
            shape=self,
            t=t,
            points=self.point(t),
            tangents=self.derivative(t),
            second=self.second_derivative(t),
        )

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.__class__.__name__}({args})"


class Circle(ClosedCurve):
    shape_name = "circle"

    def __init__(self, center: Sequence[float] = (0.0, 0.0), radius: float = 1.0):
        if not radius > 0:
            raise GeometryError(f"Circle radius must be positive, got {radius}")
        self._center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    @property
    def center(self):
        return self._center

    @property
    def params(self):
        return {"center": tuple(self._center.tolist()), "radius": self.radius}

    def point(self, t):
        return self._center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def derivative(self, t):
        return self.radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def second_derivative(self, t):
        return -self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)


class Ellipse(ClosedCurve):
    shape_name = "ellipse"

    def __init__(
        self, center: Sequence[float] = (0.0, 0.0), semi_axes: Sequence[float] = (1.0, 0.5)
    ):
        semi_axes = np.asarray(semi_axes, dtype=float)
        if semi_axes.shape != (2,) or np.any(semi_axes <= 0):
            raise GeometryError(f"Ellipse semi-axes must be two positive numbers, got {semi_axes}")
        self._center = np.asarray(center, dtype=float)
        self.semi_axes = semi_axes

    @property
    def center(self):
        return self._center

    @property
    def params(self):
        return {"center": tuple(self._center.tolist()), "semi_axes": tuple(self.semi_axes.tolist())}

    def point(self, t):
        a, b = self.semi_axes
        return self._center + np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)

    def derivative(self, t):
        a, b = self.semi_axes
        return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1)

    def second_derivative(self, t):
        a, b = self.semi_axes
        return -np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)


class Kite(ClosedCurve):
    """Non-convex kite x(t) = (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)"""

    shape_name = "kite"

    def point(self, t):
        return np.stack([np.cos(t) + 0.65 * np.cos(2 * t) - 0.65, 1.5 * np.sin(t)], axis=-1)

    def derivative(self, t):
        return np.stack([-np.sin(t) - 1.3 * np.sin(2 * t), 1.5 * np.cos(t)], axis=-1)

    def second_derivative(self, t):
        return np.stack([-np.cos(t) - 2.6 * np.cos(2 * t), -1.5 * np.sin(t)], axis=-1)


class DiscretizedCurve:
    """Closed curve sampled on N uniform parameter nodes with trapezoid weights

    Attributes are read-only numpy arrays:
    `points` and `tangents` hold x(t_i) and x'(t_i), `normals` the unit outward normals,
    `jacobian` the speed |x'(t_i)| and `weights` the quadrature weights (2 pi / N) |x'(t_i)|.
    """

    def __init__(
        self,
        shape: ClosedCurve,
        t: np.ndarray,
        points: np.ndarray,
        tangents: np.ndarray,
        second: np.ndarray,
    ):
        self.shape = shape
        self.t = t
        self.points = points
        self.tangents = tangents
        self.second = second
        self.jacobian = np.linalg.norm(tangents, axis=1)
        if np.any(self.jacobian <= 0):
            raise GeometryError(f"Degenerate parametrization for {shape!r}: x'(t) vanishes")
        # outward for a positively oriented curve
        self.normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1) / self.jacobian[:, None]
        self.weights = 2 * np.pi / len(t) * self.jacobian
        for arr in (self.t, self.points, self.tangents, self.second):
            arr.setflags(write=False)
        for arr in (self.normals, self.jacobian, self.weights):
            arr.setflags(write=False)
        if self.signed_area <= 0:
            raise GeometryError(f"{shape!r} is not positively oriented")

    def __len__(self):
        return len(self.t)

    def __repr__(self):
        return f"DiscretizedCurve({self.shape!r}, N={len(self)})"

    @property
    def N(self) -> int:
        return len(self.t)

    @property
    def is_circle(self) -> bool:
        return isinstance(self.shape, Circle)

    @property
    def center(self) -> np.ndarray:
        return self.shape.center

    @property
    def arclength(self) -> float:
        return float(np.sum(self.weights))

    @property
    def signed_area(self) -> float:
        """Shoelace area over the nodes, positive for counterclockwise curves"""
        x, y = self.points[:, 0], self.points[:, 1]
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def bounding_radius(self, center: Optional[Sequence[float]] = None) -> float:
        """Largest node distance from `center` (defaults to the shape center)"""
        center = self.center if center is None else np.asarray(center, dtype=float)
        return float(np.max(np.linalg.norm(self.points - center, axis=1)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Whether each point lies inside the polygon spanned by the nodes"""
        return Path(self.points).contains_points(np.atleast_2d(points))

    def refine(self, N: int) -> "DiscretizedCurve":
        """Resample the underlying analytic curve with N nodes"""
        return self.shape.discretize(N)

    def integrate(self, values: np.ndarray):
        """Trapezoid quadrature of nodal values"""
        return np.sum(np.asarray(values) * self.weights, axis=-1)


def get_curve(shape: str, **params) -> ClosedCurve:
    """Build a registered shape by name

    Args:
        shape: one of the registered shape names (circle, ellipse, kite)
        params: shape parameters
    """
    if shape not in _SHAPES:
        raise GeometryError(f"Unknown shape {shape!r}, available: {sorted(_SHAPES)}")
    try:
        return _SHAPES[shape](**params)
    except TypeError as e:
        raise GeometryError(f"Invalid parameters for shape {shape!r}: {e}") from e


def available_shapes():
    return sorted(_SHAPES)


def make_circle(center: Sequence[float], radius: float, N: int) -> DiscretizedCurve:
    """Discretized circle with N nodes"""
    return Circle(center, radius).discretize(N)


def make_kite(N: int) -> DiscretizedCurve:
    """Discretized kite with N >= 32 nodes"""
    if N < 32:
        raise GeometryError(f"The kite needs at least 32 nodes, got {N}")
    return Kite().discretize(N)


def make_ellipse(center: Sequence[float], semi_axes: Sequence[float], N: int) -> DiscretizedCurve:
    return Ellipse(center, semi_axes).discretize(N)


class SceneGeometry:
    """Scatterer boundary and source/receiver curve with their separation

    Args:
        obstacle: discretized boundary of the scatterer
        source: discretized closed curve carrying sources and receivers
        separation: minimal node-to-node distance between the two curves
    """

    def __init__(self, obstacle: DiscretizedCurve, source: DiscretizedCurve, separation: float):
        self.obstacle = obstacle
        self.source = source
        self.separation = float(separation)

    @property
    def obstacle_radius(self) -> float:
        """Circumscribing radius of the scatterer about its center"""
        return self.obstacle.bounding_radius()

    @property
    def is_disk(self) -> bool:
        return self.obstacle.is_circle

    def with_resolution(self, n_source: int, n_obstacle: int) -> "SceneGeometry":
        """Same scene sampled with different node counts"""
        return validate_scene(self.obstacle.refine(n_obstacle), self.source.refine(n_source))

    def __repr__(self):
        return (
            f"SceneGeometry(obstacle={self.obstacle!r}, source={self.source!r}, "
            f"separation={self.separation:.6g})"
        )


def validate_scene(obstacle: DiscretizedCurve, source: DiscretizedCurve) -> SceneGeometry:
    """Check that the scatterer and the source curve have disjoint closures

    Args:
        obstacle: discretized scatterer boundary
        source: discretized source curve

    Returns:
        scene: validated scene carrying the separation

    Raises:
        OverlapError: when the curves cross, touch, or one lies inside the other
    """
    separation = float(np.min(cdist(obstacle.points, source.points)))
    if separation <= SEPARATION_TOL:
        raise OverlapError(
            f"Scatterer and source curve are not separated (distance {separation:.3g})"
        )
    if np.any(obstacle.contains(source.points)) or np.any(source.contains(obstacle.points)):
        raise OverlapError("Scatterer and source curve intersect or are nested")
    logger.debug(f"Scene validated with separation {separation:.6g}")
    return SceneGeometry(obstacle, source, separation)


def trapezoid_error(N: int, radius: float = 1.0) -> Tuple[float, float]:
    """Trapezoid quadrature of the analytic integrand e^{cos t} on a circle

    Returns the estimate and its absolute error against 2 pi I_0(1) r.
    """
    curve = make_circle((0.0, 0.0), radius, N)
    estimate = curve.integrate(np.exp(np.cos(curve.t))) / radius
    return estimate, abs(estimate - 2 * np.pi * i0(1.0))


__all__ = [
    "ClosedCurve",
    "Circle",
    "Ellipse",
    "Kite",
    "DiscretizedCurve",
    "SceneGeometry",
    "get_curve",
    "available_shapes",
    "make_circle",
    "make_kite",
    "make_ellipse",
    "validate_scene",
]
