"""Run configuration: flat `key = value` files with dotted section keys."""
from typing import Any
from typing import List
from typing import Literal
from typing import Optional
from typing import Tuple
from typing import Union

import os
import json

import fsspec
import yaml

from loguru import logger
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import ValidationError
from pydantic import model_validator

from ioduality.duality import Thresholds
from ioduality.exceptions import ConfigError
from ioduality.forward import ScatteringProblem
from ioduality.geometry import DiscretizedCurve
from ioduality.geometry import SceneGeometry
from ioduality.geometry import get_curve
from ioduality.geometry import make_circle
from ioduality.geometry import validate_scene
from ioduality.utils import commons

UNHASHED_SECTIONS = ("run",)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ObstacleConfig(_Section):
    shape: Literal["circle", "kite", "ellipse"] = "circle"
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = Field(1.0, gt=0)
    semi_axes: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def _check_shape(self):
        if self.shape == "ellipse":
            if self.semi_axes is None or min(self.semi_axes) <= 0:
                raise ValueError("an ellipse needs two positive semi_axes")
        return self

    def curve(self, n: int) -> DiscretizedCurve:
        if self.shape == "circle":
            return get_curve("circle", center=self.center, radius=self.radius).discretize(n)
        if self.shape == "ellipse":
            return get_curve("ellipse", center=self.center, semi_axes=self.semi_axes).discretize(n)
        return get_curve("kite").discretize(n)


class SourceConfig(_Section):
    center: Tuple[float, float] = (2.0, 0.0)
    radius: float = Field(0.3, gt=0)


class GeometryConfig(_Section):
    obstacle: ObstacleConfig = Field(default_factory=ObstacleConfig)
    source: SourceConfig = Field(default_factory=SourceConfig)


class ProblemConfig(_Section):
    kind: Literal["dirichlet", "neumann", "transmission"] = "dirichlet"
    n: Optional[float] = Field(None, gt=0)


class SweepConfig(_Section):
    interval: Tuple[float, float] = (2.0, 16.0)
    step: float = Field(0.02, gt=0)

    @model_validator(mode="after")
    def _check_interval(self):
        lo, hi = self.interval
        if not 0 < lo < hi:
            raise ValueError(f"interval must satisfy 0 < lo < hi, got {list(self.interval)}")
        return self


class DiscretizationConfig(_Section):
    n_source: int = Field(64, ge=8)
    n_obstacle: int = Field(128, ge=8)
    modes: Optional[int] = Field(None, gt=0, le=120)
    theta_points: int = Field(720, ge=16)
    n_directions: int = Field(64, ge=8)
    auto_refine: bool = True
    refine_tol: float = Field(1e-8, gt=0)

    @model_validator(mode="after")
    def _check_even(self):
        for name in ("n_source", "n_obstacle"):
            if getattr(self, name) % 2:
                raise ValueError(f"{name} must be even")
        return self


class PhaseConfig(_Section):
    delta_rel: float = Field(1e-6, gt=0, lt=1)


class SolverConfig(_Section):
    name: Literal["auto", "modal", "nystrom"] = "auto"


class ValidateConfig(_Section):
    lam: float = Field(2.25, gt=0)
    farfield_lambdas: List[float] = Field(default_factory=lambda: [2.25, 6.25])
    flip_sign: bool = False


class SynthesisConfig(_Section):
    lam: float = Field(2.89, gt=0)
    presumed_region_radius: float = Field(1.2, gt=0)
    presumed_region_center: Tuple[float, float] = (0.0, 0.0)
    epsilon: float = Field(0.1, gt=0)
    alphas: List[float] = Field(default_factory=lambda: [1e-2, 1e-4, 1e-6, 1e-8, 1e-10])

    @model_validator(mode="after")
    def _check_alphas(self):
        alphas = self.alphas
        if not alphas or any(a <= 0 for a in alphas):
            raise ValueError("alphas must be positive")
        if any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("alphas must be strictly decreasing")
        return self


class RunSection(_Section):
    parallelism: int = Field(1, ge=1)
    cache_dir: Optional[str] = None
    out: str = "ioduality-out"
    plot: bool = True


class RunConfig(_Section):
    """Complete configuration of a run

    Every section except `run` enters the configuration hash, so two configurations with
    the same hash produce the same numbers.
    """

    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    thresholds: Thresholds = Field(default_factory=Thresholds)
    discretization: DiscretizationConfig = Field(default_factory=DiscretizationConfig)
    phase: PhaseConfig = Field(default_factory=PhaseConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    validate_: ValidateConfig = Field(default_factory=ValidateConfig, alias="validate")
    synthesis: SynthesisConfig = Field(default_factory=SynthesisConfig)
    run: RunSection = Field(default_factory=RunSection)

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _check_problem(self):
        problem = self.problem
        if problem.kind == "transmission" and (problem.n is None or problem.n == 1):
            raise ValueError("problem.n must be set and different from 1 for transmission")
        if problem.kind != "transmission" and problem.n is not None:
            raise ValueError(f"problem.n is only used by transmission problems, not {problem.kind}")
        return self

    def flat(self, include_run: bool = True) -> dict:
        flat = commons.flatten_dict(self.model_dump(by_alias=True, mode="json"))
        if not include_run:
            flat = {k: v for k, v in flat.items() if k.split(".")[0] not in UNHASHED_SECTIONS}
        return flat

    def canonical_text(self) -> str:
        return commons.canonical_text(self.flat(include_run=False))

    @property
    def config_hash(self) -> str:
        return commons.sha256_text(self.canonical_text())

    def scattering_problem(self) -> ScatteringProblem:
        return ScatteringProblem(kind=self.problem.kind, n=self.problem.n)

    def source_curve(self) -> DiscretizedCurve:
        source = self.geometry.source
        return make_circle(source.center, source.radius, self.discretization.n_source)

    def scene(self) -> SceneGeometry:
        """Discretize and validate the scene

        Raises:
            OverlapError: if the scatterer and the source curve are not separated
        """
        obstacle = self.geometry.obstacle.curve(self.discretization.n_obstacle)
        return validate_scene(obstacle, self.source_curve())

    def with_overrides(self, **flat_overrides: Any) -> "RunConfig":
        """Copy with some dotted keys replaced"""
        flat = self.flat()
        flat.update(flat_overrides)
        return build_config(flat)


def _format_errors(error: ValidationError) -> str:
    parts = []
    for err in error.errors():
        loc = ".".join(str(p) for p in err["loc"] if not str(p).startswith("function-"))
        parts.append(f"{loc or 'config'}: {err['msg']}")
    return "; ".join(parts)


def build_config(data: dict) -> RunConfig:
    """Validate flat (dotted) or nested configuration data

    Raises:
        ConfigError: naming the offending fields
    """
    if any("." in key for key in data):
        try:
            data = commons.unflatten_dict(data)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_format_errors(e)}") from None


def _parse_value(text: str) -> Any:
    value = yaml.safe_load(text) if text else None
    if isinstance(value, str):
        # yaml 1.1 reads 1e-4 as a string
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, list):
        return [_parse_value(str(v)) if isinstance(v, str) else v for v in value]
    return value


def parse_flat_config(text: str) -> dict:
    """Parse `key = value` lines

    Blank lines and lines starting with `#` are ignored. Keys use dots for sections and
    values are read as YAML scalars or flow lists, e.g. `sweep.interval = [2, 16]`.

    Raises:
        ConfigError: for a malformed line or a repeated key
    """
    data = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key or any(not part for part in key.split(".")):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key in data:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            data[key] = _parse_value(value.strip())
        except yaml.YAMLError as e:
            raise ConfigError(f"line {lineno}: cannot parse value for {key!r}: {e}") from None
    return data


def load_config(path: Union[str, os.PathLike], **overrides: Any) -> RunConfig:
    """Load a configuration file, flat text, YAML or JSON by extension

    Args:
        path: local or remote path
        overrides: dotted keys replacing file values

    Raises:
        ConfigError: if the file is missing, malformed or invalid
    """
    path = str(path)
    try:
        with fsspec.open(path, "r", encoding="utf-8") as IN:
            text = IN.read()
    except FileNotFoundError:
        raise ConfigError(f"Config file {path} not found") from None
    if path.endswith((".yaml", ".yml")):
        try:
            data = commons.flatten_dict(yaml.safe_load(text) or {})
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse {path}: {e}") from None
    elif path.endswith(".json"):
        try:
            data = commons.flatten_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Cannot parse {path}: {e}") from None
    else:
        data = parse_flat_config(text)
    data.update(overrides)
    config = build_config(data)
    logger.debug(f"Loaded {path} (hash {config.config_hash[:12]})")
    return config
