"""Study configuration: YAML documents validated in strict mode.

Example::

    scenario: default          # or a mapping overriding scenario keys
    grids: {n_x: 128, n_t: 400, n_v: 8}
    study:
      kind: epsilon_sweep
      epsilons: [0.5, 0.25, 0.125, 0.0625, 0.03125]
    output: {dir: out, snapshots: 32}
"""
from __future__ import annotations

from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from .errors import ConfigurationError
from .model import DEFAULT_SCENARIO


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BoundaryConfig(Strict):
    left: Union[str, float]
    right: Union[str, float]


class ScenarioConfig(Strict):
    ell: float = DEFAULT_SCENARIO["ell"]
    T: float = DEFAULT_SCENARIO["T"]
    T_star: Optional[float] = None
    sigma: Union[str, float, list[float]] = DEFAULT_SCENARIO["sigma"]
    alpha: float = DEFAULT_SCENARIO["alpha"]
    beta: float = DEFAULT_SCENARIO["beta"]
    gamma: float = DEFAULT_SCENARIO["gamma"]
    D: float = DEFAULT_SCENARIO["D"]
    epsilon: float = DEFAULT_SCENARIO["epsilon"]
    eps_star: float = DEFAULT_SCENARIO["eps_star"]
    u0: Union[str, float, list[float]] = DEFAULT_SCENARIO["u0"]
    c0: Union[str, float, list[float]] = DEFAULT_SCENARIO["c0"]
    gu: BoundaryConfig = BoundaryConfig(**DEFAULT_SCENARIO["gu"])
    gc: BoundaryConfig = BoundaryConfig(**DEFAULT_SCENARIO["gc"])

    @field_validator("ell", "T", "D", "eps_star")
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("epsilon")
    @classmethod
    def _eps_positive(cls, v):
        if not v > 0:
            raise ValueError("epsilon must be positive")
        return v

    @field_validator("alpha", "beta", "gamma")
    @classmethod
    def _nonnegative(cls, v):
        if v < 0:
            raise ValueError("must be nonnegative")
        return v

    def as_mapping(self) -> dict:
        return self.model_dump(exclude_none=True)


class GridConfig(Strict):
    n_x: int = Field(128, ge=2)
    n_t: int = Field(400, ge=1)
    n_v: int = Field(8, ge=1, le=256)


class GateConfig(Strict):
    combined: tuple[float, float] = (0.8, 1.2)
    b: tuple[float, float] = (0.8, 1.2)
    c: tuple[float, float] = (0.35, 0.65)
    r2_min: float = 0.97
    reference_change_max: float = 0.05


class ReferenceConfig(Strict):
    refine_x: int = Field(4, ge=1)
    refine_t: int = Field(16, ge=1)
    check: bool = True


class StudyConfigSection(Strict):
    kind: Literal["single", "epsilon_sweep", "mesh_refinement"] = "single"
    epsilon: Optional[float] = None
    epsilons: Optional[list[float]] = None
    levels: int = Field(3, ge=1)
    allow_incompatible: bool = False
    gates: GateConfig = GateConfig()
    reference: ReferenceConfig = ReferenceConfig()

    @field_validator("epsilon")
    @classmethod
    def _eps_positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("epsilon must be positive")
        return v

    @field_validator("epsilons")
    @classmethod
    def _eps_list(cls, v):
        if v is None:
            return v
        for e in v:
            if not e > 0:
                raise ValueError("epsilon must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilon list must be strictly decreasing")
        return v

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "epsilon_sweep":
            if not self.epsilons:
                raise ValueError("epsilon_sweep needs a non-empty 'epsilons' list")
            if len(self.epsilons) < 3:
                raise ValueError("epsilon_sweep needs at least 3 epsilons for a rate fit")
        if self.kind == "mesh_refinement" and self.levels < 2:
            raise ValueError("mesh_refinement needs levels >= 2")
        return self


class SolverConfig(Strict):
    source_iter_tol: float = Field(1e-12, gt=0)
    source_iter_max: int = Field(10_000, ge=1)
    method: Literal["auto", "source_iteration", "direct"] = "auto"
    scheme: Literal["diamond", "upwind"] = "diamond"
    coupling: Literal["lagged", "picard"] = "lagged"
    picard_iters: int = Field(1, ge=1)
    theta: float = Field(1.0, ge=0.0, le=1.0)


class OutputConfig(Strict):
    dir: str = "out"
    snapshots: int = Field(32, ge=1)


class StudyConfig(Strict):
    scenario: ScenarioConfig = ScenarioConfig()
    grids: GridConfig = GridConfig()
    study: StudyConfigSection = StudyConfigSection()
    solver: SolverConfig = SolverConfig()
    output: OutputConfig = OutputConfig()

    @field_validator("scenario", mode="before")
    @classmethod
    def _default_keyword(cls, v):
        if v == "default" or v is None:
            return {}
        return v

    def epsilons(self) -> list[float]:
        """Epsilon values of the study in configured order."""
        if self.study.kind == "epsilon_sweep":
            return list(self.study.epsilons)
        return [self.study.epsilon if self.study.epsilon is not None else self.scenario.epsilon]


def _loc(err) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def parse_config(text: str) -> StudyConfig:
    """Parse and validate a YAML study document.

    Raises ConfigurationError with the line number for syntax errors and the
    dotted key path for validation errors (unknown keys included).
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigurationError(f"configuration parse error{where}: {getattr(exc, 'problem', exc)}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration document must be a mapping")
    try:
        return StudyConfig.model_validate(doc)
    except PydanticValidationError as exc:
        msgs = []
        for err in exc.errors():
            if err["type"] == "extra_forbidden":
                msgs.append(f"{_loc(err)}: unknown key")
            else:
                msg = err["msg"].removeprefix("Value error, ")
                msgs.append(f"{_loc(err)}: {msg}")
        raise ConfigurationError("invalid configuration: " + "; ".join(msgs)) from None


def load_config(path) -> StudyConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config(text)
