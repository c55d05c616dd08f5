"""Experiment configuration files.

One YAML file describes one experiment::

    kind: toy
    seed: 0
    out: results/toy
    params:
      steps: 600

``params`` holds the block of the given ``kind``; every omitted key takes
its default and unknown keys are rejected with their line number.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core import GateMode
from ..densenet import ROTATIONS, MnistConfig, TrainMode
from ..errors import ConfigError
from ..gridworld import DEFAULT_METHODS, DEFAULT_TEMPERATURES, GridConfig, QLearningConfig, TrainConfig, TrainMethod
from ..landscapes import DEFAULT_ALPHA, DEFAULT_LEVEL, DEFAULT_STEPS
from ..seeding import MAX_SEED

logger = logging.getLogger(__name__)

KINDS = ("toy", "prop3", "gridworld", "mnist", "highdim")

_STRICT = ConfigDict(extra="forbid", frozen=True)


class ToyScenario(BaseModel):
    """A main loss paired with an auxiliary loss or field, and where its inits come from."""

    model_config = _STRICT

    name: str
    main: str
    aux: str
    box: tuple[tuple[float, float], tuple[float, float]] = ((-3.0, 3.0), (-3.0, 3.0))
    inits: tuple[tuple[float, ...], ...] | None = Field(None, description="Explicit inits; drawn from box when omitted")


DEFAULT_SCENARIOS = (
    ToyScenario(name="L1_L3", main="L1", aux="L3"),
    ToyScenario(name="L1_V", main="L1", aux="V"),
    ToyScenario(name="L2_L4", main="L2", aux="L4", box=((-3.0, -0.5), (-3.0, 3.0))),
)


class ToyParams(BaseModel):
    model_config = _STRICT

    kind: Literal["toy"] = Field("toy", exclude=True)
    steps: int = Field(DEFAULT_STEPS, ge=1)
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0)
    level: float = DEFAULT_LEVEL
    n_inits: int = Field(100, ge=1)
    min_radius: float = Field(0.5, ge=0.0)
    scenarios: tuple[ToyScenario, ...] = Field(DEFAULT_SCENARIOS, min_length=1)
    write_trajectories: bool = True


class Prop3Params(BaseModel):
    model_config = _STRICT

    kind: Literal["prop3"] = Field("prop3", exclude=True)
    a_values: tuple[float, ...] = (1.0,)
    modes: tuple[GateMode, ...] = (GateMode.WEIGHTED, GateMode.UNWEIGHTED)
    n_per_segment: int = Field(100_000, ge=1_000)

    @model_validator(mode="after")
    def _nonzero_slopes(self) -> Prop3Params:
        if any(a == 0.0 for a in self.a_values):
            msg = "a_values must be non-zero"
            raise ValueError(msg)
        return self


class GridworldParams(BaseModel):
    model_config = _STRICT

    kind: Literal["gridworld"] = Field("gridworld", exclude=True)
    pairs: int = Field(50, ge=1)
    temperatures: tuple[float, ...] = Field(DEFAULT_TEMPERATURES, min_length=1)
    methods: tuple[TrainMethod, ...] = Field(DEFAULT_METHODS, min_length=1)
    same_task: bool = False
    reference: bool = True
    train: TrainConfig = TrainConfig()
    grid: GridConfig = GridConfig()
    qlearning: QLearningConfig = QLearningConfig()

    @model_validator(mode="after")
    def _non_negative_temperatures(self) -> GridworldParams:
        if any(t < 0.0 for t in self.temperatures):
            msg = "temperatures must be >= 0"
            raise ValueError(msg)
        return self


class MnistParams(BaseModel):
    model_config = _STRICT

    kind: Literal["mnist"] = Field("mnist", exclude=True)
    rotations: tuple[int, ...] = Field((0,), min_length=1)
    modes: tuple[TrainMode, ...] = (TrainMode.SINGLE_TASK, TrainMode.MULTI_TASK, TrainMode.GATED)
    seeds: tuple[int, ...] = Field((0, 1, 2, 3, 4), min_length=1)
    train_frac: float = Field(1.0, gt=0.0, le=1.0)
    data_dir: Path | None = None
    training: MnistConfig = MnistConfig()

    @model_validator(mode="after")
    def _known_rotations(self) -> MnistParams:
        unknown = sorted(set(self.rotations) - set(ROTATIONS))
        if unknown:
            msg = f"rotations must be drawn from {list(ROTATIONS)}, got {unknown}"
            raise ValueError(msg)
        return self


class HighDimParams(BaseModel):
    model_config = _STRICT

    kind: Literal["highdim"] = Field("highdim", exclude=True)
    dims: tuple[int, ...] = Field((1, 10, 100, 1_000, 10_000), min_length=1)
    sigmas: tuple[float, ...] = Field((1.0,), min_length=1)
    n: int = Field(1_000, ge=1)
    kinds: tuple[Literal["random", "corrupted"], ...] = ("random", "corrupted")

    @model_validator(mode="after")
    def _ranges(self) -> HighDimParams:
        if any(d < 1 for d in self.dims):
            msg = "dims must be >= 1"
            raise ValueError(msg)
        if any(s < 0.0 for s in self.sigmas):
            msg = "sigmas must be >= 0"
            raise ValueError(msg)
        return self


Params = Annotated[
    Union[ToyParams, Prop3Params, GridworldParams, MnistParams, HighDimParams],
    Field(discriminator="kind"),
]

PARAMS_BY_KIND: dict[str, type[BaseModel]] = {
    "toy": ToyParams,
    "prop3": Prop3Params,
    "gridworld": GridworldParams,
    "mnist": MnistParams,
    "highdim": HighDimParams,
}


class ExperimentConfig(BaseModel):
    """Kind, master seed, output directory and the kind's parameter block."""

    model_config = _STRICT

    kind: Literal["toy", "prop3", "gridworld", "mnist", "highdim"]
    seed: int = Field(0, ge=0, le=MAX_SEED)
    out: Path | None = None
    params: Params

    @model_validator(mode="before")
    @classmethod
    def _tag_params(cls, data: Any) -> Any:
        if not isinstance(data, dict) or data.get("kind") not in PARAMS_BY_KIND:
            return data
        data = dict(data)
        params = data.get("params")
        if params is None:
            data["params"] = {"kind": data["kind"]}
        elif isinstance(params, dict):
            data["params"] = {"kind": data["kind"], **params}
        return data

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def default_config(kind: str, seed: int = 0, out: Path | None = None) -> ExperimentConfig:
    if kind not in PARAMS_BY_KIND:
        msg = f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}"
        raise ConfigError(msg)
    return ExperimentConfig(kind=kind, seed=seed, out=out, params={})


def dump_config(config: ExperimentConfig) -> str:
    """YAML text that :func:`parse_config_text` parses back to an equal config."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False, allow_unicode=True)


def _node_line(root: yaml.Node | None, loc: tuple[Any, ...]) -> int | None:
    """1-based line of the deepest YAML node reachable along ``loc``."""
    node, line = root, None
    if node is not None:
        line = node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(key):
                    line = key_node.start_mark.line + 1
                    node = value_node
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
    return line


def _describe(error: dict[str, Any], kind: Any) -> tuple[tuple[Any, ...], str]:
    loc = tuple(error["loc"])
    # Drop the union tag pydantic inserts after "params".
    if len(loc) > 1 and loc[0] == "params" and loc[1] == kind:
        loc = (loc[0], *loc[2:])
    dotted = ".".join(str(part) for part in loc) or "<root>"
    if error["type"] == "extra_forbidden":
        return loc, f"unknown key {dotted!r}"
    return loc, f"{dotted}: {error['msg']}"


def validate_config(data: Any, root: yaml.Node | None = None) -> ExperimentConfig:
    """
    Validate a parsed mapping, reporting the first problem as a ConfigError.

    Args:
        data: Mapping loaded from YAML (or built in code).
        root: Composed YAML node tree used to attach line numbers.
    """
    if not isinstance(data, dict):
        msg = "configuration must be a mapping with at least a 'kind' key"
        raise ConfigError(msg, _node_line(root, ()))
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        errors = exc.errors()
        loc, message = _describe(errors[0], data.get("kind"))
        if len(errors) > 1:
            message += f" (and {len(errors) - 1} more)"
        raise ConfigError(message, _node_line(root, loc)) from None


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse YAML text into a validated config."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"invalid YAML: {problem}", mark.line + 1 if mark else None) from None
    return validate_config(data, root)


def parse_config(path: str | Path) -> ExperimentConfig:
    """
    Read and validate an experiment configuration file.

    Raises:
        ConfigError: Syntax error, unknown key or out-of-range value, with its line.
        OSError: If the file cannot be read.
    """
    path = Path(path)
    config = parse_config_text(path.read_text(encoding="utf-8"))
    logger.info("Loaded %s config from %s", config.kind, path)
    return config


def save_config(config: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(config), encoding="utf-8")
    return path


def _merge(base: dict[str, Any], updates: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def apply_overrides(config: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """
    Config with nested ``overrides`` applied (``None`` values are ignored).

    Raises:
        ConfigError: If an override is out of range or names an unknown key.
    """

    def prune(tree: dict[str, Any]) -> dict[str, Any]:
        out = {}
        for key, value in tree.items():
            if isinstance(value, dict):
                value = prune(value)
                if value:
                    out[key] = value
            elif value is not None:
                out[key] = value
        return out

    updates = prune(overrides)
    if not updates:
        return config
    return validate_config(_merge(config.model_dump(mode="json"), updates))
