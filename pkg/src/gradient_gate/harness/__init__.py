"""Experiment configuration, runners, artifact emission and the CLI."""

from .config import (
    KINDS,
    ExperimentConfig,
    GridworldParams,
    HighDimParams,
    MnistParams,
    Prop3Params,
    ToyParams,
    ToyScenario,
    apply_overrides,
    default_config,
    dump_config,
    parse_config,
    parse_config_text,
    save_config,
)
from .emit import Schema, emit_csv, emit_json, read_csv
from .experiments import RUNNERS, TOY_METHODS, RunContext, execute, toy_field, trajectory_frame
from .highdim import CosineSummary, corrupted_cosine_stats, highdim_study, pair_cosines, random_cosine_stats
from .records import RunRecord, next_run_id, read_run_record, write_run_record
from .settings import HarnessSettings, get_settings

__all__ = [
    "KINDS",
    "RUNNERS",
    "TOY_METHODS",
    "CosineSummary",
    "ExperimentConfig",
    "GridworldParams",
    "HarnessSettings",
    "HighDimParams",
    "MnistParams",
    "Prop3Params",
    "RunContext",
    "RunRecord",
    "Schema",
    "ToyParams",
    "ToyScenario",
    "apply_overrides",
    "corrupted_cosine_stats",
    "default_config",
    "dump_config",
    "emit_csv",
    "emit_json",
    "execute",
    "get_settings",
    "highdim_study",
    "next_run_id",
    "pair_cosines",
    "parse_config",
    "parse_config_text",
    "random_cosine_stats",
    "read_csv",
    "read_run_record",
    "save_config",
    "toy_field",
    "trajectory_frame",
    "write_run_record",
]
