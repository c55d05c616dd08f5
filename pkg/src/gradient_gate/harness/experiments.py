"""Experiment runners and the registry the CLI dispatches through.

Each runner takes a validated config and a run directory, writes its CSV
and JSON artifacts there and returns their paths. :func:`execute` wraps a
runner with run-id allocation and the run record.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..core import GateConfig
from ..densenet import load_mnist, run_mnist
from ..errors import ConfigError
from ..gridworld import run_experiment
from ..landscapes import (
    PATH_A,
    PATH_B,
    Field,
    ScalarField,
    VectorField,
    TrajectoryRecord,
    builtin_field,
    descend_many,
    gradient_field,
    line_integral,
    merged_field,
    sample_inits,
    sum_field,
    summarize,
)
from ..seeding import TOY_INITS, make_rng
from ..tools import timeit
from . import emit
from .config import (
    ExperimentConfig,
    GridworldParams,
    HighDimParams,
    MnistParams,
    Prop3Params,
    ToyParams,
    ToyScenario,
    save_config,
)
from .highdim import highdim_study
from .records import RunRecord, next_run_id, utc_now, write_run_record
from .settings import HarnessSettings, get_settings

logger = logging.getLogger(__name__)

TOY_METHODS = ("main_only", "sum", "weighted", "unweighted")


class RunContext(NamedTuple):
    out_dir: Path
    seed: int
    workers: int
    progress: bool
    data_dir: Path


Runner = Callable[[ExperimentConfig, RunContext], list[Path]]


def _toy_inits(scenario: ToyScenario, index: int, params: ToyParams, main: ScalarField, seed: int) -> np.ndarray:
    if scenario.inits is not None:
        inits = np.asarray(scenario.inits, dtype=np.float64)
        if inits.ndim != 2 or inits.shape[1] != main.arity:
            msg = f"scenario {scenario.name}: inits must be points of arity {main.arity}"
            raise ConfigError(msg)
        return inits
    if main.arity != 2:
        msg = f"scenario {scenario.name}: explicit inits are required for arity {main.arity}"
        raise ConfigError(msg)
    return sample_inits(make_rng(seed, TOY_INITS + index), params.n_inits, scenario.box, params.min_radius)


def toy_field(method: str, main: ScalarField, aux: Field) -> VectorField:
    """Update field of one toy method."""
    if method == "main_only":
        return gradient_field(main)
    if method == "sum":
        return sum_field(main, aux)
    if method == "weighted":
        return merged_field(main, aux, GateConfig.weighted())
    if method == "unweighted":
        return merged_field(main, aux, GateConfig.unweighted())
    msg = f"unknown toy method {method!r}; expected one of {', '.join(TOY_METHODS)}"
    raise ValueError(msg)


def trajectory_frame(records: list[TrajectoryRecord], prefix: str) -> pd.DataFrame:
    """Trajectory rows of several runs, ``run_id`` being ``prefix/NNN``."""
    frames = []
    for run, record in enumerate(records):
        points = np.asarray(record.points)
        steps = len(record)
        frames.append(
            pd.DataFrame(
                {
                    "run_id": f"{prefix}/{run:03d}",
                    "step": np.arange(steps),
                    "x1": points[:, 0],
                    "x2": points[:, 1] if points.shape[1] > 1 else np.full(steps, np.nan),
                    "main_loss": record.main_loss,
                    "cos": record.cos,
                    "weight": record.weight,
                }
            )
        )
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=emit.TRAJECTORY.names)


@timeit
def run_toy(config: ExperimentConfig, ctx: RunContext) -> list[Path]:
    """Main-only, ungated-sum and both gated descents for every scenario."""
    params: ToyParams = config.params
    summaries, trajectories = [], []
    jobs = [(index, scenario, method) for index, scenario in enumerate(params.scenarios) for method in TOY_METHODS]
    inits_by_scenario: dict[int, np.ndarray] = {}
    for index, scenario, method in tqdm(jobs, desc="toy", disable=not ctx.progress):
        main = builtin_field(scenario.main)
        if not isinstance(main, ScalarField):
            msg = f"scenario {scenario.name}: main {scenario.main!r} must be a scalar loss"
            raise ConfigError(msg)
        aux = builtin_field(scenario.aux)
        if index not in inits_by_scenario:
            inits_by_scenario[index] = _toy_inits(scenario, index, params, main, ctx.seed)
        records = descend_many(
            toy_field(method, main, aux),
            inits_by_scenario[index],
            main,
            steps=params.steps,
            alpha=params.alpha,
            level=params.level,
        )
        stats = summarize(records)
        logger.info(
            "%s/%s: %d/%d converged, %d diverged",
            scenario.name,
            method,
            stats["converged"],
            stats["runs"],
            stats["diverged"],
        )
        summaries.append({"scenario": scenario.name, "method": method, **stats})
        if params.write_trajectories:
            trajectories.append(trajectory_frame(records, f"{scenario.name}/{method}"))

    summary = pd.DataFrame(summaries, columns=emit.TOY_SUMMARY.names)
    paths = [emit.emit_csv(summary, emit.TOY_SUMMARY, ctx.out_dir / "summary.csv")]
    if params.write_trajectories:
        frame = pd.concat(trajectories, ignore_index=True)
        paths.append(emit.emit_csv(frame, emit.TRAJECTORY, ctx.out_dir / "trajectories.csv"))
    return paths


@timeit
def run_prop3(config: ExperimentConfig, ctx: RunContext) -> list[Path]:
    """Line integrals along both paths of the gated fields and of conservative controls."""
    params: Prop3Params = config.params
    n = params.n_per_segment
    rows = []

    def add(name: str, a: float, field: Field) -> None:
        integral_a = line_integral(field, PATH_A, n)
        integral_b = line_integral(field, PATH_B, n)
        difference = integral_b - integral_a
        rows.append(
            {"field": name, "a": a, "integral_a": integral_a, "integral_b": integral_b, "difference": difference}
        )
        logger.info("%s (a=%g): path A %.9f, path B %.9f", name, a, integral_a, integral_b)

    for a in params.a_values:
        main = builtin_field("prop3_main", a)
        aux = builtin_field("prop3_aux", a)
        for mode in params.modes:
            add(f"merged_{mode.value}", a, merged_field(main, aux, GateConfig(mode=mode)))
        add("sum", a, sum_field(main, aux))
    add("grad_L1", float("nan"), builtin_field("L1"))
    return [emit.emit_csv(rows, emit.PROP3, ctx.out_dir / "integrals.csv")]


@timeit
def run_gridworld(config: ExperimentConfig, ctx: RunContext) -> list[Path]:
    params: GridworldParams = config.params
    result = run_experiment(
        params.pairs,
        temperatures=params.temperatures,
        methods=params.methods,
        seed=ctx.seed,
        train_config=params.train,
        grid_config=params.grid,
        q_config=params.qlearning,
        same_task=params.same_task,
        reference=params.reference,
        workers=ctx.workers,
        progress=ctx.progress,
    )
    return [
        emit.emit_csv(result.trials, emit.GRID_TRIAL, ctx.out_dir / "trials.csv"),
        emit.emit_csv(result.aggregate, emit.GRID_AGGREGATE, ctx.out_dir / "aggregate.csv"),
        emit.emit_json(result.layouts, ctx.out_dir / "layouts.json"),
    ]


@timeit
def run_mnist_experiment(config: ExperimentConfig, ctx: RunContext) -> list[Path]:
    params: MnistParams = config.params
    data_dir = params.data_dir or ctx.data_dir
    train_data = load_mnist(data_dir, "train")
    test_data = load_mnist(data_dir, "test")
    if params.train_frac < 1.0:
        train_data = train_data.head(max(1, round(params.train_frac * len(train_data.labels))))
    n_train, n_test = len(train_data.labels), len(test_data.labels)
    logger.info("MNIST: %d training and %d test images from %s", n_train, n_test, data_dir)
    result = run_mnist(
        train_data,
        test_data,
        rotations=params.rotations,
        modes=params.modes,
        seeds=params.seeds,
        config=params.training,
        workers=ctx.workers,
        progress=ctx.progress,
    )
    return [
        emit.emit_csv(result.epochs, emit.MNIST_EPOCH, ctx.out_dir / "epochs.csv"),
        emit.emit_csv(result.summary, emit.MNIST_SUMMARY, ctx.out_dir / "summary.csv"),
        emit.emit_csv(result.gates, emit.MNIST_GATES, ctx.out_dir / "gates.csv"),
    ]


@timeit
def run_highdim(config: ExperimentConfig, ctx: RunContext) -> list[Path]:
    params: HighDimParams = config.params
    frame = highdim_study(params.dims, params.sigmas, params.n, params.kinds, seed=ctx.seed)
    return [emit.emit_csv(frame, emit.HIGHDIM, ctx.out_dir / "highdim.csv")]


RUNNERS: dict[str, Runner] = {
    "toy": run_toy,
    "prop3": run_prop3,
    "gridworld": run_gridworld,
    "mnist": run_mnist_experiment,
    "highdim": run_highdim,
}


def execute(
    config: ExperimentConfig,
    settings: HarnessSettings | None = None,
    workers: int | None = None,
    progress: bool | None = None,
) -> RunRecord:
    """
    Run one experiment under a fresh ``run-NNNN`` id.

    Artifacts go to ``<out>/<run_id>/`` together with the resolved config;
    the run record is written to ``<out>/<run_id>.json``. ``out`` defaults
    to ``<settings.output_dir>/<kind>``.

    Returns:
        The finished run record.
    """
    settings = settings or get_settings()
    base = config.out or settings.output_dir / config.kind
    run_id = next_run_id(base)
    ctx = RunContext(
        out_dir=base / run_id,
        seed=config.seed,
        workers=workers or settings.workers,
        progress=settings.progress if progress is None else progress,
        data_dir=settings.data_dir,
    )
    record = RunRecord(
        run_id=run_id,
        kind=config.kind,
        seed=config.seed,
        config_hash=config.config_hash(),
        started_at=utc_now(),
    )
    logger.info("Starting %s %s (seed %d) in %s", config.kind, run_id, config.seed, ctx.out_dir)
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = [save_config(config, ctx.out_dir / "config.yaml")]
    artifacts += RUNNERS[config.kind](config, ctx)
    record = record.finish(artifacts, base)
    write_run_record(record, base)
    elapsed = (record.finished_at - record.started_at).total_seconds()
    logger.info("Finished %s in %.1f s", run_id, elapsed)
    return record
