"""Rotated-MNIST training under single-task, multi-task and gated updates."""

from __future__ import annotations

import functools
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from ..core import CosineTracker, GateConfig, ParamVector, combine, gate_decision
from ..seeding import MNIST_AUX_ORDER, MNIST_INIT, MNIST_ORDER, make_rng
from .idx import Dataset
from .network import HIDDEN_SIZES, DenseNet, backward, forward, test_error
from .optim import RMSPropState, rmsprop_step
from .rotation import rotate_batch

logger = logging.getLogger(__name__)

EPOCH_COLUMNS = ["epoch", "train_loss_main", "train_loss_aux", "test_error", "mean_cos", "mean_gate_weight"]
GATE_COLUMNS = ["epoch", "step", "raw_cos", "smoothed_cos", "weight"]

UpdateObserver = Callable[[ParamVector, ParamVector, float], None]


class TrainMode(str, Enum):
    SINGLE_TASK = "single_task"
    MULTI_TASK = "multi_task"
    GATED = "gated"


class OptimizerSees(str, Enum):
    """Gradient folded into the shared RMSprop accumulator."""

    APPLIED = "applied"
    MAIN = "main"


class MnistConfig(BaseModel):
    """Training hyperparameters for one run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(50, ge=1)
    batch: int = Field(128, ge=1)
    lr: float = Field(0.001, gt=0.0)
    rho: float = Field(0.9, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    hidden: tuple[int, ...] = HIDDEN_SIZES
    gate: GateConfig = GateConfig.unweighted()
    optimizer_sees: OptimizerSees = OptimizerSees.APPLIED
    independent_aux_shuffle: bool = False
    log_gates: bool = True

    def gate_for(self, mode: TrainMode) -> GateConfig:
        if mode is TrainMode.MULTI_TASK:
            return GateConfig.always_on(1.0)
        if mode is TrainMode.SINGLE_TASK:
            return GateConfig.off()
        return self.gate


class TrainResult(NamedTuple):
    net: DenseNet
    epochs: pd.DataFrame
    gates: pd.DataFrame
    shared_trajectory: list[np.ndarray]


def rotated(data: Dataset, degrees: float) -> Dataset:
    """Same labels with every image rotated by ``degrees``."""
    return Dataset(images=np.clip(rotate_batch(data.images, degrees), 0.0, 1.0), labels=data.labels)


def train(
    main_data: Dataset,
    aux_data: Dataset,
    mode: TrainMode | str,
    config: MnistConfig | None = None,
    seed: int = 0,
    test_data: Dataset | None = None,
    record_trajectory: bool = False,
    progress: bool = False,
    on_update: UpdateObserver | None = None,
) -> TrainResult:
    """
    Train a two-head network on the main task and its auxiliary task.

    Main and auxiliary batches use the same shuffled indices unless
    ``independent_aux_shuffle`` is set. Heads always follow their own loss;
    the shared trunk follows the gradient selected by ``mode``:
    ``single_task`` the main gradient only (the auxiliary head is not
    trained), ``multi_task`` the sum, ``gated`` the rule in ``config.gate``.

    Args:
        main_data: Main-task training set.
        aux_data: Auxiliary training set, aligned with ``main_data``.
        mode: Training mode.
        config: Hyperparameters.
        seed: Master seed of the run (weights and data order).
        test_data: Main-task test set for the per-epoch test error.
        record_trajectory: Keep a copy of the shared parameters after every epoch.
        progress: Show a tqdm bar over epochs.
        on_update: Called with ``(shared_update, main_gradient, weight)`` before
            each shared RMSprop step.

    Returns:
        Trained network, per-epoch metrics, the per-batch gate log and the
        optional shared-parameter trajectory.
    """
    config = config or MnistConfig()
    mode = TrainMode(mode)
    if len(main_data) != len(aux_data):
        msg = f"main and aux sets differ in size: {len(main_data)} vs {len(aux_data)}"
        raise ValueError(msg)
    gate = config.gate_for(mode)
    train_aux = mode is not TrainMode.SINGLE_TASK

    net = DenseNet.initialize(make_rng(seed, MNIST_INIT), hidden=config.hidden)
    order_rng = make_rng(seed, MNIST_ORDER)
    aux_rng = make_rng(seed, MNIST_AUX_ORDER)

    def optimizer(size: int) -> RMSPropState:
        return RMSPropState(size, lr=config.lr, rho=config.rho, eps=config.eps)

    shared_state = optimizer(len(net.shared()))
    head_states = {name: optimizer(len(net.head(name))) for name in net.heads}
    tracker: CosineTracker | None = None

    epoch_rows: list[dict[str, Any]] = []
    gate_rows: list[dict[str, Any]] = []
    trajectory: list[np.ndarray] = []
    n = len(main_data)
    step = 0
    for epoch in tqdm(range(1, config.epochs + 1), desc=f"{mode.value} seed {seed}", disable=not progress):
        order = order_rng.permutation(n)
        aux_order = aux_rng.permutation(n) if config.independent_aux_shuffle else order
        losses_main, losses_aux, cosines, weights = [], [], [], []
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            _, cache = forward(net, main_data.images[idx], "main")
            main_grads = backward(net, cache, main_data.labels[idx])
            losses_main.append(main_grads.loss)
            net.set_head("main", rmsprop_step(head_states["main"], net.head("main"), main_grads.head))
            if not train_aux:
                if on_update is not None:
                    on_update(main_grads.shared, main_grads.shared, 0.0)
                net.set_shared(rmsprop_step(shared_state, net.shared(), main_grads.shared))
                step += 1
                continue
            aux_idx = aux_order[start : start + config.batch]
            _, aux_cache = forward(net, aux_data.images[aux_idx], "aux")
            aux_grads = backward(net, aux_cache, aux_data.labels[aux_idx])
            losses_aux.append(aux_grads.loss)
            net.set_head("aux", rmsprop_step(head_states["aux"], net.head("aux"), aux_grads.head))

            decision, tracker = gate_decision(gate, main_grads.shared, aux_grads.shared, tracker)
            applied = combine(main_grads.shared, aux_grads.shared, decision.weight)
            stats = applied if config.optimizer_sees is OptimizerSees.APPLIED else main_grads.shared
            if on_update is not None:
                on_update(applied, main_grads.shared, decision.weight)
            net.set_shared(rmsprop_step(shared_state, net.shared(), applied, stat_grads=stats))
            cosines.append(decision.raw_cos)
            weights.append(decision.weight)
            if config.log_gates and mode is TrainMode.GATED:
                gate_rows.append({"epoch": epoch, **decision.as_row(step)})
            step += 1

        error = test_error(net, test_data.images, test_data.labels) if test_data is not None else float("nan")
        epoch_rows.append(
            {
                "epoch": epoch,
                "train_loss_main": float(np.mean(losses_main)),
                "train_loss_aux": float(np.mean(losses_aux)) if losses_aux else float("nan"),
                "test_error": error,
                "mean_cos": float(np.mean(cosines)) if cosines else float("nan"),
                "mean_gate_weight": float(np.mean(weights)) if weights else float("nan"),
            }
        )
        if record_trajectory:
            trajectory.append(np.array(net.shared()))
        logger.debug("epoch %d (%s): main loss %.4f, test error %.2f%%", epoch, mode.value, np.mean(losses_main), error)
    return TrainResult(
        net,
        pd.DataFrame(epoch_rows, columns=EPOCH_COLUMNS),
        pd.DataFrame(gate_rows, columns=GATE_COLUMNS),
        trajectory,
    )


class MnistResult(NamedTuple):
    epochs: pd.DataFrame
    summary: pd.DataFrame
    gates: pd.DataFrame


def _run_one(
    job: tuple[float, TrainMode, int],
    train_data: Dataset,
    test_data: Dataset,
    config: MnistConfig,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    rotation, mode, seed = job
    result = train(train_data, rotated(train_data, rotation), mode, config, seed=seed, test_data=test_data)
    keys = {"rotation": rotation, "mode": mode.value, "seed": seed}
    epochs = result.epochs.assign(**keys)[[*keys, *EPOCH_COLUMNS]]
    gates = result.gates.assign(**keys)[[*keys, *GATE_COLUMNS]]
    final_error = epochs["test_error"].iloc[-1]
    logger.info("rotation %g, %s, seed %d: test error %.2f%%", rotation, mode.value, seed, final_error)
    return epochs, gates


def summarize_runs(epochs: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of the final test error over seeds per ``(rotation, mode)``."""
    final = epochs.sort_values("epoch").groupby(["rotation", "mode", "seed"], sort=False).tail(1)
    summary = (
        final.groupby(["rotation", "mode"], sort=False)["test_error"]
        .agg(mean_test_error="mean", std_test_error="std", runs="count")
        .reset_index()
    )
    summary["std_test_error"] = summary["std_test_error"].fillna(0.0)
    return summary


def run_mnist(
    train_data: Dataset,
    test_data: Dataset,
    rotations: Sequence[float],
    modes: Sequence[TrainMode | str],
    seeds: Sequence[int],
    config: MnistConfig | None = None,
    workers: int = 1,
    progress: bool = False,
) -> MnistResult:
    """Every ``(rotation, mode, seed)`` combination, gathered in that order."""
    config = config or MnistConfig()
    jobs = [(float(r), TrainMode(m), int(s)) for r in rotations for m in modes for s in seeds]
    run = functools.partial(_run_one, train_data=train_data, test_data=test_data, config=config)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(tqdm(executor.map(run, jobs), total=len(jobs), desc="runs", disable=not progress))
    else:
        results = [run(job) for job in tqdm(jobs, desc="runs", disable=not progress)]
    epochs = pd.concat([e for e, _ in results], ignore_index=True)
    gate_frames = [g for _, g in results if not g.empty]
    if gate_frames:
        gates = pd.concat(gate_frames, ignore_index=True)
    else:
        gates = pd.DataFrame(columns=["rotation", "mode", "seed", *GATE_COLUMNS])
    return MnistResult(epochs, summarize_runs(epochs), gates)
