"""Student training under the five transfer methods and the multi-pair experiment."""

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

from ..core import CosineTracker, GateConfig, ParamVector, combine, cosine, gate_decision
from ..seeding import ROLE_ENV, ROLE_REFERENCE, ROLE_TEACHER, ROLE_TRIAL, grid_stream, make_rng
from .agents import QLearningConfig, SoftmaxPolicy, TeacherPolicy, q_learning, teacher_policy
from .env import N_ACTIONS, EnvPair, GridConfig, GridSpec
from .updates import Episode, distill_gradient, pg_update, rollout

logger = logging.getLogger(__name__)


class TrainMethod(str, Enum):
    """How the policy gradient G and the distillation gradient V are combined."""

    REWARD = "reward"
    DISTILL = "distill"
    ADD = "add"
    COS_WEIGHTED = "cos_weighted"
    COS_UNWEIGHTED = "cos_unweighted"
    COS_SIGNED = "cos_signed"  # experimental: G + V if cos >= 0 else G - V

    @property
    def uses_teacher(self) -> bool:
        return self is not TrainMethod.REWARD


DEFAULT_METHODS = (
    TrainMethod.REWARD,
    TrainMethod.DISTILL,
    TrainMethod.ADD,
    TrainMethod.COS_WEIGHTED,
    TrainMethod.COS_UNWEIGHTED,
)
DEFAULT_TEMPERATURES = (0.0, 0.1, 1.0)
TEACHER_LINE = "teacher"
RANDOM_LINE = "random"

# Stream offsets are fixed by enum order, independent of which methods are requested.
_METHOD_INDEX = {method: index for index, method in enumerate(TrainMethod)}

AuxGradient = Callable[[SoftmaxPolicy, Episode], ParamVector]
UpdateObserver = Callable[[ParamVector, ParamVector, float], None]


class TrainConfig(BaseModel):
    """Student hyperparameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    steps: int = Field(10_000, ge=1, description="Training budget in visited states")
    eval_every: int = Field(500, ge=1)
    eval_episodes: int = Field(100, ge=1)
    max_eval_steps: int = Field(10_000, ge=1, description="Safety cap on evaluation episode length")
    alpha: float = Field(0.01, gt=0.0)
    gamma: float = Field(0.95, ge=0.0, le=1.0)
    discounted_returns: bool = True
    threshold: float = Field(0.0, allow_inf_nan=False)
    ema_decay: float = Field(0.0, ge=0.0, lt=1.0)

    def gate_for(self, method: TrainMethod) -> GateConfig | None:
        if method is TrainMethod.REWARD:
            return GateConfig.off()
        if method is TrainMethod.ADD:
            return GateConfig.always_on(1.0)
        if method is TrainMethod.COS_WEIGHTED:
            return GateConfig.weighted(self.threshold, ema_decay=self.ema_decay)
        if method is TrainMethod.COS_UNWEIGHTED:
            return GateConfig.unweighted(self.threshold, ema_decay=self.ema_decay)
        return None


def evaluate_policy(
    probs: np.ndarray,
    env: GridSpec,
    n_episodes: int,
    rng: np.random.Generator,
    max_steps: int = 10_000,
) -> np.ndarray:
    """
    Undiscounted returns of ``n_episodes`` sampled episodes, stepped in lock-step.

    Args:
        probs: Action distribution per state, shape ``(n_states, 4)``.
        env: Environment to evaluate in.
        n_episodes: Number of episodes.
        rng: Source of actions and noise.
        max_steps: Episodes still running after this many steps are cut.
    """
    table = env.table
    cumulative = np.cumsum(probs, axis=1)
    state = np.full(n_episodes, env.start_state, dtype=np.int64)
    active = np.ones(n_episodes, dtype=bool)
    totals = np.zeros(n_episodes)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        s = state[idx]
        draw = rng.random(idx.size)[:, None] * cumulative[s, -1:]
        actions = np.minimum(np.sum(cumulative[s] <= draw, axis=1), N_ACTIONS - 1)
        noisy = rng.random(idx.size) < env.noise
        redrawn = rng.integers(N_ACTIONS, size=idx.size)
        executed = np.where(noisy, redrawn, actions)
        killed = rng.random(idx.size) < env.kill
        totals[idx] += np.where(killed, 0.0, table.reward[s, executed])
        state[idx] = table.next_state[s, executed]
        active[idx[killed | table.done[s, executed]]] = False
    if np.any(active):
        logger.warning("%d evaluation episode(s) cut at %d steps", int(active.sum()), max_steps)
    return totals


class _Step(NamedTuple):
    update: ParamVector
    cos: float
    weight: float
    tracker: CosineTracker | None


def _shared_update(
    method: TrainMethod,
    gate: GateConfig | None,
    grad: ParamVector,
    aux: ParamVector | None,
    tracker: CosineTracker | None,
) -> _Step:
    if aux is None:
        return _Step(grad, float("nan"), float("nan"), tracker)
    if method is TrainMethod.DISTILL:
        return _Step(aux, cosine(grad, aux), float("nan"), tracker)
    if method is TrainMethod.COS_SIGNED:
        cos = cosine(grad, aux)
        # cos == 0 counts as agreement, like the inclusive gate threshold
        factor = 1.0 if cos >= 0.0 else -1.0
        return _Step(ParamVector(grad.values + factor * aux.values), cos, factor, tracker)
    decision, tracker = gate_decision(gate, grad, aux, tracker)
    return _Step(combine(grad, aux, decision.weight), decision.raw_cos, decision.weight, tracker)


def _eval_points(config: TrainConfig) -> list[int]:
    points = list(range(0, config.steps + 1, config.eval_every))
    if points[-1] != config.steps:
        points.append(config.steps)
    return points


def train(
    pair: EnvPair,
    method: TrainMethod,
    teacher: TeacherPolicy | None,
    rng: np.random.Generator,
    config: TrainConfig | None = None,
    aux_gradient: AuxGradient | None = None,
    on_update: UpdateObserver | None = None,
) -> pd.DataFrame:
    """
    Train a fresh student on ``pair.main_env``.

    Every visited state counts toward ``config.steps``; the last episode is
    cut to fit the budget. The shared update per episode is G for
    ``reward``, V for ``distill``, G + V for ``add`` and the gated
    combination for the cosine methods. Baselines always follow their own
    squared-error gradient.

    Args:
        pair: Environment pair; only the main environment is trained on.
        method: Combination rule.
        teacher: Teacher distribution, unused by ``reward``.
        rng: Source of all sampling in this trial.
        config: Student hyperparameters.
        aux_gradient: Replaces the distillation gradient; the default uses ``teacher``.
        on_update: Called with ``(update, policy_gradient, weight)`` before each update is applied.

    Returns:
        Learning curve with columns ``step, eval_return, cos, gate_weight``;
        ``cos`` and ``gate_weight`` are means over the updates since the
        previous evaluation point.
    """
    config = config or TrainConfig()
    method = TrainMethod(method)
    env = pair.main_env
    if aux_gradient is None and method.uses_teacher:
        if teacher is None:
            msg = f"method {method.value} needs a teacher"
            raise ValueError(msg)
        aux_gradient = functools.partial(_teacher_gradient, teacher)
    gate = config.gate_for(method)
    policy = SoftmaxPolicy(env.n_states)
    tracker: CosineTracker | None = None

    rows: list[dict[str, Any]] = []
    window_cos: list[float] = []
    window_weight: list[float] = []

    def evaluate(step: int) -> None:
        returns = evaluate_policy(policy.probs(), env, config.eval_episodes, rng, config.max_eval_steps)
        rows.append(
            {
                "step": step,
                "eval_return": float(np.mean(returns)),
                "cos": _mean_or_nan(window_cos),
                "gate_weight": _mean_or_nan(window_weight),
            }
        )
        window_cos.clear()
        window_weight.clear()

    points = _eval_points(config)
    evaluate(points[0])
    upcoming = 1
    visited = 0
    while visited < config.steps:
        episode = rollout(policy, env, rng, max_steps=config.steps - visited)
        pg = pg_update(policy, episode, gamma=config.gamma, alpha=config.alpha, discounted=config.discounted_returns)
        aux = aux_gradient(policy, episode) if method.uses_teacher else None
        step = _shared_update(method, gate, pg.gradient, aux, tracker)
        tracker = step.tracker
        if on_update is not None:
            on_update(step.update, pg.gradient, step.weight)
        policy.apply(step.update, config.alpha)
        policy.baseline += pg.baseline_delta
        window_cos.append(step.cos)
        window_weight.append(step.weight)
        visited += len(episode)
        while upcoming < len(points) and points[upcoming] <= visited:
            evaluate(points[upcoming])
            upcoming += 1
    return pd.DataFrame(rows, columns=["step", "eval_return", "cos", "gate_weight"])


def _teacher_gradient(teacher: TeacherPolicy, policy: SoftmaxPolicy, episode: Episode) -> ParamVector:
    return distill_gradient(policy, teacher, episode)


def _mean_or_nan(values: list[float]) -> float:
    finite = [v for v in values if np.isfinite(v)]
    return float(np.mean(finite)) if finite else float("nan")


class ExperimentResult(NamedTuple):
    trials: pd.DataFrame
    aggregate: pd.DataFrame
    layouts: list[dict[str, Any]]


def run_pair(
    pair_index: int,
    seed: int,
    temperatures: Sequence[float],
    methods: Sequence[TrainMethod],
    train_config: TrainConfig,
    grid_config: GridConfig,
    q_config: QLearningConfig,
    same_task: bool = False,
    reference: bool = True,
) -> tuple[pd.DataFrame, dict[str, Any]]:
    """
    All trials of one environment pair.

    The teacher is learned once per pair (on the auxiliary environment, or
    on the main environment for the same-task control). The ``reward``
    trial does not depend on the temperature and is trained once, then
    reported under every temperature.

    Returns:
        Trial rows ``pair, method, temperature, step, eval_return, cos,
        gate_weight`` and the pair's JSON layout.
    """
    pair = EnvPair.sample(make_rng(seed, grid_stream(pair_index, ROLE_ENV)), grid_config, seed=pair_index)
    teacher_env = pair.main_env if same_task else pair.aux_env
    q_table = q_learning(teacher_env, q_config, make_rng(seed, grid_stream(pair_index, ROLE_TEACHER)))
    points = _eval_points(train_config)

    frames = []

    def add(frame: pd.DataFrame, method: str, temperature: float) -> None:
        frame = frame.copy()
        frame.insert(0, "temperature", float(temperature))
        frame.insert(0, "method", method)
        frame.insert(0, "pair", pair_index)
        frames.append(frame)

    for method in methods:
        trial_stream = grid_stream(pair_index, ROLE_TRIAL + _METHOD_INDEX[method])
        if not method.uses_teacher:
            curve = train(pair, method, None, make_rng(seed, trial_stream), train_config)
            for temperature in temperatures:
                add(curve, method.value, temperature)
            continue
        for temperature in temperatures:
            teacher = teacher_policy(q_table, temperature)
            curve = train(pair, method, teacher, make_rng(seed, trial_stream), train_config)
            add(curve, method.value, temperature)
        logger.debug("pair %d: finished %s", pair_index, method.value)

    if reference:
        ref_rng = make_rng(seed, grid_stream(pair_index, ROLE_REFERENCE))
        n_eval = train_config.eval_episodes
        cap = train_config.max_eval_steps
        uniform = np.full((pair.main_env.n_states, N_ACTIONS), 1.0 / N_ACTIONS)
        random_return = float(np.mean(evaluate_policy(uniform, pair.main_env, n_eval, ref_rng, cap)))
        for temperature in temperatures:
            probs = teacher_policy(q_table, temperature).probs
            teacher_return = float(np.mean(evaluate_policy(probs, pair.main_env, n_eval, ref_rng, cap)))
            for line, value in ((TEACHER_LINE, teacher_return), (RANDOM_LINE, random_return)):
                flat = pd.DataFrame(
                    {"step": points, "eval_return": value, "cos": float("nan"), "gate_weight": float("nan")}
                )
                add(flat, line, temperature)

    layout = {"pair": pair_index, "aux_env": pair.aux_env.to_layout(), "main_env": pair.main_env.to_layout()}
    return pd.concat(frames, ignore_index=True), layout


def aggregate_curves(trials: pd.DataFrame) -> pd.DataFrame:
    """Mean return and standard error over pairs per ``(method, temperature, step)``."""
    grouped = trials.groupby(["method", "temperature", "step"], sort=False)["eval_return"]
    summary = grouped.agg(mean_return="mean", stderr="sem").reset_index()
    summary["stderr"] = summary["stderr"].fillna(0.0)
    return summary


def run_experiment(
    n_pairs: int,
    temperatures: Sequence[float] = DEFAULT_TEMPERATURES,
    methods: Sequence[TrainMethod | str] = DEFAULT_METHODS,
    seed: int = 0,
    train_config: TrainConfig | None = None,
    grid_config: GridConfig | None = None,
    q_config: QLearningConfig | None = None,
    same_task: bool = False,
    reference: bool = True,
    workers: int = 1,
    progress: bool = False,
) -> ExperimentResult:
    """
    Train every method on ``n_pairs`` sampled environment pairs.

    Deterministic given ``seed``: each pair and trial owns its random stream,
    and results are gathered in pair order regardless of ``workers``.

    Raises:
        ValueError: If ``n_pairs`` is below 1 or no temperature is given.
    """
    if n_pairs < 1:
        msg = f"n_pairs must be >= 1, got {n_pairs}"
        raise ValueError(msg)
    if not temperatures:
        msg = "at least one temperature is required"
        raise ValueError(msg)
    job = functools.partial(
        run_pair,
        seed=seed,
        temperatures=[float(t) for t in temperatures],
        methods=[TrainMethod(m) for m in methods],
        train_config=train_config or TrainConfig(),
        grid_config=grid_config or GridConfig(),
        q_config=q_config or QLearningConfig(),
        same_task=same_task,
        reference=reference,
    )
    indices = range(n_pairs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(tqdm(executor.map(job, indices), total=n_pairs, desc="pairs", disable=not progress))
    else:
        results = [job(index) for index in tqdm(indices, desc="pairs", disable=not progress)]
    trials = pd.concat([frame for frame, _ in results], ignore_index=True)
    logger.info("gridworld: %d pairs, %d trial rows", n_pairs, len(trials))
    return ExperimentResult(trials, aggregate_curves(trials), [layout for _, layout in results])
