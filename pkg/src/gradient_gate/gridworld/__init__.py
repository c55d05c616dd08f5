"""Gridworld transfer: Q-learning teacher, softmax student and gated distillation."""

from .agents import QLearningConfig, QTable, SoftmaxPolicy, TeacherPolicy, q_learning, softmax_rows, teacher_policy
from .env import (
    ACTION_NAMES,
    N_ACTIONS,
    EnvPair,
    GridConfig,
    GridSpec,
    RewardCell,
    TransitionTable,
    derive_main,
    env_step,
    reachable,
    resolve_action,
    sample_env,
)
from .training import (
    DEFAULT_METHODS,
    DEFAULT_TEMPERATURES,
    RANDOM_LINE,
    TEACHER_LINE,
    ExperimentResult,
    TrainConfig,
    TrainMethod,
    aggregate_curves,
    evaluate_policy,
    run_experiment,
    run_pair,
    train,
)
from .updates import (
    Episode,
    PolicyGradient,
    cross_entropy,
    distill_gradient,
    episode_returns,
    pg_update,
    rollout,
    surrogate_objective,
)

__all__ = [
    "ACTION_NAMES",
    "DEFAULT_METHODS",
    "DEFAULT_TEMPERATURES",
    "N_ACTIONS",
    "RANDOM_LINE",
    "TEACHER_LINE",
    "EnvPair",
    "Episode",
    "ExperimentResult",
    "GridConfig",
    "GridSpec",
    "PolicyGradient",
    "QLearningConfig",
    "QTable",
    "RewardCell",
    "SoftmaxPolicy",
    "TeacherPolicy",
    "TrainConfig",
    "TrainMethod",
    "TransitionTable",
    "aggregate_curves",
    "cross_entropy",
    "derive_main",
    "distill_gradient",
    "env_step",
    "episode_returns",
    "evaluate_policy",
    "pg_update",
    "q_learning",
    "reachable",
    "resolve_action",
    "rollout",
    "run_experiment",
    "run_pair",
    "sample_env",
    "softmax_rows",
    "surrogate_objective",
    "teacher_policy",
    "train",
]
