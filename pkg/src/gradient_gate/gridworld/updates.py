"""Episodes, the REINFORCE estimator with baseline, and the distillation gradient.

Both gradients are ascent directions over the flat logits
``(n_states * 4,)``: the trainer applies ``logits += alpha * update``.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core import ParamVector
from .agents import SoftmaxPolicy, TeacherPolicy
from .env import N_ACTIONS, GridSpec, resolve_action

logger = logging.getLogger(__name__)


class Episode(BaseModel):
    """Visited states, taken (commanded) actions and received rewards."""

    model_config = ConfigDict(frozen=True)

    states: tuple[int, ...]
    actions: tuple[int, ...]
    rewards: tuple[float, ...]
    terminated: bool = Field(True, description="False when the episode was cut by the step budget")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def rollout(
    policy: SoftmaxPolicy,
    env: GridSpec,
    rng: np.random.Generator,
    max_steps: int | None = None,
) -> Episode:
    """
    Sample one episode from the start cell.

    Args:
        policy: Behaviour policy.
        env: Environment to act in.
        rng: Source of actions and environment noise.
        max_steps: Optional cut-off; a cut episode has ``terminated=False``.
    """
    table = env.table
    state = env.start_state
    states, actions, rewards = [], [], []
    done = False
    while not done and (max_steps is None or len(states) < max_steps):
        action = policy.sample(state, rng)
        executed = resolve_action(action, rng, env.noise)
        next_state = int(table.next_state[state, executed])
        if rng.random() < env.kill:
            reward, done = 0.0, True
        else:
            reward, done = float(table.reward[state, executed]), bool(table.done[state, executed])
        states.append(state)
        actions.append(action)
        rewards.append(reward)
        state = next_state
    return Episode(states=tuple(states), actions=tuple(actions), rewards=tuple(rewards), terminated=done)


def episode_returns(rewards: np.ndarray, gamma: float, discounted: bool = True) -> np.ndarray:
    """Reward-to-go per timestep, ``sum_k gamma^k r_{t+k}`` or the plain sum."""
    factor = gamma if discounted else 1.0
    returns = np.zeros(len(rewards))
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + factor * running
        returns[t] = running
    return returns


class PolicyGradient(NamedTuple):
    gradient: ParamVector
    baseline_delta: np.ndarray
    returns: np.ndarray


def _score_rows(policy: SoftmaxPolicy, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """``d log pi(a_t|s_t) / d logits[s_t]`` per timestep."""
    rows = -policy.probs(states)
    rows[np.arange(len(states)), actions] += 1.0
    return rows


def _scatter(rows: np.ndarray, states: np.ndarray, n_states: int) -> ParamVector:
    flat = np.zeros((n_states, N_ACTIONS))
    np.add.at(flat, states, rows)
    return ParamVector(flat)


def pg_update(
    policy: SoftmaxPolicy,
    episode: Episode,
    gamma: float = 0.95,
    alpha: float = 0.01,
    discounted: bool = True,
) -> PolicyGradient:
    """
    REINFORCE gradient with a per-state baseline.

    The policy gradient is ``sum_t grad log pi(a_t|s_t) * (R_t - B_{s_t})``
    with baselines read before any update. The baseline delta is the
    gradient step on ``(R_t - B_{s_t})^2``, i.e. ``2 * alpha * (R_t - B_{s_t})``
    accumulated per visit; the caller adds it to ``policy.baseline``.

    Args:
        policy: Current student.
        episode: A non-empty episode sampled from ``policy``.
        gamma: Discount of the reward-to-go.
        alpha: Baseline learning rate.
        discounted: Use ``sum gamma^k r`` (True) or the plain reward sum.

    Returns:
        Gradient over all logits (zero outside visited states), baseline
        delta and the per-step returns.

    Raises:
        ValueError: If the episode is empty.
    """
    if len(episode) == 0:
        msg = "pg_update needs a non-empty episode"
        raise ValueError(msg)
    states = np.asarray(episode.states, dtype=np.int64)
    actions = np.asarray(episode.actions, dtype=np.int64)
    returns = episode_returns(np.asarray(episode.rewards), gamma, discounted)
    advantage = returns - policy.baseline[states]
    gradient = _scatter(_score_rows(policy, states, actions) * advantage[:, None], states, policy.n_states)
    baseline_delta = np.zeros(policy.n_states)
    np.add.at(baseline_delta, states, 2.0 * alpha * advantage)
    return PolicyGradient(gradient, baseline_delta, returns)


def distill_gradient(policy: SoftmaxPolicy, teacher: TeacherPolicy, episode: Episode) -> ParamVector:
    """
    Ascent direction on teacher agreement at the visited states.

    ``V = sum_t sum_a pi_T(a|s_t) grad log pi(a|s_t)``, which for a softmax
    policy is ``pi_T(.|s_t) - pi(.|s_t)`` on row ``s_t``: the negative
    gradient of the summed cross-entropy ``H(pi_T || pi)``.

    Raises:
        TeacherLookupError: If the teacher does not cover a visited state.
    """
    states = np.asarray(episode.states, dtype=np.int64)
    rows = teacher.rows(states) - policy.probs(states)
    return _scatter(rows, states, policy.n_states)


def surrogate_objective(policy: SoftmaxPolicy, episode: Episode, advantage: np.ndarray) -> float:
    """``sum_t log pi(a_t|s_t) * advantage_t``; its logit gradient is the policy gradient."""
    states = np.asarray(episode.states, dtype=np.int64)
    probs = policy.probs(states)
    picked = probs[np.arange(len(states)), np.asarray(episode.actions, dtype=np.int64)]
    return float(np.sum(np.log(picked) * advantage))


def cross_entropy(policy: SoftmaxPolicy, teacher: TeacherPolicy, episode: Episode) -> float:
    """``sum_t H(pi_T(.|s_t) || pi(.|s_t))`` over the visited states."""
    states = np.asarray(episode.states, dtype=np.int64)
    logits = policy.logits[states]
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    return float(-np.sum(teacher.rows(states) * log_probs))
