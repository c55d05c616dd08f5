"""Q-learning teacher and tabular softmax student."""

from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core import ParamVector
from ..errors import NonFiniteError, TeacherLookupError
from .env import N_ACTIONS, GridSpec

logger = logging.getLogger(__name__)


def softmax_rows(values: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    shifted = values - np.max(values, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


class QTable:
    """State-action values of shape ``(n_states, 4)`` plus the mask of states the table covers."""

    def __init__(self, values: np.ndarray, known: np.ndarray | None = None):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != N_ACTIONS:
            msg = f"Q-table must have shape (n_states, {N_ACTIONS}), got {values.shape}"
            raise ValueError(msg)
        if not np.all(np.isfinite(values)):
            msg = "Q-table values must be finite"
            raise NonFiniteError(msg)
        self.values = values
        self.known = np.ones(values.shape[0], dtype=bool) if known is None else np.asarray(known, dtype=bool)

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    def greedy(self) -> np.ndarray:
        """Greedy action per state; ties go to the lowest action index."""
        return np.argmax(self.values, axis=1)

    def __getitem__(self, key):
        return self.values[key]


class QLearningConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr: float = Field(0.1, gt=0.0, le=1.0)
    gamma: float = Field(0.95, ge=0.0, lt=1.0)
    transitions: int = Field(50_000, ge=1)


def q_learning(env: GridSpec, config: QLearningConfig | None, rng: np.random.Generator) -> QTable:
    """
    Tabular Q-learning with a uniform-random behaviour policy.

    Episodes restart from the start cell whenever a transition ends the
    episode; the noise and kill draws follow :func:`env_step`.

    Args:
        env: Environment to learn.
        config: Learning rate, discount and number of transitions.
        rng: Source of behaviour actions and environment noise.

    Returns:
        The learned table, covering every non-wall state.
    """
    config = config or QLearningConfig()
    table = env.table
    q = np.zeros((env.n_states, N_ACTIONS))
    n = config.transitions
    commanded = rng.integers(N_ACTIONS, size=n)
    noisy = rng.random(n) < env.noise
    redrawn = rng.integers(N_ACTIONS, size=n)
    killed = rng.random(n) < env.kill
    executed = np.where(noisy, redrawn, commanded)

    state = env.start_state
    episodes = 0
    for t in range(n):
        action = commanded[t]
        move = executed[t]
        next_state = table.next_state[state, move]
        if killed[t]:
            reward, done = 0.0, True
        else:
            reward, done = table.reward[state, move], table.done[state, move]
        target = reward if done else reward + config.gamma * q[next_state].max()
        q[state, action] += config.lr * (target - q[state, action])
        if done:
            state = env.start_state
            episodes += 1
        else:
            state = next_state
    logger.debug("q-learning finished: %d transitions, %d episodes", n, episodes)
    return QTable(q, known=~env.wall_mask.reshape(-1))


class TeacherPolicy:
    """Action distribution per state derived from a Q-table."""

    def __init__(self, probs: np.ndarray, known: np.ndarray, temperature: float):
        self.probs = probs
        self.known = known
        self.temperature = temperature

    def __call__(self, state: int) -> np.ndarray:
        return self.rows(np.asarray([state]))[0]

    def rows(self, states: np.ndarray) -> np.ndarray:
        """Distributions for a batch of states.

        Raises:
            TeacherLookupError: If any state is outside the teacher's table.
        """
        states = np.asarray(states, dtype=np.int64)
        bad = (states < 0) | (states >= self.probs.shape[0])
        bad[~bad] = ~self.known[states[~bad]]
        if np.any(bad):
            msg = f"teacher has no distribution for state(s) {sorted(set(states[bad].tolist()))}"
            raise TeacherLookupError(msg)
        return self.probs[states]


def teacher_policy(q: QTable, temperature: float) -> TeacherPolicy:
    """
    Teacher distribution from Q-values.

    Args:
        q: Learned Q-table.
        temperature: 0 gives the greedy one-hot policy (lowest action index
            wins ties); positive values give ``softmax(Q / temperature)``.

    Raises:
        ValueError: If the temperature is negative or not finite.
    """
    if not (np.isfinite(temperature) and temperature >= 0.0):
        msg = f"temperature must be finite and >= 0, got {temperature}"
        raise ValueError(msg)
    if temperature == 0.0:
        probs = np.zeros_like(q.values)
        probs[np.arange(q.n_states), q.greedy()] = 1.0
    else:
        probs = softmax_rows(q.values / temperature)
    return TeacherPolicy(probs, q.known.copy(), temperature)


class SoftmaxPolicy:
    """Tabular softmax policy with a per-state value baseline.

    ``logits`` has shape ``(n_states, 4)`` and ``baseline`` shape ``(n_states,)``;
    both start at zero and are updated in place by the trainer.
    """

    def __init__(self, n_states: int):
        self.logits = np.zeros((n_states, N_ACTIONS))
        self.baseline = np.zeros(n_states)

    @property
    def n_states(self) -> int:
        return self.logits.shape[0]

    def probs(self, states: np.ndarray | None = None) -> np.ndarray:
        logits = self.logits if states is None else self.logits[states]
        return softmax_rows(logits)

    def sample(self, state: int, rng: np.random.Generator) -> int:
        cumulative = np.cumsum(self.probs(np.asarray([state]))[0])
        return int(min(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"), N_ACTIONS - 1))

    def parameters(self) -> ParamVector:
        """Flat logits, row-major over ``(state, action)``."""
        return ParamVector(self.logits)

    def apply(self, update: ParamVector | np.ndarray, alpha: float) -> None:
        """Ascend: ``logits += alpha * update``."""
        delta = np.asarray(update, dtype=np.float64).reshape(self.logits.shape)
        self.logits += alpha * delta
