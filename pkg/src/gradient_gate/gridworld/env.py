"""Procedurally generated gridworlds with noisy, killable transitions.

States are absolute positions, indexed ``row * width + col``. Actions are
``0=up, 1=down, 2=left, 3=right``. Moving into a wall or off the grid
leaves the agent in place with reward 0.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import Any, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from ..errors import GenerationError, TerminalStateError

logger = logging.getLogger(__name__)

N_ACTIONS = 4
ACTION_NAMES = ("up", "down", "left", "right")
_MOVES = np.array([(-1, 0), (1, 0), (0, -1), (0, 1)])

Cell = tuple[int, int]


class RewardCell(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    row: int = Field(ge=0)
    col: int = Field(ge=0)
    reward: float
    terminal: bool = False


class TransitionTable(NamedTuple):
    """Deterministic part of the dynamics, one row per state and column per action."""

    next_state: np.ndarray
    reward: np.ndarray
    done: np.ndarray


class GridSpec(BaseModel):
    """One gridworld layout together with its transition noise and kill probability."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    width: int = Field(15, ge=1)
    height: int = Field(15, ge=1)
    walls: tuple[Cell, ...] = ()
    cells: tuple[RewardCell, ...] = ()
    start: Cell
    seed: int | None = None
    noise: float = Field(0.1, ge=0.0, le=1.0)
    kill: float = Field(0.01, ge=0.0, le=1.0)

    _wall: np.ndarray = PrivateAttr()
    _reward: np.ndarray = PrivateAttr()
    _terminal: np.ndarray = PrivateAttr()
    _table: TransitionTable = PrivateAttr()

    @model_validator(mode="after")
    def _check_layout(self) -> GridSpec:
        for row, col in (*self.walls, self.start, *((c.row, c.col) for c in self.cells)):
            if not self._inside(row, col):
                msg = f"cell ({row}, {col}) is outside the {self.height}x{self.width} grid"
                raise ValueError(msg)
        wall, reward, terminal = self._arrays()
        for cell in self.cells:
            if wall[cell.row, cell.col]:
                msg = f"reward cell ({cell.row}, {cell.col}) is a wall"
                raise ValueError(msg)
        if wall[self.start]:
            msg = f"start {self.start} is a wall"
            raise ValueError(msg)
        if terminal[self.start]:
            msg = f"start {self.start} is terminal"
            raise ValueError(msg)
        if not np.any(reachable(wall, terminal, self.start) & (reward > 0.0)):
            msg = "no positive reward is reachable from the start cell"
            raise ValueError(msg)
        return self

    def model_post_init(self, __context: Any) -> None:
        self._wall, self._reward, self._terminal = self._arrays()
        self._table = _build_table(self._wall, self._reward, self._terminal)

    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        shape = (self.height, self.width)
        wall = np.zeros(shape, dtype=bool)
        for row, col in self.walls:
            if self._inside(row, col):
                wall[row, col] = True
        reward = np.zeros(shape)
        terminal = np.zeros(shape, dtype=bool)
        for cell in self.cells:
            if self._inside(cell.row, cell.col):
                reward[cell.row, cell.col] = cell.reward
                terminal[cell.row, cell.col] = cell.terminal
        return wall, reward, terminal

    def _inside(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    @property
    def n_states(self) -> int:
        return self.width * self.height

    @property
    def start_state(self) -> int:
        return self.state_of(self.start)

    @property
    def wall_mask(self) -> np.ndarray:
        return self._wall

    @property
    def reward_grid(self) -> np.ndarray:
        return self._reward

    @property
    def terminal_mask(self) -> np.ndarray:
        return self._terminal

    @property
    def table(self) -> TransitionTable:
        return self._table

    def state_of(self, cell: Cell) -> int:
        return cell[0] * self.width + cell[1]

    def cell_of(self, state: int) -> Cell:
        return divmod(int(state), self.width)

    def is_terminal(self, state: int) -> bool:
        return bool(self._terminal.reshape(-1)[state])

    def with_dynamics(self, noise: float | None = None, kill: float | None = None) -> GridSpec:
        """Same layout with different noise or kill probability."""
        data = self.model_dump()
        if noise is not None:
            data["noise"] = noise
        if kill is not None:
            data["kill"] = kill
        return GridSpec.model_validate(data)

    def to_layout(self) -> dict[str, Any]:
        """JSON-ready layout, including an ASCII rendering under ``rows``."""
        layout = self.model_dump(mode="json")
        layout["rows"] = self.render()
        return layout

    @classmethod
    def from_layout(cls, layout: dict[str, Any]) -> GridSpec:
        data = {key: value for key, value in layout.items() if key != "rows"}
        return cls.model_validate(data)

    def render(self) -> list[str]:
        """One string per row: ``#`` wall, ``S`` start, ``+``/``-`` terminal rewards, ``p``/``n`` others."""
        rows = []
        for r in range(self.height):
            chars = []
            for c in range(self.width):
                value = self._reward[r, c]
                if self._wall[r, c]:
                    chars.append("#")
                elif (r, c) == tuple(self.start):
                    chars.append("S")
                elif value > 0:
                    chars.append("+" if self._terminal[r, c] else "p")
                elif value < 0:
                    chars.append("-" if self._terminal[r, c] else "n")
                elif self._terminal[r, c]:
                    chars.append("x")
                else:
                    chars.append(".")
            rows.append("".join(chars))
        return rows


def reachable(wall: np.ndarray, terminal: np.ndarray, start: Cell) -> np.ndarray:
    """Flood fill from ``start``; terminal cells are reached but not expanded."""
    height, width = wall.shape
    seen = np.zeros_like(wall)
    seen[start] = True
    queue = deque([tuple(start)])
    while queue:
        row, col = queue.popleft()
        if terminal[row, col]:
            continue
        for d_row, d_col in _MOVES:
            nxt = (row + d_row, col + d_col)
            if 0 <= nxt[0] < height and 0 <= nxt[1] < width and not wall[nxt] and not seen[nxt]:
                seen[nxt] = True
                queue.append(nxt)
    return seen


def _build_table(wall: np.ndarray, reward: np.ndarray, terminal: np.ndarray) -> TransitionTable:
    height, width = wall.shape
    rows, cols = np.divmod(np.arange(height * width), width)
    next_state = np.empty((height * width, N_ACTIONS), dtype=np.int64)
    rewards = np.zeros((height * width, N_ACTIONS))
    done = np.zeros((height * width, N_ACTIONS), dtype=bool)
    for action, (d_row, d_col) in enumerate(_MOVES):
        new_rows, new_cols = rows + d_row, cols + d_col
        inside = (new_rows >= 0) & (new_rows < height) & (new_cols >= 0) & (new_cols < width)
        clipped_rows = np.clip(new_rows, 0, height - 1)
        clipped_cols = np.clip(new_cols, 0, width - 1)
        moved = inside & ~wall[clipped_rows, clipped_cols]
        landed = np.where(moved, clipped_rows * width + clipped_cols, rows * width + cols)
        next_state[:, action] = landed
        rewards[:, action] = np.where(moved, reward.reshape(-1)[landed], 0.0)
        done[:, action] = moved & terminal.reshape(-1)[landed]
    return TransitionTable(next_state, rewards, done)


class GridConfig(BaseModel):
    """Generator settings for :func:`sample_env`."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    width: int = Field(15, ge=3)
    height: int = Field(15, ge=3)
    wall_prob: float = Field(0.15, ge=0.0, lt=1.0)
    small_reward: float = Field(5.0, gt=0.0)
    n_small: int = Field(2, ge=1)
    big_reward: float = Field(10.0, gt=0.0)
    n_big: int = Field(2, ge=0)
    negative_terminal_reward: float = Field(-5.0, lt=0.0)
    n_negative_terminal: int = Field(2, ge=0)
    negative_step_reward: float = Field(-1.0, lt=0.0)
    n_negative_step: int = Field(2, ge=0)
    noise: float = Field(0.1, ge=0.0, le=1.0)
    kill: float = Field(0.01, ge=0.0, le=1.0)
    max_retries: int = Field(100, ge=1)

    @property
    def n_special(self) -> int:
        return self.n_small + self.n_big + self.n_negative_terminal + self.n_negative_step


def sample_env(rng: np.random.Generator, config: GridConfig | None = None, seed: int | None = None) -> GridSpec:
    """
    Generate an auxiliary-task gridworld.

    Walls are placed independently per cell, then the reward cells and the
    start are drawn without replacement from the free cells. A layout is
    accepted once a small (non-removable) positive reward is reachable from
    the start, so the derived main environment is valid too.

    Args:
        rng: Source of randomness.
        config: Generator settings.
        seed: Recorded on the returned spec for reference.

    Raises:
        GenerationError: If no valid layout is found within ``max_retries`` attempts.
    """
    config = config or GridConfig()
    shape = (config.height, config.width)
    kinds = (
        [(config.small_reward, True)] * config.n_small
        + [(config.big_reward, True)] * config.n_big
        + [(config.negative_terminal_reward, True)] * config.n_negative_terminal
        + [(config.negative_step_reward, False)] * config.n_negative_step
    )
    for attempt in range(1, config.max_retries + 1):
        wall = rng.random(shape) < config.wall_prob
        free = np.flatnonzero(~wall.reshape(-1))
        if free.size < config.n_special + 1:
            continue
        chosen = rng.choice(free, size=config.n_special + 1, replace=False)
        start = divmod(int(chosen[-1]), config.width)
        small_reward = np.zeros(shape)
        terminal = np.zeros(shape, dtype=bool)
        cells = []
        for flat, (value, is_terminal) in zip(chosen[:-1], kinds):
            row, col = divmod(int(flat), config.width)
            cells.append(RewardCell(row=row, col=col, reward=value, terminal=is_terminal))
            terminal[row, col] = is_terminal
            if value == config.small_reward:
                small_reward[row, col] = value
        if not np.any(reachable(wall, terminal, start) & (small_reward > 0.0)):
            logger.debug("gridworld attempt %d rejected: no reachable positive reward", attempt)
            continue
        walls = tuple(divmod(int(flat), config.width) for flat in np.flatnonzero(wall.reshape(-1)))
        return GridSpec(
            width=config.width,
            height=config.height,
            walls=walls,
            cells=tuple(cells),
            start=start,
            seed=seed,
            noise=config.noise,
            kill=config.kill,
        )
    msg = f"no valid gridworld after {config.max_retries} attempts"
    raise GenerationError(msg)


def derive_main(aux: GridSpec, removed_reward: float = 10.0) -> GridSpec:
    """Main-task copy of ``aux``: cells worth ``removed_reward`` become empty and non-terminating."""
    cells = tuple(cell for cell in aux.cells if cell.reward != removed_reward)
    return GridSpec.model_validate({**aux.model_dump(), "cells": [c.model_dump() for c in cells]})


class EnvPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    aux_env: GridSpec
    main_env: GridSpec

    @classmethod
    def sample(cls, rng: np.random.Generator, config: GridConfig | None = None, seed: int | None = None) -> EnvPair:
        config = config or GridConfig()
        aux = sample_env(rng, config, seed)
        return cls(aux_env=aux, main_env=derive_main(aux, config.big_reward))


def resolve_action(action: int, rng: np.random.Generator, noise: float) -> int:
    """Executed action: with probability ``noise`` redrawn uniformly from all four actions."""
    if rng.random() < noise:
        return int(rng.integers(N_ACTIONS))
    return int(action)


def env_step(env: GridSpec, state: int, action: int, rng: np.random.Generator) -> tuple[int, float, bool]:
    """
    Advance one transition.

    The commanded action is subject to transition noise; then, independently,
    with probability ``env.kill`` the transition ends the episode with reward 0.

    Raises:
        TerminalStateError: If ``state`` is terminal.
        ValueError: If ``state`` or ``action`` is out of range or ``state`` is a wall.
    """
    if not 0 <= state < env.n_states:
        msg = f"state {state} is outside [0, {env.n_states})"
        raise ValueError(msg)
    if not 0 <= action < N_ACTIONS:
        msg = f"action {action} is outside [0, {N_ACTIONS})"
        raise ValueError(msg)
    if env.wall_mask.reshape(-1)[state]:
        msg = f"state {state} is a wall"
        raise ValueError(msg)
    if env.is_terminal(state):
        msg = f"cannot step from terminal state {state}"
        raise TerminalStateError(msg)
    executed = resolve_action(action, rng, env.noise)
    table = env.table
    next_state = int(table.next_state[state, executed])
    if rng.random() < env.kill:
        return next_state, 0.0, True
    return next_state, float(table.reward[state, executed]), bool(table.done[state, executed])
