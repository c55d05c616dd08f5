"""Counter-based random streams.

All randomness flows through numpy ``Generator(Philox)`` instances. A
stream is addressed by ``(master_seed, stream)``; the 128-bit Philox key is
``(stream << 64) | master_seed``, so distinct stream numbers never share a
key and no OS entropy is involved.

Stream numbering used by the experiments:

- toy inits of scenario ``i``: stream ``TOY_INITS + i``
- high-dimensional study: ``HIGHDIM + index of (kind, d, sigma)``
- gridworld pair ``p``: ``grid_stream(p, role)`` where role is
  ``ROLE_ENV``, ``ROLE_TEACHER``, ``ROLE_REFERENCE`` or ``ROLE_TRIAL + method``
- MNIST run with seed ``s``: the run's own master seed ``s``, stream
  ``MNIST_INIT`` for weights, ``MNIST_ORDER`` for data order and
  ``MNIST_AUX_ORDER`` for an independent auxiliary order
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1

TOY_INITS = 1
HIGHDIM = 1_000
MNIST_INIT = 10
MNIST_ORDER = 11
MNIST_AUX_ORDER = 12

ROLE_ENV = 0
ROLE_TEACHER = 1
ROLE_REFERENCE = 2
ROLE_TRIAL = 16
_ROLES_PER_PAIR = 256
_GRID_BASE = 1 << 32


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Create the generator for one stream of a master seed.

    Args:
        seed: Master seed in ``[0, 2**64)``.
        stream: Stream number in ``[0, 2**64)``.

    Returns:
        A Philox-backed numpy generator.
    """
    if not 0 <= seed <= MAX_SEED:
        msg = f"seed must be in [0, 2**64), got {seed}"
        raise ValueError(msg)
    if not 0 <= stream <= MAX_SEED:
        msg = f"stream must be in [0, 2**64), got {stream}"
        raise ValueError(msg)
    return np.random.Generator(np.random.Philox(key=(stream << 64) | seed))


def grid_stream(pair_index: int, role: int) -> int:
    """Stream number for one role of one gridworld environment pair."""
    if not 0 <= role < _ROLES_PER_PAIR:
        msg = f"role must be in [0, {_ROLES_PER_PAIR}), got {role}"
        raise ValueError(msg)
    return _GRID_BASE + pair_index * _ROLES_PER_PAIR + role
