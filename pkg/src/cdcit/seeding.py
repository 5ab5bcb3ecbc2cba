"""Keyed RNG streams.

Every stochastic function in this package takes a ``seed`` that is either
a single int or a sequence of ints. Sub-tasks extend the key with further
integer parts, e.g. the stream for null draw i of repetition b is keyed
(seed, 1, b, i). Streams keyed this way do not depend on how work is
scheduled across workers, so results are invariant to the worker count.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

Seed = Union[int, Sequence[int]]


def seed_key(seed: Seed, *parts: int) -> list[int]:
    """Flatten a seed and extra integer parts into a numpy entropy key."""
    if isinstance(seed, (int, np.integer)):
        key = [int(seed)]
    else:
        key = [int(s) for s in seed]
    key.extend(int(p) for p in parts)
    return key


def rng_for(seed: Seed, *parts: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *parts)."""
    return np.random.default_rng(seed_key(seed, *parts))
