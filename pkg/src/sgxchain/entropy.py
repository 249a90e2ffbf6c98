"""Single source of randomness: seeded for reproducible runs, OS entropy otherwise."""

from __future__ import annotations

import random
from typing import Optional, Union

Rng = Union[random.Random, random.SystemRandom]


def make_rng(seed: Optional[int] = None) -> Rng:
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)


def child_rng(rng: Rng) -> Rng:
    """Independent stream derived from ``rng`` (for per-run isolation)."""
    if isinstance(rng, random.SystemRandom):
        return random.SystemRandom()
    return random.Random(rng.getrandbits(64))
