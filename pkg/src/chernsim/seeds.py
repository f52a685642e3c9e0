"""Deterministic seed derivation for parallel tasks."""

from __future__ import annotations

import numpy as np


def derive_seed(master: int, *keys: int) -> int:
    """Stable 64-bit seed for task ``keys`` under ``master``.

    Independent of worker count and execution order.
    """
    ss = np.random.SeedSequence(entropy=int(master) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
