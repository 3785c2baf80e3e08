"""Deterministic named seed streams.

Every stochastic component takes an integer seed and derives independent
substreams by name, so reruns are bit-identical and parallel execution
cannot change results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _component(part) -> int:
    if isinstance(part, (bool, int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def substream(seed: int, *path) -> np.random.Generator:
    """Return the generator for the named stream (seed, *path)."""
    entropy = [_component(seed)] + [_component(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def child_seed(seed: int, *path) -> int:
    """Stable integer seed derived from (seed, *path), for handing to sub-APIs."""
    entropy = [_component(seed)] + [_component(p) for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
