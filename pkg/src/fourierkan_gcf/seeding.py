"""Deterministic derivation of child seeds from a base seed and labels."""

from __future__ import annotations

import zlib
from typing import Sequence

import numpy as np

SeedLike = int | Sequence[int] | None


def derive(seed: SeedLike, *keys: int | str) -> list[int]:
    """Entropy list for ``np.random.default_rng`` unique to (seed, keys)."""
    base = [] if seed is None else ([int(seed)] if np.isscalar(seed) else [int(s) for s in seed])
    tail = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys]
    return base + tail


def rng(seed: SeedLike, *keys: int | str) -> np.random.Generator:
    return np.random.default_rng(derive(seed, *keys))
