"""Deterministic splittable random streams.

Every stochastic routine in the package takes an integer seed plus a key
path (e.g. ``("rep", 3, "step", 17)``) and derives an independent
counter-based generator from it.  Runs are therefore reproducible and
replications/steps can be evaluated in any order or in parallel.
"""

from __future__ import annotations

import zlib

import numpy as np


def _encode(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"stream key parts must be int or str, got {type(part)!r}")


def stream(seed: int, *path) -> np.random.Generator:
    """Return an independent Philox generator for (seed, *path).

    The same (seed, path) always yields the same generator state;
    distinct paths yield statistically independent streams.
    """
    key = tuple(_encode(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
