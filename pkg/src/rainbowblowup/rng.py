"""Labelled splitting of a single top-level seed into independent streams."""
from __future__ import annotations

import zlib

import numpy as np

SeedLike = int | np.random.Generator | np.random.SeedSequence | None


def _label_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode())


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive(seed: SeedLike, *labels) -> np.random.Generator:
    """Child generator for the stream named by ``labels``.

    The same (seed, labels) always gives the same stream; different labels
    give statistically independent ones.  A Generator argument is consumed
    (one draw) to obtain the base entropy.
    """
    if isinstance(seed, np.random.Generator):
        base = int(seed.integers(2**63))
    elif isinstance(seed, np.random.SeedSequence):
        base = int(seed.generate_state(2, np.uint64)[0])
    elif seed is None:
        base = int(np.random.SeedSequence().entropy) & ((1 << 63) - 1)
    else:
        base = int(seed)
    ss = np.random.SeedSequence(entropy=base, spawn_key=tuple(_label_int(x) for x in labels))
    return np.random.default_rng(ss)
