"""Seed derivation: one root seed, named and indexed sub-streams."""
import zlib

import numpy as np


def derive_rng(seed, *key):
    """Return a Generator for the sub-stream ``(seed, *key)``.

    String key parts are hashed with CRC32 so the mapping is stable across
    interpreter runs (unlike ``hash``).
    """
    spawn_key = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.default_rng(ss)


def as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
