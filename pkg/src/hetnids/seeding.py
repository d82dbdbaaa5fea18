"""Seed derivation.

Every random draw in a run is keyed by ``(base_seed, *keys)`` through
``numpy.random.SeedSequence``, so any stage (a split, a minibatch order, a
dropout mask) can be reproduced on its own. String keys are folded to
integers with CRC-32.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key) & 0xFFFFFFFF


def derive_seed(base: int, *keys) -> int:
    """A 32-bit seed that depends only on ``base`` and ``keys``."""
    seq = np.random.SeedSequence([_as_int(base), *(_as_int(k) for k in keys)])
    return int(seq.generate_state(1)[0])


def rng_for(base: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *keys))
