"""Named random streams derived from one experiment seed.

Every random decision in the package draws from a generator obtained here,
so a component (train/test split, slice trees, k-means++ seeding, projection
directions) can be varied without disturbing the others.
"""

import zlib
from typing import Union

import numpy as np

StreamKey = Union[str, int]

STREAM_SPLIT = "split"
STREAM_SLICE = "slice"
STREAM_INIT = "init"
STREAM_PROJECTION = "projection"
STREAM_MEASURE = "measure"
STREAM_BENCH = "bench"


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, str):
        # crc32 is stable across processes, unlike hash()
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"stream index must be non-negative, got {key}")
    return int(key)


def derive_seed_sequence(seed: int, *stream: StreamKey) -> np.random.SeedSequence:
    """Return the SeedSequence for ``stream`` under the root ``seed``."""
    return np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(_key_to_int(k) for k in stream)
    )


def derive_rng(seed: int, *stream: StreamKey) -> np.random.Generator:
    """Return an independent generator for the named stream.

    Example:
        rng = derive_rng(7, "slice", 3, "measure", 0)
    """
    return np.random.default_rng(derive_seed_sequence(seed, *stream))


def derive_int_seed(seed: int, *stream: StreamKey) -> int:
    """Return a 63-bit integer seed for the named stream."""
    state = derive_seed_sequence(seed, *stream).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
