# app/core/rng.py
import hashlib
from typing import Union

import numpy as np

Key = Union[str, int]


def _key_to_int(key: Key) -> int:
    if isinstance(key, int):
        return key
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *keys: Key) -> int:
    """
    Deterministic 64-bit sub-seed for a named stage / replicate / realization.
    The mapping depends only on (seed, keys), never on scheduling.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key_to_int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def generator(seed: int, *keys: Key) -> np.random.Generator:
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.default_rng(seed)
