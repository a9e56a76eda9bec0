"""
Counter-based random streams keyed per (scenario, block, replicate)
"""

import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_word(key: Key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & 0xFFFFFFFFFFFFFFFF


def keyed_rng(seed: int, *keys: Key) -> np.random.Generator:
    """
    Philox generator whose stream depends only on the seed and the keys.

    Args:
        seed: Experiment seed
        keys: Scenario name, block index, replicate number, ...

    Returns:
        Independent numpy Generator
    """
    entropy = [_key_word(seed)] + [_key_word(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=state))
