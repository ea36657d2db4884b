# src/core/rng.py
import hashlib
import logging
from typing import Union

import numpy as np

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


def stream_id(name: Union[str, int]) -> int:
    """Stable 64-bit stream id for a name (independent of PYTHONHASHSEED)"""
    if isinstance(name, (int, np.integer)):
        return int(name) & _MASK64
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class SeededRng:
    """
    Counter-based generator family on top of numpy's Philox.

    A draw is addressed by (seed, stream, counter): the key packs seed and
    stream, the step counter sits in the high counter words so that draws at
    different steps never overlap.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK64

    def generator(self, stream: Union[str, int] = 0, counter: int = 0) -> np.random.Generator:
        key = (self.seed << 64) | stream_id(stream)
        bit_gen = np.random.Philox(key=key, counter=int(counter) << 128)
        return np.random.Generator(bit_gen)

    def spawn(self, stream: Union[str, int]) -> "SeededRng":
        """Child family whose seed is derived from this one and a stream name"""
        return SeededRng(int(self.generator(stream).integers(0, 2**63)))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"
