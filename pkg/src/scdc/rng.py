"""Named, splittable random streams.

Every consumer of randomness asks for a substream keyed by a purpose tag and
integer indices, so draws never depend on call order elsewhere in the program.
"""
from __future__ import annotations

import zlib

import numpy as np


def _tag_word(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


class RngStreams:
    """Deterministic generator factory keyed by ``(seed, tag, *index)``."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)

    def stream(self, tag: str, *index: int) -> np.random.Generator:
        words = [self.seed, _tag_word(tag), *[int(i) for i in index]]
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))

    def __repr__(self) -> str:
        return f"RngStreams(seed={self.seed})"


def seed_rng(seed: int) -> RngStreams:
    return RngStreams(seed)
