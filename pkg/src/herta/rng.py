"""Deterministic random streams.

One master seed fans out into independent named substreams so that, e.g., the
sparsifier and the row-sampling stage cannot perturb each other's draws when
one of them changes how much randomness it consumes. Streams are Philox
(counter-based), so substream derivation is stable across platforms.
"""

from __future__ import annotations

import zlib

import numpy as np


class RngHandle:
    """A master seed plus labeled, independent substreams."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def generator(self) -> np.random.Generator:
        """The root stream."""
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed)))

    def child(self, label: str) -> np.random.Generator:
        """An independent stream keyed by `label`.

        The same (seed, label) pair always yields the same stream; distinct
        labels yield statistically independent streams. Labels are hashed with
        crc32 (stable, unlike Python's salted hash()).
        """
        key = zlib.crc32(label.encode("utf-8"))
        seq = np.random.SeedSequence(self.seed, spawn_key=(key,))
        return np.random.Generator(np.random.Philox(seq))
