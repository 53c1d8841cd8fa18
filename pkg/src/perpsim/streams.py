"""Reproducible random streams.

A :class:`RandomStream` names one member of a family of statistically
independent generators keyed by ``(seed, stream_index)``.  Identical keys
reproduce identical draws; distinct stream indices never share state, so
parallel workers can each own one stream without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RandomStream:
    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_index])

    def substream(self, index: int) -> "RandomStream":
        """Derive a child stream; children of distinct indices are independent."""
        return RandomStream(self.seed, self.stream_index * 1_000_003 + index + 1)
