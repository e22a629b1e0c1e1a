"""
Reproducible random streams.

Every stream is a Philox generator keyed by (seed, tag, index) through
numpy's SeedSequence spawn keys, so the draws for a given column, block or
trial chunk never depend on how many workers produced them.
"""

from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

# Domain tags keep unrelated consumers of one seed apart.
TAG_SAMPLE = 0
TAG_BALL = 1
TAG_TRIAL = 2
TAG_NET = 3
TAG_CALIBRATION = 4
TAG_PAIRS = 5


def generator(seed: int, *key: int) -> np.random.Generator:
    """Return the Philox generator for (seed, *key)."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class StreamPartition:
    """
    Descriptor of how draws are split over independent streams.

    Attributes:
        seed (int): 64-bit root seed
        tag (int): Domain tag (TAG_SAMPLE, TAG_BALL, ...)
        kind (str): "column" for one stream per column, "block" for one stream per
            block of `block` consecutive columns or trials
        block (int): Block width for kind == "block"
        extra (tuple): Additional key components (for example a calibration split)
    """

    seed: int
    tag: int = TAG_SAMPLE
    kind: str = "column"
    block: int = 1
    extra: tuple = field(default_factory=tuple)

    def stream(self, index: int) -> np.random.Generator:
        return generator(self.seed, self.tag, *self.extra, index)

    def blocks(self, total: int):
        """Yield (block_index, start, stop) covering range(total)."""
        width = 1 if self.kind == "column" else max(1, self.block)
        for number, start in enumerate(range(0, total, width)):
            yield number, start, min(start + width, total)

    def describe(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "tag": self.tag,
            "kind": self.kind,
            "block": self.block,
            "extra": list(self.extra),
            "generator": "Philox/SeedSequence",
        }
