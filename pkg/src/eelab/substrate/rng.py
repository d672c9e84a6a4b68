"""Named-stream deterministic randomness.

Every consumer of randomness gets its own (seed, label) stream backed by a
counter-based Philox generator, so stages and workers can draw independently
without caring about draw order elsewhere.  Identical (seed, label) pairs
produce identical sequences on every platform.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _stream_key(seed: int, label: str) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}\x1f{label}".encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64)


class RngStream:
    """A seeded, labeled random stream with cheap child derivation."""

    def __init__(self, seed: int, label: str = "root"):
        self.seed = int(seed)
        self.label = label
        self._gen = np.random.Generator(np.random.Philox(key=_stream_key(self.seed, label)))

    def child(self, label: str) -> "RngStream":
        """Derive an independent stream; children never share draws with the parent."""
        return RngStream(self.seed, f"{self.label}/{label}")

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def random(self) -> float:
        return float(self._gen.random())

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)."""
        return int(self._gen.integers(low, high))

    def choice(self, items, p=None):
        idx = self._gen.choice(len(items), p=p)
        return items[int(idx)]

    def sample(self, items, k: int) -> list:
        """k distinct items drawn without replacement (k <= len(items))."""
        idx = self._gen.choice(len(items), size=k, replace=False)
        return [items[int(i)] for i in idx]

    def shuffle(self, items: list) -> list:
        """Return a shuffled copy; the input list is unchanged."""
        order = self._gen.permutation(len(items))
        return [items[int(i)] for i in order]

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=shape)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"
