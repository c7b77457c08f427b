"""Counter-based, splittable random streams.

Every stochastic routine in the package accepts ``rng`` as an
:class:`RngStream`, a :class:`numpy.random.Generator`, an integer seed or
``None``. Streams are backed by Philox so that ``(seed, stream, counter)``
pins the output exactly and distinct stream ids are independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A replayable position in a Philox stream.

    Attributes:
        seed: 64-bit master seed.
        stream: 64-bit stream id; different ids give independent streams.
        counter: Philox block counter to start from.
    """

    seed: int
    stream: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream", "counter"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must fit in 64 bits, got {value}")

    def generator(self) -> np.random.Generator:
        key = (int(self.seed) & _MASK64) | ((int(self.stream) & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key, counter=int(self.counter)))

    def spawn(self, stream: int) -> "RngStream":
        """Return an independent stream under the same master seed."""
        return RngStream(self.seed, stream, 0)


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None:
        return np.random.default_rng()
    return RngStream(int(rng)).generator()


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed for a nested stream."""
    return int(rng.integers(0, 2**63 - 1))
