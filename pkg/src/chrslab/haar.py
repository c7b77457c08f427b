"""Haar-random states and the common Haar random state family."""

from __future__ import annotations

import threading

import numpy as np

from .linalg import PureState
from .rng import RngLike, RngStream, as_generator

# Stream ids for family states live far from the per-trial ids used elsewhere.
_FAMILY_STREAM_BASE = 0xC0FFEE << 32


def _gaussian_vector(d: int, gen: np.random.Generator) -> np.ndarray:
    return gen.standard_normal(d) + 1j * gen.standard_normal(d)


def sample_haar_state(d: int, rng: RngLike = None) -> PureState:
    """Draw a Haar-random pure state of dimension ``d``.

    Args:
        d: Hilbert-space dimension, at least 2.
        rng: randomness source.

    Returns:
        The normalized complex Gaussian vector.
    """
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")
    vec = _gaussian_vector(d, as_generator(rng))
    return PureState(vec / np.linalg.norm(vec))


def sample_haar_state_perp_zero(d: int, rng: RngLike = None) -> PureState:
    """Haar-random state on the subspace orthogonal to the first basis vector."""
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")
    vec = _gaussian_vector(d, as_generator(rng))
    vec[0] = 0
    return PureState(vec / np.linalg.norm(vec))


def sample_haar_states(d: int, count: int, rng: RngLike = None, perp_zero: bool = False) -> np.ndarray:
    """Batch of Haar states as rows of a ``(count, d)`` array."""
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")
    gen = as_generator(rng)
    vecs = gen.standard_normal((count, d)) + 1j * gen.standard_normal((count, d))
    if perp_zero:
        vecs[:, 0] = 0
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


class ChrsFamily:
    """Lazily sampled family ``{|psi_l>}`` of fixed Haar-random states.

    The state for size ``l`` is a pure function of ``(seed, l)`` so that
    concurrent first access is harmless: every racer computes the same value.

    Args:
        seed: 64-bit master seed of the family.
        ell_range: inclusive ``(lo, hi)`` range of allowed sizes.
        orthogonal_mode: sample each state orthogonal to ``|0^l>``.
    """

    def __init__(self, seed: int, ell_range: tuple[int, int], orthogonal_mode: bool = False):
        lo, hi = int(ell_range[0]), int(ell_range[1])
        if lo < 1 or hi < lo:
            raise ValueError(f"bad ell_range {ell_range}")
        self.seed = int(seed)
        self.ell_range = (lo, hi)
        self.orthogonal_mode = orthogonal_mode
        self._cache: dict[int, PureState] = {}
        self._lock = threading.Lock()
        self.queries = 0

    @classmethod
    def for_security_parameter(cls, n: int, seed: int, orthogonal_mode: bool = False) -> "ChrsFamily":
        return cls(seed, (n, 2 * n), orthogonal_mode)

    @property
    def ells(self) -> range:
        return range(self.ell_range[0], self.ell_range[1] + 1)

    def _check(self, ell: int) -> None:
        if not self.ell_range[0] <= ell <= self.ell_range[1]:
            raise ValueError(f"size index {ell} outside configured range {self.ell_range}")

    def state(self, ell: int) -> PureState:
        """The family member of size ``ell`` without counting a query."""
        self._check(ell)
        cached = self._cache.get(ell)
        if cached is not None:
            return cached
        stream = RngStream(self.seed, _FAMILY_STREAM_BASE + ell)
        sampler = sample_haar_state_perp_zero if self.orthogonal_mode else sample_haar_state
        value = sampler(2**ell, stream)
        return self._cache.setdefault(ell, value)

    def record_queries(self, count: int) -> None:
        with self._lock:
            self.queries += count


def chrs_copies(family: ChrsFamily, ell: int, count: int) -> list[PureState]:
    """Return ``count`` copies of the size-``ell`` state and count the queries."""
    if count < 1:
        raise ValueError("count must be at least 1")
    state = family.state(ell)
    family.record_queries(count)
    return [PureState(state.amplitudes.copy()) for _ in range(count)]
