"""Global-Clifford classical shadows: generation, inversion and estimation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .clifford import CliffordBatch, CliffordElement, sample_clifford_batch
from .linalg import DensityMatrix, PureState
from .rng import RngLike, as_generator


def lemma_shot_count(eps: float, delta: float, n_observables: int, max_tr_sq: float = 1.0) -> int:
    """Shot count ``ceil(204 / eps^2 * ln(2M / delta) * max Tr[O^2])``."""
    if not (0 < eps <= 1 and 0 < delta < 1 and n_observables >= 1):
        raise ValueError("need 0 < eps <= 1, 0 < delta < 1 and M >= 1")
    return math.ceil(204 / eps**2 * math.log(2 * n_observables / delta) * max_tr_sq)


def default_batches(delta: float, n_observables: int) -> int:
    """Median-of-means batch count ``ceil(2 ln(2M / delta))``."""
    return math.ceil(2 * math.log(2 * n_observables / delta))


def _bits_to_str(b: int, n: int) -> str:
    return format(int(b), f"0{n}b")


@dataclass(eq=False)
class ClassicalShadow:
    """Snapshots ``(C_i, b_i)`` of one n-qubit state.

    Outcomes are stored as basis indices; bit ``i`` of the string form is
    qubit ``i`` (qubit 0 first).
    """

    n: int
    cliffords: CliffordBatch
    outcomes: np.ndarray

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=np.int64).reshape(-1)
        if self.cliffords.n != self.n:
            raise ValueError("Clifford qubit count does not match shadow")
        if len(self.cliffords) != self.outcomes.shape[0]:
            raise ValueError("number of Cliffords and outcomes differ")
        if self.outcomes.size and (self.outcomes.min() < 0 or self.outcomes.max() >= 2**self.n):
            raise ValueError("outcome out of range")

    def __len__(self) -> int:
        return self.outcomes.shape[0]

    def shot(self, i: int) -> tuple[CliffordElement, str]:
        return self.cliffords[i], _bits_to_str(self.outcomes[i], self.n)

    def subset(self, index) -> "ClassicalShadow":
        return ClassicalShadow(self.n, self.cliffords.subset(index), self.outcomes[index])

    def to_records(self) -> list[dict]:
        return [{"clifford": c.to_string(), "outcome": _bits_to_str(b, self.n)}
                for c, b in zip(self.cliffords, self.outcomes)]

    @classmethod
    def from_records(cls, n: int, records: Sequence[dict]) -> "ClassicalShadow":
        elements, outcomes = [], []
        for rec in records:
            outcome = rec["outcome"]
            if len(outcome) != n or set(outcome) - {"0", "1"}:
                raise ValueError(f"bad outcome string {outcome!r} for n={n}")
            elements.append(CliffordElement.from_string(rec["clifford"], n))
            outcomes.append(int(outcome, 2))
        return cls(n, CliffordBatch(n, elements=elements), np.array(outcomes, dtype=np.int64))

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_json(cls, text: str, n: int) -> "ClassicalShadow":
        return cls.from_records(n, json.loads(text))


StateLike = Union[PureState, DensityMatrix, np.ndarray]


def _sample_rows(probs: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    u = gen.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((cdf < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def shadow_gen(state: StateLike, n_shots: int, rng: RngLike = None,
               cliffords: CliffordBatch | None = None) -> ClassicalShadow:
    """Measure ``n_shots`` copies in independent uniformly random Clifford bases.

    Args:
        state: pure state, density matrix, amplitude vector or matrix.
        n_shots: number of copies consumed.
        rng: randomness source for the Cliffords and the Born outcomes.
        cliffords: optional fixed measurement bases (mainly for tests).

    Returns:
        The classical shadow.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    gen = as_generator(rng)
    if isinstance(state, PureState):
        vec, mat = state.amplitudes, None
    elif isinstance(state, DensityMatrix):
        vec, mat = None, state.matrix
    else:
        arr = np.asarray(state, dtype=complex)
        vec, mat = (arr, None) if arr.ndim == 1 else (None, arr)
    d = vec.shape[0] if vec is not None else mat.shape[0]
    n = int(round(math.log2(d)))
    if 2**n != d:
        raise ValueError("shadow_gen needs a qubit state")
    if cliffords is None:
        cliffords = sample_clifford_batch(n, n_shots, gen)
    elif len(cliffords) != n_shots or cliffords.n != n:
        raise ValueError("supplied Cliffords do not match n_shots and n")
    if vec is not None:
        rows = vec
    else:
        # purify by sampling an eigenvector per shot
        w, v = np.linalg.eigh(mat)
        w = np.clip(w, 0, None)
        picks = gen.choice(d, size=n_shots, p=w / w.sum())
        rows = v[:, picks].T
    rotated = cliffords.apply(rows)
    outcomes = _sample_rows(np.abs(rotated) ** 2, gen)
    return ClassicalShadow(n, cliffords, outcomes)


def shadow_single_estimate(shot: tuple[CliffordElement, str | int]) -> np.ndarray:
    """Single-snapshot inverse ``(2^n + 1) C^dagger |b><b| C - id``."""
    clifford, outcome = shot
    n = clifford.n
    d = 2**n
    b = int(outcome, 2) if isinstance(outcome, str) else int(outcome)
    basis = np.zeros(d, dtype=complex)
    basis[b] = 1
    v = clifford.apply(basis, adjoint=True)
    return (d + 1) * np.outer(v, v.conj()) - np.eye(d)


def shot_values(shadow: ClassicalShadow, obs) -> np.ndarray:
    """Per-snapshot estimates ``Tr[O rho_hat_i]``.

    A :class:`PureState` or 1-D vector ``v`` is read as the projector
    ``|v><v|`` and uses the fast path ``(2^n + 1)|<b|C|v>|^2 - 1``. A string
    such as ``"XIZ"`` is read as a Pauli observable and avoids dense matrices.
    """
    d = 2**shadow.n
    idx = np.arange(len(shadow))
    if isinstance(obs, PureState) or np.ndim(obs) == 1:
        v = obs.amplitudes if isinstance(obs, PureState) else np.asarray(obs, dtype=complex)
        if v.shape != (d,):
            raise ValueError("observable dimension does not match shadow")
        amp = shadow.cliffords.apply(v)[idx, shadow.outcomes]
        return (d + 1) * np.abs(amp) ** 2 - np.vdot(v, v).real
    basis = np.zeros((len(shadow), d), dtype=complex)
    basis[idx, shadow.outcomes] = 1
    if isinstance(obs, str):
        if len(obs) != shadow.n:
            raise ValueError("Pauli label length does not match shadow")
        vecs = shadow.cliffords.apply(basis, adjoint=True)
        return (d + 1) * _pauli_expectations(vecs, obs) - (d if set(obs.upper()) <= {"I"} else 0)
    op = np.asarray(obs, dtype=complex)
    if op.shape != (d, d):
        raise ValueError("observable dimension does not match shadow")
    vecs = shadow.cliffords.apply(basis, adjoint=True)
    quad = np.einsum("bi,ij,bj->b", vecs.conj(), op, vecs).real
    return (d + 1) * quad - np.trace(op).real


def _pauli_expectations(vecs: np.ndarray, label: str) -> np.ndarray:
    """Row-wise ``<v|P|v>`` for a Pauli string, qubit 0 first."""
    n = len(label)
    x = np.arange(vecs.shape[1])
    flip, phase = 0, np.ones(vecs.shape[1], dtype=complex)
    for q, ch in enumerate(label.upper()):
        w = 1 << (n - 1 - q)
        bit = (x & w) != 0
        if ch in "XY":
            flip |= w
        if ch == "Z":
            phase = phase * np.where(bit, -1, 1)
        elif ch == "Y":
            # Y|0> = i|1>, Y|1> = -i|0>: amplitude at output bit b picks i or -i
            phase = phase * np.where(bit, 1j, -1j)
        elif ch not in "IX":
            raise ValueError(f"bad Pauli label {ch!r}")
    # (P v)[y] = phase[y] * v[y ^ flip]
    pv = vecs[:, x ^ flip] * phase[None, :]
    return np.einsum("bi,bi->b", vecs.conj(), pv).real


def median_of_means(values: np.ndarray, n_batches: int) -> float:
    """Median of ``n_batches`` batch means.

    Values are sorted and then dealt into batches by a permutation seeded
    from their bytes after rounding to 9 decimals, so the result depends
    only on the multiset of values (shot order and float noise from
    equivalent evaluation paths are irrelevant) while batches stay
    unrelated to rank.
    """
    values = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if values.size == 0:
        raise ValueError("no values to aggregate")
    if not 1 <= n_batches <= values.size:
        raise ValueError(f"n_batches must be in [1, {values.size}], got {n_batches}")
    size = values.size // n_batches
    digest = hashlib.blake2b(np.round(values, 9).tobytes(), digest_size=8).digest()
    order = np.random.default_rng(int.from_bytes(digest, "little")).permutation(values.size)
    means = values[order[: size * n_batches]].reshape(n_batches, size).mean(axis=1)
    return float(np.median(means))


def shadow_estimate_observable(shadow: ClassicalShadow, obs, n_batches: int) -> float:
    """Median over ``n_batches`` batches of the mean snapshot estimate.

    Args:
        shadow: nonempty classical shadow.
        obs: Hermitian matrix, or a state read as its projector.
        n_batches: batch count; ``len(shadow) % n_batches`` shots are left
            out so that batches have equal size.

    Returns:
        The median-of-means estimate of ``Tr[O rho]``.
    """
    if len(shadow) == 0:
        raise ValueError("empty shadow")
    return median_of_means(shot_values(shadow, obs), n_batches)
