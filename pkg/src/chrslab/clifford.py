"""Uniform sampling of the n-qubit Clifford group.

An element is drawn as ``P . D(G1) L(D1) . H_h . Perm . D(G2) L(D2)`` where
``L(D)`` maps ``|x>`` to ``|Dx>`` for a unit lower-triangular ``D``,
``D(G)`` multiplies ``|x>`` by ``i^(x^T G x)``, ``H_h`` is a layer of
Hadamards, ``Perm`` permutes qubits and ``P`` is a Pauli. The pair
``(h, Perm)`` labels a Bruhat cell and is drawn from the quantum Mallows
distribution, which weights each cell by its size; every group element in a
cell has the same number of preimages, so the result is exactly uniform.

Elements keep these structured parameters so that large batches can be
applied to state vectors with vectorized gathers and phases; the canonical
gate sequence over ``{H, S, CX}`` is decoded on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import resources
from .rng import RngLike, as_generator

MAX_QUBITS = 10
_SQRT_HALF = 1 / math.sqrt(2)

Gate = tuple  # ("H", q) | ("S", q) | ("CX", control, target)


def clifford_group_order(n: int) -> int:
    """Size of the n-qubit Clifford group modulo global phase."""
    order = 2 ** (n * n + 2 * n)
    for j in range(1, n + 1):
        order *= 4**j - 1
    return order


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")


@lru_cache(maxsize=None)
def _bit_table(n: int) -> np.ndarray:
    """``(2^n, n)`` table of basis-index bits, qubit 0 most significant."""
    x = np.arange(2**n)
    return ((x[:, None] >> (n - 1 - np.arange(n))) & 1).astype(np.int64)


@lru_cache(maxsize=None)
def _weights(n: int) -> np.ndarray:
    return (1 << (n - 1 - np.arange(n))).astype(np.int64)


# -- structured parameters ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class CliffordParams:
    """Structured parameters of a batch of Clifford elements.

    All arrays carry a leading batch axis of length B.
    """

    had: np.ndarray  # (B, n) bool
    perm: np.ndarray  # (B, n) int
    gamma1: np.ndarray  # (B, n, n) symmetric 0/1
    delta1: np.ndarray  # (B, n, n) unit lower-triangular 0/1
    gamma2: np.ndarray
    delta2: np.ndarray
    x_bits: np.ndarray  # (B, n) Pauli X part
    z_bits: np.ndarray  # (B, n) Pauli Z part

    @property
    def n(self) -> int:
        return self.had.shape[1]

    def __len__(self) -> int:
        return self.had.shape[0]

    def take(self, index) -> "CliffordParams":
        sel = np.atleast_1d(np.arange(len(self))[index])
        return CliffordParams(*(getattr(self, f)[sel] for f in _PARAM_FIELDS))

    @staticmethod
    def concatenate(parts: Sequence["CliffordParams"]) -> "CliffordParams":
        return CliffordParams(*(np.concatenate([getattr(p, f) for p in parts]) for f in _PARAM_FIELDS))


_PARAM_FIELDS = ("had", "perm", "gamma1", "delta1", "gamma2", "delta2", "x_bits", "z_bits")


def mallows_pmf(n: int, had: Sequence[bool], perm: Sequence[int]) -> float:
    """Exact probability of ``(had, perm)`` under the quantum Mallows sampler."""
    inds = list(range(n))
    prob = 1.0
    for i in range(n):
        m = n - i
        k = inds.index(perm[i])
        index = k if had[i] else 2 * m - k - 1
        prob *= 2.0 ** (-index - 1) / (1 - 4.0 ** (-m))
        inds.pop(k)
    return prob


def _sample_mallows(n: int, count: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    had = np.zeros((count, n), dtype=bool)
    perm = np.zeros((count, n), dtype=np.int64)
    avail = np.ones((count, n), dtype=bool)
    rows = np.arange(count)
    for i in range(n):
        m = n - i
        eps = 4.0**-m
        r = gen.random(count)
        index = -np.ceil(np.log2(r + (1 - r) * eps)).astype(np.int64)
        index = np.minimum(index, 2 * m - 1)
        had[:, i] = index < m
        k = np.where(index < m, index, 2 * m - index - 1)
        rank = np.cumsum(avail, axis=1) - 1
        pos = np.argmax((rank == k[:, None]) & avail, axis=1)
        perm[:, i] = pos
        avail[rows, pos] = False
    return had, perm


def _random_symmetric(n: int, count: int, gen: np.random.Generator) -> np.ndarray:
    upper = np.triu(gen.integers(0, 2, size=(count, n, n)))
    return upper + np.swapaxes(np.triu(upper, 1), 1, 2)


def _random_unit_lower(n: int, count: int, gen: np.random.Generator) -> np.ndarray:
    return np.tril(gen.integers(0, 2, size=(count, n, n)), -1) + np.eye(n, dtype=np.int64)


def sample_clifford_params(n: int, count: int, rng: RngLike = None) -> CliffordParams:
    """Draw ``count`` independent uniform Clifford elements in structured form."""
    _check_n(n)
    if count < 1:
        raise ValueError("count must be at least 1")
    gen = as_generator(rng)
    had, perm = _sample_mallows(n, count, gen)
    return CliffordParams(
        had=had,
        perm=perm,
        gamma1=_random_symmetric(n, count, gen),
        delta1=_random_unit_lower(n, count, gen),
        gamma2=_random_symmetric(n, count, gen),
        delta2=_random_unit_lower(n, count, gen),
        x_bits=gen.integers(0, 2, size=(count, n)),
        z_bits=gen.integers(0, 2, size=(count, n)),
    )


# -- vectorized application --------------------------------------------------


def _linear_targets(mat: np.ndarray, n: int) -> np.ndarray:
    """Basis index of ``mat @ x`` for every ``x``, shape (B, 2^n).

    Built by doubling over qubits, least significant first, using linearity.
    """
    cols = np.einsum("bij,i->bj", mat, _weights(n))  # image of each basis vector
    t = np.zeros((mat.shape[0], 1), dtype=np.int64)
    for q in range(n - 1, -1, -1):
        t = np.concatenate([t, t ^ cols[:, q:q + 1]], axis=1)
    return t


def _perm_targets(perm: np.ndarray, n: int) -> np.ndarray:
    """Basis index of ``y`` with ``y_i = x_{perm[i]}``, shape (B, 2^n)."""
    # bit perm[i] of x lands on qubit i, so qubit j of x moves to inv[j]
    inv = np.argsort(perm, axis=1)
    cols = _weights(n)[inv]
    t = np.zeros((perm.shape[0], 1), dtype=np.int64)
    for q in range(n - 1, -1, -1):
        t = np.concatenate([t, t | cols[:, q:q + 1]], axis=1)
    return t


_I_POWERS = np.array([1, 1j, -1, -1j])


def _quadratic_phase(gamma: np.ndarray, n: int) -> np.ndarray:
    bits = _bit_table(n).astype(float)
    b = gamma.shape[0]
    lin = bits @ np.transpose(gamma, (1, 0, 2)).reshape(n, b * n).astype(float)
    q = np.einsum("xbj,xj->bx", lin.reshape(-1, b, n), bits)
    return _I_POWERS[np.rint(q).astype(np.int64) & 3]


def _scatter(states: np.ndarray, targets: np.ndarray) -> np.ndarray:
    out = np.empty_like(states)
    np.put_along_axis(out, targets, states, axis=1)
    return out


def _gather(states: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return np.take_along_axis(states, targets, axis=1)


def _hadamard_layer(states: np.ndarray, had: np.ndarray, n: int) -> np.ndarray:
    b = states.shape[0]
    for q in np.flatnonzero(had.any(axis=0)):
        view = states.reshape(b, 2**q, 2, 2 ** (n - q - 1))
        a, c = view[:, :, 0, :], view[:, :, 1, :]
        mixed = np.stack([(a + c) * _SQRT_HALF, (a - c) * _SQRT_HALF], axis=2)
        mask = had[:, q][:, None, None, None]
        states = np.where(mask, mixed, view).reshape(b, -1)
    return states


def _pauli_layers(params: CliffordParams, n: int):
    x_int = params.x_bits @ _weights(n)
    x = np.arange(2**n)
    x_targets = x[None, :] ^ x_int[:, None]
    parity = (params.z_bits @ _bit_table(n).T) & 1
    return x_targets, 1 - 2 * parity.astype(np.int64)


def _apply_chunk(params: CliffordParams, states: np.ndarray, adjoint: bool) -> np.ndarray:
    n = params.n
    l1 = _linear_targets(params.delta1, n)
    l2 = _linear_targets(params.delta2, n)
    pt = _perm_targets(params.perm, n)
    d1 = _quadratic_phase(params.gamma1, n)
    d2 = _quadratic_phase(params.gamma2, n)
    xt, zs = _pauli_layers(params, n)
    s = states
    if not adjoint:
        s = _scatter(s, l2)
        s = s * d2
        s = _scatter(s, pt)
        s = _hadamard_layer(s, params.had, n)
        s = _scatter(s, l1)
        s = s * d1
        s = s * zs
        s = _gather(s, xt)
    else:
        s = _gather(s, xt)
        s = s * zs
        s = s * d1.conj()
        s = _gather(s, l1)
        s = _hadamard_layer(s, params.had, n)
        s = _gather(s, pt)
        s = s * d2.conj()
        s = _gather(s, l2)
    return s


def apply_params(params: CliffordParams, states: np.ndarray, adjoint: bool = False,
                 chunk_elems: int = 1 << 20) -> np.ndarray:
    """Apply element ``b`` of the batch to row ``b`` of ``states``.

    Args:
        params: batch of B structured elements.
        states: ``(B, 2^n)`` array, or a single ``(2^n,)`` vector that is
            broadcast to every element.
        adjoint: apply ``C^dagger`` instead of ``C``.
        chunk_elems: rows are processed in chunks of about this many amplitudes.

    Returns:
        ``(B, 2^n)`` complex array.
    """
    n, b = params.n, len(params)
    d = 2**n
    states = np.asarray(states, dtype=complex)
    if states.ndim == 1:
        states = np.broadcast_to(states, (b, d))
    if states.shape != (b, d):
        raise ValueError(f"states of shape {states.shape} do not match batch ({b}, {d})")
    resources.guard(b * d * 6, what="Clifford batch workspace")
    step = max(1, chunk_elems // d)
    out = np.empty((b, d), dtype=complex)
    for start in range(0, b, step):
        sl = slice(start, min(b, start + step))
        out[sl] = _apply_chunk(params.take(sl), np.ascontiguousarray(states[sl]), adjoint)
    return out


# -- gate sequences ----------------------------------------------------------


def _linear_gates(delta: np.ndarray) -> list[Gate]:
    n = delta.shape[0]
    gates = []
    for i in range(n - 1, 0, -1):
        for j in range(i):
            if delta[i, j]:
                gates.append(("CX", j, i))
    return gates


def _phase_gates(gamma: np.ndarray) -> list[Gate]:
    n = gamma.shape[0]
    gates = [("S", i) for i in range(n) if gamma[i, i]]
    for i in range(n):
        for j in range(i + 1, n):
            if gamma[i, j]:
                gates += [("H", j), ("CX", i, j), ("H", j)]
    return gates


def _swap_gates(perm: Sequence[int]) -> list[Gate]:
    cur = list(range(len(perm)))
    gates = []
    for i, want in enumerate(perm):
        if cur[i] != want:
            j = cur.index(want)
            gates += [("CX", i, j), ("CX", j, i), ("CX", i, j)]
            cur[i], cur[j] = cur[j], cur[i]
    return gates


def decode_gates(params: CliffordParams, index: int = 0) -> tuple[Gate, ...]:
    """Canonical ``{H, S, CX}`` sequence, in time order, for one batch element."""
    p = params.take(index)
    gates: list[Gate] = []
    gates += _linear_gates(p.delta2[0])
    gates += _phase_gates(p.gamma2[0])
    gates += _swap_gates(p.perm[0])
    gates += [("H", q) for q in np.flatnonzero(p.had[0])]
    gates += _linear_gates(p.delta1[0])
    gates += _phase_gates(p.gamma1[0])
    for q in np.flatnonzero(p.z_bits[0]):
        gates += [("S", q), ("S", q)]
    for q in np.flatnonzero(p.x_bits[0]):
        gates += [("H", q), ("S", q), ("S", q), ("H", q)]
    return tuple((g[0],) + tuple(int(v) for v in g[1:]) for g in gates)


def apply_gates(gates: Sequence[Gate], states: np.ndarray, n: int, adjoint: bool = False) -> np.ndarray:
    """Apply a gate sequence to each row of a ``(B, 2^n)`` array."""
    states = np.asarray(states, dtype=complex)
    b = states.shape[0]
    t = states.reshape((b,) + (2,) * n).copy()
    seq = reversed(gates) if adjoint else gates
    for g in seq:
        name = g[0]
        if name == "H":
            ax = g[1] + 1
            a, c = t.take(0, axis=ax), t.take(1, axis=ax)
            t = np.stack([(a + c) * _SQRT_HALF, (a - c) * _SQRT_HALF], axis=ax)
        elif name == "S":
            idx = [slice(None)] * (n + 1)
            idx[g[1] + 1] = 1
            t[tuple(idx)] *= -1j if adjoint else 1j
        elif name == "CX":
            c, tq = g[1], g[2]
            idx = [slice(None)] * (n + 1)
            idx[c + 1] = 1
            sub = t[tuple(idx)]
            flip_axis = tq + 1 if tq < c else tq
            t[tuple(idx)] = np.flip(sub, axis=flip_axis)
        else:
            raise ValueError(f"unknown gate {g!r}")
    return t.reshape(b, -1)


def gates_to_string(gates: Sequence[Gate]) -> str:
    return ";".join(" ".join(str(v) for v in g) for g in gates)


def gates_from_string(text: str, n: int) -> tuple[Gate, ...]:
    """Parse ``"H 0;S 1;CX 0 1"``; the empty string is the identity."""
    gates = []
    for token in filter(None, (s.strip() for s in text.split(";"))):
        parts = token.split()
        name, args = parts[0].upper(), parts[1:]
        arity = {"H": 1, "S": 1, "CX": 2}.get(name)
        if arity is None or len(args) != arity:
            raise ValueError(f"bad gate token {token!r}")
        qubits = tuple(int(a) for a in args)
        if any(not 0 <= q < n for q in qubits) or len(set(qubits)) != len(qubits):
            raise ValueError(f"bad qubit index in {token!r} for n={n}")
        gates.append((name,) + qubits)
    return tuple(gates)


# -- element and batch containers --------------------------------------------


class CliffordElement:
    """One n-qubit Clifford, stored as gates and optionally structured parameters."""

    __slots__ = ("n", "_gates", "_params", "_unitary")

    def __init__(self, n: int, gates: Sequence[Gate] | None = None, params: CliffordParams | None = None):
        _check_n(n)
        if gates is None and params is None:
            raise ValueError("need gates or structured parameters")
        if params is not None and (len(params) != 1 or params.n != n):
            raise ValueError("structured parameters must describe a single n-qubit element")
        self.n = n
        self._gates = tuple(gates) if gates is not None else None
        self._params = params
        self._unitary = None

    @property
    def gates(self) -> tuple[Gate, ...]:
        if self._gates is None:
            self._gates = decode_gates(self._params)
        return self._gates

    @property
    def params(self) -> CliffordParams | None:
        return self._params

    def to_string(self) -> str:
        return gates_to_string(self.gates)

    @classmethod
    def from_string(cls, text: str, n: int) -> "CliffordElement":
        return cls(n, gates=gates_from_string(text, n))

    def unitary(self) -> np.ndarray:
        if self._unitary is None:
            d = 2**self.n
            resources.guard(d * d)
            eye = np.eye(d, dtype=complex)
            if self._params is not None:
                cols = apply_params(self._params.take(np.zeros(d, dtype=int)), eye)
            else:
                cols = apply_gates(self.gates, eye, self.n)
            self._unitary = cols.T
        return self._unitary

    def apply(self, state: np.ndarray, adjoint: bool = False) -> np.ndarray:
        state = np.asarray(state, dtype=complex)[None, :]
        if self._params is not None:
            return apply_params(self._params, state, adjoint)[0]
        return apply_gates(self.gates, state, self.n, adjoint)[0]

    def __repr__(self):
        return f"CliffordElement(n={self.n}, gates={len(self.gates)})"


class CliffordBatch:
    """Sequence of Clifford elements with a vectorized application path."""

    def __init__(self, n: int, params: CliffordParams | None = None,
                 elements: Sequence[CliffordElement] | None = None):
        _check_n(n)
        self.n = n
        self._params = params
        self._elements = list(elements) if elements is not None else None
        if params is None and elements is None:
            raise ValueError("need parameters or elements")

    @classmethod
    def from_elements(cls, n: int, elements: Sequence[CliffordElement]) -> "CliffordBatch":
        if elements and all(e.params is not None for e in elements):
            return cls(n, CliffordParams.concatenate([e.params for e in elements]))
        return cls(n, elements=elements)

    def __len__(self) -> int:
        return len(self._params) if self._params is not None else len(self._elements)

    def __getitem__(self, i: int) -> CliffordElement:
        if self._params is not None:
            return CliffordElement(self.n, params=self._params.take(i))
        return self._elements[i]

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, index) -> "CliffordBatch":
        if self._params is not None:
            return CliffordBatch(self.n, self._params.take(index))
        sel = np.arange(len(self))[index]
        return CliffordBatch(self.n, elements=[self._elements[i] for i in np.atleast_1d(sel)])

    def apply(self, states: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """Apply element ``b`` to row ``b`` (or to a shared single vector)."""
        if self._params is not None:
            return apply_params(self._params, states, adjoint)
        states = np.asarray(states, dtype=complex)
        if states.ndim == 1:
            states = np.broadcast_to(states, (len(self), states.shape[0]))
        return np.stack([e.apply(states[i], adjoint) for i, e in enumerate(self._elements)])


def sample_uniform_clifford(n: int, rng: RngLike = None) -> CliffordElement:
    """Exactly uniform random element of the n-qubit Clifford group.

    Args:
        n: qubit count in ``[1, MAX_QUBITS]``.
        rng: randomness source.

    Returns:
        The sampled element; its gate sequence is decoded lazily.
    """
    return CliffordElement(n, params=sample_clifford_params(n, 1, rng))


def sample_clifford_batch(n: int, count: int, rng: RngLike = None) -> CliffordBatch:
    return CliffordBatch(n, sample_clifford_params(n, count, rng))


# -- reference enumeration ---------------------------------------------------


def canonical_key(u: np.ndarray, decimals: int = 8) -> bytes:
    """Hashable key of a unitary modulo global phase."""
    flat = u.reshape(-1)
    pivot = flat[np.argmax(np.abs(flat) > 1e-9)]
    v = flat * (abs(pivot) / pivot)
    v = np.round(v, decimals) + 0.0  # normalize negative zeros
    return v.tobytes()


def generator_gates(n: int) -> list[Gate]:
    gates: list[Gate] = [("H", q) for q in range(n)] + [("S", q) for q in range(n)]
    gates += [("CX", c, t) for c in range(n) for t in range(n) if c != t]
    return gates


def enumerate_clifford_group(n: int) -> list[np.ndarray]:
    """Every element modulo phase, by breadth-first search over generators.

    Intended as an independent oracle for tiny ``n`` (24 at n=1, 11520 at n=2).
    """
    _check_n(n)
    if n > 2:
        raise ValueError("enumeration is only supported for n <= 2")
    d = 2**n
    gens = [apply_gates([g], np.eye(d), n).T for g in generator_gates(n)]
    start = np.eye(d, dtype=complex)
    seen = {canonical_key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                w = g @ u
                key = canonical_key(w)
                if key not in seen:
                    seen[key] = w
                    nxt.append(w)
        frontier = nxt
    return list(seen.values())
