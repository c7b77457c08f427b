"""Symmetric-subspace projectors on groups of equal-dimension registers."""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple, Sequence

import numpy as np

from . import resources
from .linalg import MultiRegisterState

MAX_SYM_REGISTERS = 8


def _sym_tensor(t: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply the symmetrizer over ``axes`` of a state tensor.

    Uses ``Pi^m = (1/m) sum_i P_(1,i) (id (x) Pi^(m-1))`` so only
    transpositions with the first register are ever formed.
    """
    if len(axes) == 1:
        return t
    inner = _sym_tensor(t, axes[1:])
    out = inner.copy()
    for ax in axes[1:]:
        out += np.swapaxes(inner, axes[0], ax)
    return out / len(axes)


def _check_group(state: MultiRegisterState, registers: Sequence[str]) -> list[int]:
    if not 1 <= len(registers) <= MAX_SYM_REGISTERS:
        raise ValueError(f"need between 1 and {MAX_SYM_REGISTERS} registers")
    axes = [state.axis(r) for r in registers]
    dims = {state.dims[a] for a in axes}
    if len(dims) != 1:
        raise ValueError("symmetric projector needs registers of equal dimension")
    if len(set(axes)) != len(axes):
        raise ValueError("duplicate registers")
    return axes


def apply_sym(state: MultiRegisterState, registers: Sequence[str]) -> np.ndarray:
    """Unnormalized amplitudes of ``Pi_sym`` applied to ``registers``."""
    axes = _check_group(state, registers)
    resources.guard(state.amplitudes.size * 3, what="symmetrizer workspace")
    return _sym_tensor(state.tensor(), axes).reshape(-1)


class SymResult(NamedTuple):
    p_sym: float
    post_sym: MultiRegisterState | None
    post_antisym: MultiRegisterState | None


def sym_project(state: MultiRegisterState, registers: Sequence[str]) -> SymResult:
    """Measure ``{Pi_sym, id - Pi_sym}`` on the listed registers.

    Returns:
        Acceptance probability and both renormalized branches (``None`` for a
        branch of zero weight).
    """
    acc = apply_sym(state, registers)
    rej = state.amplitudes - acc
    p = float(np.vdot(acc, acc).real)
    q = float(np.vdot(rej, rej).real)
    post_acc = MultiRegisterState(acc / math.sqrt(p), state.registers) if p > 1e-15 else None
    post_rej = MultiRegisterState(rej / math.sqrt(q), state.registers) if q > 1e-15 else None
    return SymResult(p / (p + q), post_acc, post_rej)


def sym_record(state: MultiRegisterState, registers: Sequence[str], ancilla: str,
               control: tuple[str, int] | None = None) -> MultiRegisterState:
    """XOR the symmetric-test outcome into a qubit ancilla, optionally controlled.

    Args:
        state: joint state.
        registers: registers the projector acts on.
        ancilla: existing qubit register that is flipped on acceptance.
        control: ``(label, value)``; the test acts only where that register
            holds ``value``.
    """
    anc = state.axis(ancilla)
    if state.dims[anc] != 2:
        raise ValueError("ancilla must be a qubit")
    t = state.tensor()
    if control is not None:
        cax = state.axis(control[0])
        mask_shape = [1] * t.ndim
        mask_shape[cax] = state.dims[cax]
        mask = (np.arange(state.dims[cax]) == control[1]).reshape(mask_shape)
        active = t * mask
    else:
        active = t
    axes = _check_group(state, registers)
    acc = _sym_tensor(active, axes)
    out = t - acc + np.flip(acc, axis=anc)
    return MultiRegisterState(out.reshape(-1), state.registers, check_norm=False)


def explicit_sym_projector(d: int, m: int) -> np.ndarray:
    """``(1/m!) sum_pi P_pi`` as a dense ``d^m x d^m`` matrix (small sizes only)."""
    resources.guard(d ** (2 * m), what="explicit symmetric projector")
    dim = d**m
    eye = np.eye(dim).reshape((dim,) + (d,) * m)
    total = np.zeros((dim,) + (d,) * m)
    for perm in itertools.permutations(range(m)):
        total += np.transpose(eye, (0,) + tuple(p + 1 for p in perm))
    return total.reshape(dim, dim).T / math.factorial(m)


def symmetric_dimension(d: int, m: int) -> int:
    """Dimension ``C(d + m - 1, m)`` of the symmetric subspace."""
    return math.comb(d + m - 1, m)


def product_state(vectors: Sequence[np.ndarray], labels: Sequence[str] | None = None) -> MultiRegisterState:
    """Product of single-register vectors, labelled ``r0, r1, ...`` by default."""
    labels = list(labels) if labels is not None else [f"r{i}" for i in range(len(vectors))]
    return MultiRegisterState.from_states(list(zip(labels, vectors)))


__all__ = [
    "MAX_SYM_REGISTERS", "SymResult", "apply_sym", "explicit_sym_projector",
    "product_state", "sym_project", "sym_record", "symmetric_dimension",
]
