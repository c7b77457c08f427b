"""Dense state containers and the linear algebra used throughout the package.

States are plain complex numpy arrays wrapped in small validated containers.
Multi-register states carry an explicit, label-addressed register list so
that callers never depend on positional register order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from . import resources

STATE_ATOL = 1e-10
OPERATOR_ATOL = 1e-9

_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _is_power_of_two(d: int) -> bool:
    return d >= 1 and d & (d - 1) == 0


class PureState:
    """Unit-norm amplitude vector.

    ``n`` is the qubit count when the dimension is a power of two and
    ``None`` otherwise (subspace-restricted states).
    """

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes, *, normalize: bool = False):
        vec = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vec)
        if normalize:
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            vec = vec / norm
        elif abs(norm - 1) > STATE_ATOL:
            raise ValueError(f"state norm is {norm!r}, expected 1")
        self.amplitudes = vec

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n(self) -> int | None:
        return int(math.log2(self.dim)) if _is_power_of_two(self.dim) else None

    @classmethod
    def basis(cls, index: int, dim: int) -> "PureState":
        vec = np.zeros(dim, dtype=complex)
        vec[index] = 1
        return cls(vec)

    @classmethod
    def zero(cls, n: int) -> "PureState":
        return cls.basis(0, 2**n)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"PureState(dim={self.dim})"


class DensityMatrix:
    """Hermitian, positive semidefinite, trace-one matrix.

    Args:
        matrix: the d x d matrix.
        dims: subsystem dimensions used by :func:`partial_trace`; defaults to
            qubits when d is a power of two, else a single subsystem.
    """

    __slots__ = ("matrix", "dims")

    def __init__(self, matrix, dims: Sequence[int] | None = None, *, validate: bool = True):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        d = mat.shape[0]
        if dims is None:
            dims = (2,) * int(math.log2(d)) if _is_power_of_two(d) and d > 1 else (d,)
        dims = tuple(int(x) for x in dims)
        if math.prod(dims) != d:
            raise ValueError(f"dims {dims} do not multiply to {d}")
        if validate:
            if not np.allclose(mat, mat.conj().T, atol=STATE_ATOL):
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(mat).real
            if abs(tr - 1) > STATE_ATOL:
                raise ValueError(f"density matrix trace is {tr!r}, expected 1")
            if np.linalg.eigvalsh(mat).min() < -OPERATOR_ATOL:
                raise ValueError("density matrix has a negative eigenvalue")
        self.matrix = mat
        self.dims = dims

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d, dtype=complex) / d)

    def __repr__(self):
        return f"DensityMatrix(dims={self.dims})"


@dataclass(frozen=True)
class Register:
    label: str
    dim: int


class MultiRegisterState:
    """Pure state over an ordered list of labelled registers."""

    __slots__ = ("amplitudes", "registers")

    def __init__(self, amplitudes, registers: Iterable[Register | tuple], *, check_norm: bool = True):
        regs = tuple(r if isinstance(r, Register) else Register(str(r[0]), int(r[1])) for r in registers)
        labels = [r.label for r in regs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate register labels in {labels}")
        vec = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if vec.shape[0] != math.prod(r.dim for r in regs):
            raise ValueError("amplitude length does not match register dimensions")
        if check_norm and abs(np.linalg.norm(vec) - 1) > STATE_ATOL:
            raise ValueError("multi-register state is not normalized")
        self.amplitudes = vec
        self.registers = regs

    @classmethod
    def from_states(cls, parts: Sequence[tuple[str, PureState | np.ndarray]]) -> "MultiRegisterState":
        """Product state from ``(label, state)`` pairs, first pair outermost."""
        dims = [np.asarray(s.amplitudes if isinstance(s, PureState) else s).shape[0] for _, s in parts]
        resources.guard(math.prod(dims))
        vec = np.ones(1, dtype=complex)
        for _, s in parts:
            vec = np.kron(vec, s.amplitudes if isinstance(s, PureState) else np.asarray(s, dtype=complex))
        return cls(vec, [Register(lbl, d) for (lbl, _), d in zip(parts, dims)])

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no register labelled {label!r}; have {self.labels}") from None

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "MultiRegisterState":
        return MultiRegisterState(self.amplitudes / self.norm(), self.registers)

    def reorder(self, labels: Sequence[str]) -> "MultiRegisterState":
        if sorted(labels) != sorted(self.labels):
            raise ValueError("reorder needs a permutation of the register labels")
        axes = [self.axis(lbl) for lbl in labels]
        vec = np.transpose(self.tensor(), axes).reshape(-1)
        return MultiRegisterState(vec, [self.registers[a] for a in axes], check_norm=False)

    def __repr__(self):
        regs = ", ".join(f"{r.label}:{r.dim}" for r in self.registers)
        return f"MultiRegisterState({regs})"


class MeasurementEffect:
    """Accept element of a two-outcome measurement, 0 <= E <= id."""

    __slots__ = ("operator",)

    def __init__(self, operator):
        op = np.asarray(operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError("effect must be a square matrix")
        if not np.allclose(op, op.conj().T, atol=OPERATOR_ATOL):
            raise ValueError("effect is not Hermitian")
        w = np.linalg.eigvalsh(op)
        if w.min() < -OPERATOR_ATOL or w.max() > 1 + OPERATOR_ATOL:
            raise ValueError("effect eigenvalues must lie in [0, 1]")
        self.operator = op

    @classmethod
    def projector_onto(cls, state: PureState | np.ndarray) -> "MeasurementEffect":
        vec = state.amplitudes if isinstance(state, PureState) else np.asarray(state, dtype=complex)
        return cls(np.outer(vec, vec.conj()))

    @property
    def dim(self) -> int:
        return self.operator.shape[0]

    @property
    def is_projector(self) -> bool:
        return bool(np.allclose(self.operator @ self.operator, self.operator, atol=OPERATOR_ATOL))

    def complement(self) -> "MeasurementEffect":
        return MeasurementEffect(np.eye(self.dim) - self.operator)

    def accept_probability(self, state: PureState | DensityMatrix | np.ndarray) -> float:
        mat = _as_matrix(state)
        return float(np.clip(np.real(np.trace(self.operator @ mat)), 0.0, 1.0))


StateOrOperator = Union[PureState, DensityMatrix, MultiRegisterState, np.ndarray]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.matrix
    if isinstance(x, PureState):
        return np.outer(x.amplitudes, x.amplitudes.conj())
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return arr


def tensor_product(a: StateOrOperator, b: StateOrOperator) -> StateOrOperator:
    """Kronecker product with register order ``(a, b)``.

    Pure states give a pure state, a pure/mixed mix gives a density matrix,
    two multi-register states concatenate their registers and two arrays are
    treated as operators. Mixing a state with a bare operator is a TypeError.
    """
    state_types = (PureState, DensityMatrix, MultiRegisterState)
    a_state, b_state = isinstance(a, state_types), isinstance(b, state_types)
    if a_state != b_state:
        raise TypeError("tensor_product needs two states or two operators")
    if not a_state:
        return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    if isinstance(a, MultiRegisterState) or isinstance(b, MultiRegisterState):
        if not (isinstance(a, MultiRegisterState) and isinstance(b, MultiRegisterState)):
            raise TypeError("multi-register states only combine with multi-register states")
        resources.guard(a.amplitudes.size * b.amplitudes.size)
        return MultiRegisterState(np.kron(a.amplitudes, b.amplitudes), a.registers + b.registers)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes))
    da = a.dims if isinstance(a, DensityMatrix) else (a.dim,)
    db = b.dims if isinstance(b, DensityMatrix) else (b.dim,)
    return DensityMatrix(np.kron(_as_matrix(a), _as_matrix(b)), da + db, validate=False)


def partial_trace(state: DensityMatrix | MultiRegisterState, keep: Sequence) -> DensityMatrix:
    """Reduced density matrix on the kept subsystems, in the order given.

    ``keep`` holds register labels for a :class:`MultiRegisterState` and
    subsystem indices (into ``state.dims``) for a :class:`DensityMatrix`.
    """
    keep = list(keep)
    if not keep:
        raise ValueError("partial_trace needs a nonempty keep set")
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate entries in keep")
    if isinstance(state, MultiRegisterState):
        axes = [state.axis(lbl) for lbl in keep]
        rest = [i for i in range(len(state.dims)) if i not in axes]
        dims = state.dims
        dk = math.prod(dims[i] for i in axes)
        mat = np.transpose(state.tensor(), axes + rest).reshape(dk, -1)
        return DensityMatrix(mat @ mat.conj().T, [dims[i] for i in axes], validate=False)
    if not isinstance(state, DensityMatrix):
        raise TypeError("partial_trace expects a DensityMatrix or MultiRegisterState")
    dims = state.dims
    if any(not 0 <= k < len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for dims {dims}")
    n = len(dims)
    rest = [i for i in range(n) if i not in keep]
    t = state.matrix.reshape(dims + dims)
    t = np.transpose(t, keep + rest + [n + i for i in keep] + [n + i for i in rest])
    dk = math.prod(dims[i] for i in keep)
    dr = math.prod(dims[i] for i in rest)
    t = t.reshape(dk, dr, dk, dr)
    return DensityMatrix(np.einsum("ajbj->ab", t), [dims[i] for i in keep], validate=False)


def _check_same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``."""
    a, b = _as_matrix(rho), _as_matrix(sigma)
    _check_same_dim(a, b)
    diff = a - b
    diff = (diff + diff.conj().T) / 2
    return float(min(1.0, 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum()))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``||sqrt(rho) sqrt(sigma)||_1 ** 2``.

    Pure inputs reduce to the squared overlap.
    """
    if isinstance(rho, PureState) and isinstance(sigma, PureState):
        _check_same_dim(rho.amplitudes, sigma.amplitudes)
        return float(min(1.0, abs(np.vdot(rho.amplitudes, sigma.amplitudes)) ** 2))
    a, b = _as_matrix(rho), _as_matrix(sigma)
    _check_same_dim(a, b)
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = root @ b @ root
    mu = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.clip(np.sqrt(np.clip(mu, 0, None)).sum() ** 2, 0.0, 1.0))


def is_unitary(u: np.ndarray, atol: float = OPERATOR_ATOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol)


def _apply_on(state: MultiRegisterState, op: np.ndarray, targets: Sequence[str]) -> np.ndarray:
    """Return the amplitudes of ``op`` applied on ``targets`` (no validation of op)."""
    targets = list(targets)
    if not targets or len(set(targets)) != len(targets):
        raise ValueError(f"bad target registers {targets}")
    axes = [state.axis(t) for t in targets]
    dims = state.dims
    dt = math.prod(dims[a] for a in axes)
    if op.shape != (dt, dt):
        raise ValueError(f"operator of shape {op.shape} does not act on targets of dimension {dt}")
    t = np.moveaxis(state.tensor(), axes, range(len(axes)))
    moved_shape = t.shape
    t = (op @ t.reshape(dt, -1)).reshape(moved_shape)
    return np.moveaxis(t, range(len(axes)), axes).reshape(-1)


def apply_unitary_on(state: MultiRegisterState, u: np.ndarray, targets: Sequence[str]) -> MultiRegisterState:
    """Apply ``u`` to the listed registers (in that order), identity elsewhere."""
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise ValueError("operator is not unitary")
    return MultiRegisterState(_apply_on(state, u, targets), state.registers, check_norm=False)


def apply_operator_on(state: MultiRegisterState, op: np.ndarray, targets: Sequence[str]) -> MultiRegisterState:
    """Like :func:`apply_unitary_on` but for arbitrary operators; the result is unnormalized."""
    return MultiRegisterState(_apply_on(state, np.asarray(op, dtype=complex), targets), state.registers, check_norm=False)


def pauli_string(n: int, spec: str | Sequence[str]) -> np.ndarray:
    """Kronecker product of single-qubit Paulis, qubit 0 outermost."""
    labels = list(spec)
    if len(labels) != n:
        raise ValueError(f"pauli spec {spec!r} has length {len(labels)}, expected {n}")
    out = np.ones((1, 1), dtype=complex)
    for lbl in labels:
        try:
            out = np.kron(out, _PAULIS[lbl.upper()])
        except KeyError:
            raise ValueError(f"bad Pauli label {lbl!r}") from None
    return out


class BinaryMeasurement(NamedTuple):
    p_accept: float
    post_accept: MultiRegisterState | None
    post_reject: MultiRegisterState | None
    joint: MultiRegisterState | None = None


def coherent_record(state: MultiRegisterState, effect: MeasurementEffect | np.ndarray,
                    targets: Sequence[str], ancilla: str) -> MultiRegisterState:
    """XOR the outcome of a projective test into an existing qubit register.

    Applies ``E (x) X_anc + (id - E) (x) id_anc``, which is unitary because
    ``E`` is a projector.
    """
    op = effect.operator if isinstance(effect, MeasurementEffect) else np.asarray(effect, dtype=complex)
    if not np.allclose(op @ op, op, atol=OPERATOR_ATOL):
        raise ValueError("coherent recording requires a projector effect")
    if state.registers[state.axis(ancilla)].dim != 2:
        raise ValueError("ancilla must be a qubit register")
    accepted = _apply_on(state, op, targets)
    rejected = state.amplitudes - accepted
    flipped = MultiRegisterState(accepted, state.registers, check_norm=False)
    flipped = _apply_on(flipped, _PAULIS["X"], [ancilla])
    return MultiRegisterState(flipped + rejected, state.registers, check_norm=False)


def measure_binary(state: MultiRegisterState, effect: MeasurementEffect, targets: Sequence[str],
                   mode: str = "collapse", ancilla: str = "anc") -> BinaryMeasurement:
    """Two-outcome measurement of ``effect`` on the target registers.

    In ``collapse`` mode the Born probability and both renormalized branches
    are returned (``sqrt(E)`` is used as the Kraus operator, which coincides
    with ``E`` for projectors). In ``coherent`` mode a fresh qubit register
    ``ancilla`` is appended and set to 1 on the accept branch; ``joint`` holds
    that superposition and the branch states are reported as well.
    """
    if not isinstance(effect, MeasurementEffect):
        effect = MeasurementEffect(effect)
    if mode not in ("collapse", "coherent"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "coherent":
        if not effect.is_projector:
            raise ValueError("coherent mode requires a projector effect")
        if ancilla in state.labels:
            raise ValueError(f"register {ancilla!r} already exists")
    w, v = np.linalg.eigh(effect.operator)
    kraus_acc = (v * np.sqrt(np.clip(w, 0, 1))) @ v.conj().T
    kraus_rej = (v * np.sqrt(np.clip(1 - w, 0, 1))) @ v.conj().T
    acc = _apply_on(state, kraus_acc, targets)
    rej = _apply_on(state, kraus_rej, targets)
    p_acc = float(np.vdot(acc, acc).real)
    p_rej = float(np.vdot(rej, rej).real)
    total = p_acc + p_rej
    p_acc /= total
    post_acc = MultiRegisterState(acc / math.sqrt(p_acc * total), state.registers) if p_acc > 0 else None
    post_rej = MultiRegisterState(rej / math.sqrt(p_rej), state.registers) if p_rej > 0 else None
    joint = None
    if mode == "coherent":
        # ancilla appended innermost: |branch>|1> on accept, |branch>|0> on reject
        joint_vec = np.stack([rej, acc], axis=-1).reshape(-1)
        joint = MultiRegisterState(joint_vec, state.registers + (Register(ancilla, 2),), check_norm=False)
    return BinaryMeasurement(p_acc, post_acc, post_rej, joint)
