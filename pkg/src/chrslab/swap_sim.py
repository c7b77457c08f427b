"""Simulating the swap oracle ``O_psi`` from copies of ``psi``.

``O_psi`` exchanges ``|0>`` and ``|psi>`` (with ``psi`` orthogonal to
``|0>``) and is the identity elsewhere. The simulator answers a query on
register ``R`` with copies only, in two halves:

1. zero-test ``R`` into ``A1``; if it fired, take a copy out of the
   reservoir into ``R``; otherwise test ``R`` plus ``q`` fresh copies for
   symmetry into ``A2`` and, on acceptance, put ``R`` back into the reservoir
   (leaving ``|0>`` behind);
2. zero-test ``R`` into ``A2`` and symmetry-test ``R`` plus ``q`` further
   copies into ``A1`` to clean the flags.

All registers are tracked in the orthonormal label basis
``{|0>, |psi>, c_2, ..., c_{d-1}}``. Every step maps a label configuration to
at most four configurations, so the joint state stays tiny. The ``q`` probe
copies used by one symmetric test are discarded afterwards; whatever leaked
into them is always the uniform W-like state over probe positions, so it is
kept as a single environment label.

The reservoir is a stack with an explicit height register: taking a copy
swaps ``R`` with the top filled slot, returning one swaps ``R`` with the
first empty slot. Several sessions may share one reservoir.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from . import resources
from .haar import sample_haar_state, sample_haar_state_perp_zero
from .linalg import (DensityMatrix, MultiRegisterState, PureState, coherent_record,
                     partial_trace, trace_distance)
from .rng import RngStream
from .symmetric import sym_record

ZERO, PSI = 0, 1
NO_ENV = -1
NORM_ATOL = 1e-9
# inputs draw from streams far above the per-psi ids
_INPUT_STREAM_BASE = 1 << 40


class ReservoirExhausted(RuntimeError):
    """A session asked for more copies than it was provisioned with."""


def _vector(state) -> np.ndarray:
    return np.asarray(state.amplitudes if isinstance(state, PureState) else state, dtype=complex).reshape(-1)


def _check_psi(psi) -> np.ndarray:
    v = _vector(psi)
    if v.shape[0] < 3:
        raise ValueError("swap oracle needs dimension at least 3")
    if abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ValueError("psi must be normalized")
    if abs(v[0]) > 1e-9:
        raise ValueError("psi must be orthogonal to |0>")
    return v


def swap_oracle_unitary(psi) -> np.ndarray:
    """``id - |0><0| - |psi><psi| + |0><psi| + |psi><0|``."""
    v = _check_psi(psi)
    d = v.shape[0]
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1
    return (np.eye(d) - np.outer(e0, e0) - np.outer(v, v.conj())
            + np.outer(e0, v.conj()) + np.outer(v, e0))


def label_basis(psi) -> np.ndarray:
    """Unitary whose columns are ``|0>``, ``|psi>`` and a fixed completion."""
    v = _check_psi(psi)
    d = v.shape[0]
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1
    rest = scipy.linalg.null_space(np.stack([e0, v]).conj())
    return np.column_stack([e0, v, rest])


@dataclass
class _Reservoir:
    capacity: int
    queries: int = 0


class SwapWorkspace:
    """Joint state of a reference ``E``, the query register ``R`` and simulators.

    Args:
        psi: oracle state, orthogonal to ``|0>``.
        input_state: amplitudes on ``E (x) R`` (``E`` outermost).
        ref_dim: dimension of the untouched reference ``E``.
    """

    def __init__(self, psi, input_state, ref_dim: int = 1):
        self.psi = _check_psi(psi)
        self.d = self.psi.shape[0]
        self.ref_dim = int(ref_dim)
        vec = _vector(input_state)
        if vec.shape[0] != self.ref_dim * self.d:
            raise ValueError("input length must be ref_dim * d")
        if abs(np.linalg.norm(vec) - 1) > 1e-9:
            raise ValueError("input state must be normalized")
        self.basis = label_basis(self.psi)
        coeffs = vec.reshape(self.ref_dim, self.d) @ self.basis.conj()
        # key: (e, r, reservoirs, ancillas); reservoirs hold (height, slots)
        self.terms: dict[tuple, complex] = {
            (e, r, (), ()): c for (e, r), c in np.ndenumerate(coeffs) if c != 0
        }
        self.reservoirs: list[_Reservoir] = []
        self.copies_used = 0
        self.norm_trace: list[float] = [self.norm()]

    def norm(self) -> float:
        return math.sqrt(sum(abs(c) ** 2 for c in self.terms.values()))

    def new_session(self, q: int, max_queries: int = 1,
                    share: "SimulatorSession | None" = None) -> "SimulatorSession":
        """Start a simulator, with its own reservoir unless ``share`` is given."""
        if q < 1:
            raise ValueError("q must be at least 1")
        if share is not None:
            if share.workspace is not self:
                raise ValueError("can only share a reservoir within one workspace")
            return SimulatorSession(self, share.reservoir, q)
        if max_queries < 1:
            raise ValueError("max_queries must be at least 1")
        k = len(self.reservoirs)
        self.reservoirs.append(_Reservoir(max_queries))
        # full slots first, then empty ones; height starts at the boundary
        slots = (PSI,) * max_queries + (ZERO,) * max_queries
        self.terms = {(e, r, res + ((max_queries, slots),), anc): c
                      for (e, r, res, anc), c in self.terms.items()}
        return SimulatorSession(self, k, q)

    def _map(self, fn) -> None:
        out: dict[tuple, complex] = defaultdict(complex)
        for key, amp in self.terms.items():
            for new_key, factor in fn(key):
                out[new_key] += amp * factor
        self.terms = {k: v for k, v in out.items() if abs(v) > 1e-300}
        self.norm_trace.append(self.norm())

    def reduced_state(self) -> DensityMatrix:
        """State of ``E (x) R`` in the computational basis, all else traced out."""
        rows: dict[tuple, int] = {}
        for (_, _, res, anc) in self.terms:
            rows.setdefault((res, anc), len(rows))
        resources.guard(len(rows) * self.ref_dim * self.d, what="reduced-state workspace")
        m = np.zeros((len(rows), self.ref_dim * self.d), dtype=complex)
        for (e, r, res, anc), c in self.terms.items():
            m[rows[(res, anc)], e * self.d + r] = c
        rho_labels = m.T @ m.conj()
        u = np.kron(np.eye(self.ref_dim), self.basis)
        rho = u @ rho_labels @ u.conj().T
        rho = (rho + rho.conj().T) / 2
        return DensityMatrix(rho, [self.ref_dim, self.d], validate=False)


def _set(t: tuple, i: int, v) -> tuple:
    return t[:i] + (v,) + t[i + 1:]


class SimulatorSession:
    """One simulator with its own (or a shared) reservoir and probe supply."""

    def __init__(self, workspace: SwapWorkspace, reservoir: int, q: int):
        self.workspace = workspace
        self.reservoir = reservoir
        self.q = q
        self.queries = 0

    @property
    def copies_per_query(self) -> int:
        return 2 * self.q + 1

    def query(self) -> None:
        """Answer one query on ``R`` in place."""
        ws = self.workspace
        res = ws.reservoirs[self.reservoir]
        if res.queries >= res.capacity:
            raise ReservoirExhausted(f"reservoir provisioned for {res.capacity} queries")
        res.queries += 1
        self.queries += 1
        ws.copies_used += self.copies_per_query
        resources.guard(len(ws.terms) * 16, itemsize=256, what="swap simulation terms")
        k, q = self.reservoir, self.q
        j = len(next(iter(ws.terms))[3])
        acc_sym, acc_sym_moved = 1 / (q + 1), math.sqrt(q) / (q + 1)
        rej_sym, rej_sym_moved = q / (q + 1), -math.sqrt(q) / (q + 1)

        def start(key):
            e, r, rs, anc = key
            yield (e, r, rs, anc + ((0, 0, NO_ENV, NO_ENV),)), 1

        def zero_test(flag):
            def step(key):
                e, r, rs, anc = key
                a = anc[j]
                if r == ZERO:
                    a = _set(a, flag, a[flag] ^ 1)
                yield (e, r, rs, _set(anc, j, a)), 1
            return step

        def take(key):
            e, r, rs, anc = key
            if anc[j][0] != 1:
                yield key, 1
                return
            h, slots = rs[k]
            if h == 0:
                raise ReservoirExhausted("no filled slot left to take from")
            new_slots = _set(slots, h - 1, r)
            yield (e, slots[h - 1], _set(rs, k, (h - 1, new_slots)), anc), 1

        def give(key):
            e, r, rs, anc = key
            if not (anc[j][0] == 0 and anc[j][1] == 1):
                yield key, 1
                return
            h, slots = rs[k]
            if h == len(slots):
                raise ReservoirExhausted("no empty slot left to return to")
            new_slots = _set(slots, h, r)
            yield (e, slots[h], _set(rs, k, (h + 1, new_slots)), anc), 1

        def sym_test(flag, env, control):
            def step(key):
                e, r, rs, anc = key
                a = anc[j]
                if control is not None and a[control] != 0:
                    yield key, 1
                    return
                flipped = _set(a, flag, a[flag] ^ 1)
                if r == PSI:
                    yield (e, r, rs, _set(anc, j, flipped)), 1
                    return
                moved_f = _set(flipped, env, r)
                moved_a = _set(a, env, r)
                yield (e, r, rs, _set(anc, j, flipped)), acc_sym
                yield (e, PSI, rs, _set(anc, j, moved_f)), acc_sym_moved
                yield (e, r, rs, _set(anc, j, a)), rej_sym
                yield (e, PSI, rs, _set(anc, j, moved_a)), rej_sym_moved
            return step

        # ancilla tuple layout: (A1, A2, env of first probes, env of second probes)
        for fn in (start, zero_test(0), take, sym_test(1, 2, control=0), give,
                   zero_test(1), sym_test(0, 3, control=None)):
            ws._map(fn)


def ideal_output(psi, input_state, ref_dim: int = 1) -> np.ndarray:
    """``(id_E (x) O_psi)`` applied to the input amplitudes."""
    u = swap_oracle_unitary(psi)
    vec = _vector(input_state).reshape(ref_dim, -1)
    return (vec @ u.T).reshape(-1)


def phase_twirl(rho: np.ndarray, psi, ref_dim: int = 1) -> np.ndarray:
    """Dephase ``R`` across the blocks ``|0>``, ``|psi>`` and their complement.

    This is the average over the phase of ``psi`` of the ideal output.
    """
    v = _check_psi(psi)
    d = v.shape[0]
    p0 = np.zeros((d, d), dtype=complex)
    p0[0, 0] = 1
    pp = np.outer(v, v.conj())
    out = np.zeros_like(rho)
    for p in (p0, pp, np.eye(d) - p0 - pp):
        big = np.kron(np.eye(ref_dim), p)
        out += big @ rho @ big
    return out


def simulate_swap_query(psi, q: int, input_state, ref_dim: int = 1) -> DensityMatrix:
    """Output on ``E (x) R`` of a single simulated query with a fresh simulator."""
    ws = SwapWorkspace(psi, input_state, ref_dim)
    ws.new_session(q).query()
    return ws.reduced_state()


def _as_density(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def swap_error_experiment(d: int, q: int, n_psi: int, n_inputs: int,
                          entangle_reference: bool = True, seed: int = 0,
                          n_average: int | None = None) -> dict:
    """Trace distance between simulated and exact single queries.

    Inputs are Haar random on ``E (x) R`` (``E`` of dimension ``d`` when
    ``entangle_reference``, else trivial) and shared by every ``psi``. Three
    comparisons are reported:

    * ``strict``: each ``(psi, input)`` pair against the exact output;
    * ``twirled``: each pair against the phase-twirled exact output;
    * ``haar_avg``: per input, simulated against exact outputs after both are
      averaged over ``n_average`` sampled ``psi``. The Monte Carlo error of
      this average is estimated from the two half-sample averages.

    Args:
        d: dimension of ``R``.
        q: copies per symmetric test.
        n_psi: oracle states for the per-pair comparisons.
        n_inputs: inputs, each run against every ``psi``.
        entangle_reference: attach a reference of dimension ``d``.
        seed: master seed; ``psi`` number ``a`` uses stream ``a + 1``.
        n_average: oracle states for the averaged comparison (``n_psi`` by
            default, at least 2).

    Returns:
        Summary statistics, the ``6/(q+1)`` bound and the raw distances.
    """
    n_average = max(n_psi, 2) if n_average is None else n_average
    if n_psi < 1 or n_inputs < 1 or n_average < 2:
        raise ValueError("need n_psi >= 1, n_inputs >= 1 and n_average >= 2")
    ref_dim = d if entangle_reference else 1
    dim = ref_dim * d
    resources.guard(4 * n_inputs * dim * dim, what="averaged output states")
    inputs = [sample_haar_state(dim, RngStream(seed, _INPUT_STREAM_BASE + i)).amplitudes
              for i in range(n_inputs)]
    strict = np.zeros((n_psi, n_inputs))
    twirled = np.zeros((n_psi, n_inputs))
    # per half: running sums of simulated and exact outputs
    sums = np.zeros((2, 2, n_inputs, dim, dim), dtype=complex)
    halves = (n_average // 2, n_average - n_average // 2)
    for a in range(max(n_psi, n_average)):
        psi = sample_haar_state_perp_zero(d, RngStream(seed, 1 + a).generator()).amplitudes
        for b, vec in enumerate(inputs):
            sim = simulate_swap_query(psi, q, vec, ref_dim).matrix
            ideal = _as_density(ideal_output(psi, vec, ref_dim))
            if a < n_psi:
                strict[a, b] = trace_distance(sim, ideal)
                twirled[a, b] = trace_distance(sim, phase_twirl(ideal, psi, ref_dim))
            if a < n_average:
                h = int(a >= halves[0])
                sums[h, 0, b] += sim
                sums[h, 1, b] += ideal
    total = sums.sum(axis=0) / n_average
    haar_avg = np.array([trace_distance(total[0, b], total[1, b]) for b in range(n_inputs)])
    # half-sample differences of (simulated - exact) scale like twice the standard error
    diff_a = (sums[0, 0] - sums[0, 1]) / halves[0]
    diff_b = (sums[1, 0] - sums[1, 1]) / halves[1]
    mc_error = np.array([0.25 * np.abs(np.linalg.eigvalsh(diff_a[b] - diff_b[b])).sum()
                         for b in range(n_inputs)])
    bound = 6 / (q + 1)
    return {
        "d": d, "q": q, "n_psi": n_psi, "n_inputs": n_inputs, "n_average": n_average,
        "entangle_reference": entangle_reference, "bound": bound,
        "max_td": float(strict.max()), "mean_td": float(strict.mean()),
        "max_td_twirled": float(twirled.max()), "mean_td_twirled": float(twirled.mean()),
        "max_td_haar_avg": float(haar_avg.max()), "mean_td_haar_avg": float(haar_avg.mean()),
        "haar_avg_mc_error": float(mc_error.max()),
        "within_bound_fraction": float((strict <= bound + 1e-6).mean()),
        "td_strict": strict, "td_twirled": twirled, "td_haar_avg": haar_avg,
    }


def _demo_input(d: int) -> np.ndarray:
    vec = np.zeros(d, dtype=complex)
    vec[0] = vec[1] = 1 / math.sqrt(2)
    return vec


def two_query_outputs(psi, q: int, mode: str) -> DensityMatrix:
    """Output of two consecutive simulated queries on ``(|0> + |1>)/sqrt(2)``.

    Args:
        psi: oracle state.
        q: copies per symmetric test.
        mode: ``single`` (one simulator answers both), ``separate`` (a fresh
            simulator per query) or ``shared`` (two simulators over one
            reservoir).
    """
    ws = SwapWorkspace(psi, _demo_input(len(_vector(psi))))
    if mode == "single":
        s = ws.new_session(q, max_queries=2)
        s.query()
        s.query()
    elif mode == "separate":
        ws.new_session(q).query()
        ws.new_session(q).query()
    elif mode == "shared":
        first = ws.new_session(q, max_queries=2)
        second = ws.new_session(q, share=first)
        first.query()
        second.query()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ws.reduced_state()


def two_simulator_demo(d: int, q: int, n_psi: int = 100, seed: int = 0) -> dict:
    """Two queries (``O_psi`` squared is the identity) answered three ways.

    Returns:
        Mean and max trace distance to the input for each mode, the
        single-simulator bound ``12/(q+1)`` and one record per ``psi``.
    """
    if n_psi < 1:
        raise ValueError("n_psi must be at least 1")
    target = _as_density(_demo_input(d))
    modes = ("single", "separate", "shared")
    records = []
    for a in range(n_psi):
        psi = sample_haar_state_perp_zero(d, RngStream(seed, a).generator()).amplitudes
        rec = {"psi": a}
        for mode in modes:
            rec[f"td_{mode}"] = trace_distance(two_query_outputs(psi, q, mode).matrix, target)
        records.append(rec)
    out = {"d": d, "q": q, "n_psi": n_psi, "bound_single": 12 / (q + 1)}
    for mode in modes:
        vals = [r[f"td_{mode}"] for r in records]
        out[f"td_{mode}_mean"] = float(np.mean(vals))
        out[f"td_{mode}_max"] = float(np.max(vals))
    out["records"] = records
    return out


def dense_swap_query(psi, q: int, input_state, ref_dim: int = 1) -> DensityMatrix:
    """Single simulated query on explicit registers (small sizes only).

    Independent of the label engine: every register, probe and the reservoir
    height is stored densely and the symmetric tests use the matrix-free
    symmetrizer.
    """
    v = _check_psi(psi)
    d = v.shape[0]
    zero = np.zeros(d, dtype=complex)
    zero[0] = 1
    height = np.array([0, 1, 0], dtype=complex)
    probes1 = [f"P{i}" for i in range(q)]
    probes2 = [f"Q{i}" for i in range(q)]
    parts = [("ER", _vector(input_state)), ("H", height), ("S0", v), ("S1", zero),
             ("A1", np.array([1, 0], dtype=complex)), ("A2", np.array([1, 0], dtype=complex))]
    parts += [(p, v) for p in probes1 + probes2]
    state = MultiRegisterState.from_states(parts)
    # split the joint input register into E and R
    regs = [("E", ref_dim), ("R", d)] + [(r.label, r.dim) for r in state.registers[1:]]
    state = MultiRegisterState(state.amplitudes, regs)

    p0 = np.outer(zero, zero)
    state = coherent_record(state, p0, ["R"], "A1")
    state = _controlled_slot_swap(state, take=True)
    state = sym_record(state, ["R"] + probes1, "A2", control=("A1", 0))
    state = _controlled_slot_swap(state, take=False)
    state = coherent_record(state, p0, ["R"], "A2")
    state = sym_record(state, ["R"] + probes2, "A1")
    return partial_trace(state, ["E", "R"])


def _controlled_slot_swap(state: MultiRegisterState, take: bool) -> MultiRegisterState:
    """Stack take (``A1 = 1``) or give (``A1 = 0, A2 = 1``) on slots ``S0, S1``."""
    dims = state.dims
    idx = np.indices(dims).reshape(len(dims), -1)
    ax = {lbl: state.axis(lbl) for lbl in ("R", "H", "S0", "S1", "A1", "A2")}
    amps = state.amplitudes
    if take:
        active = idx[ax["A1"]] == 1
    else:
        active = (idx[ax["A1"]] == 0) & (idx[ax["A2"]] == 1)
    new = idx.copy()
    for h in range(3):
        sel = active & (idx[ax["H"]] == h)
        slot = h - 1 if take else h
        if not 0 <= slot <= 1:
            if np.any(np.abs(amps[sel]) > 1e-12):
                raise ReservoirExhausted("dense reservoir out of range")
            continue
        s = ax[f"S{slot}"]
        new[ax["R"], sel] = idx[s, sel]
        new[s, sel] = idx[ax["R"], sel]
        new[ax["H"], sel] = h - 1 if take else h + 1
    out = np.zeros_like(amps)
    keep = np.abs(amps) > 0
    out[np.ravel_multi_index(tuple(new[:, keep]), dims)] = amps[keep]
    return MultiRegisterState(out, state.registers, check_norm=False)


__all__ = [
    "ReservoirExhausted", "SimulatorSession", "SwapWorkspace", "dense_swap_query",
    "ideal_output", "label_basis", "phase_twirl", "simulate_swap_query", "swap_error_experiment",
    "swap_oracle_unitary", "two_query_outputs", "two_simulator_demo",
]
