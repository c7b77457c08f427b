import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chrslab.symmetric import (MAX_SYM_REGISTERS, apply_sym, explicit_sym_projector, product_state, sym_project,
                               sym_record, symmetric_dimension)
from chrslab.linalg import MultiRegisterState
from conftest import random_state

SIZES = [(2, 2), (2, 3), (3, 2), (4, 2), (3, 3)]


@pytest.mark.parametrize("d,m", SIZES)
def test_explicit_projector_properties(d, m):
    p = explicit_sym_projector(d, m)
    assert np.allclose(p @ p, p, atol=1e-12)
    assert np.allclose(p, p.conj().T)
    assert round(np.trace(p).real) == symmetric_dimension(d, m) == np.linalg.matrix_rank(p)


@pytest.mark.parametrize("d,m", SIZES)
def test_recursion_matches_explicit(d, m, rng):
    vecs = [random_state(d, rng) for _ in range(m)]
    state = product_state(vecs)
    out = apply_sym(state, [f"r{i}" for i in range(m)])
    assert np.allclose(out, explicit_sym_projector(d, m) @ state.amplitudes, atol=1e-12)


def test_rank_formula():
    # l + 1 registers of dimension d.
    for d in (2, 3, 4):
        for l in (1, 2, 3):
            assert symmetric_dimension(d, l + 1) == math.comb(d + l, l + 1)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_two_register_closed_form(seed, d):
    gen = np.random.default_rng(seed)
    a, b = random_state(d, gen), random_state(d, gen)
    res = sym_project(product_state([a, b]), ["r0", "r1"])
    assert res.p_sym == pytest.approx((1 + abs(np.vdot(a, b)) ** 2) / 2)
    ab, ba = np.kron(a, b), np.kron(b, a)
    sym = (ab + ba) / np.linalg.norm(ab + ba)
    anti = (ab - ba) / np.linalg.norm(ab - ba)
    assert abs(np.vdot(sym, res.post_sym.amplitudes)) == pytest.approx(1)
    assert abs(np.vdot(anti, res.post_antisym.amplitudes)) == pytest.approx(1)


def test_orthogonal_inputs_give_half():
    res = sym_project(product_state([np.array([1, 0]), np.array([0, 1])]), ["r0", "r1"])
    assert res.p_sym == pytest.approx(0.5)


def test_symmetric_input_always_accepted(rng):
    v = random_state(3, rng)
    res = sym_project(product_state([v, v, v]), ["r0", "r1", "r2"])
    assert res.p_sym == pytest.approx(1)
    assert res.post_antisym is None


def test_untouched_register_is_spectator(rng):
    vecs = [random_state(2, rng), random_state(3, rng), random_state(2, rng)]
    state = product_state(vecs, ["a", "x", "b"])
    res = sym_project(state, ["a", "b"])
    assert res.p_sym == pytest.approx((1 + abs(np.vdot(vecs[0], vecs[2])) ** 2) / 2)


def test_mismatched_dimensions_raise(rng):
    state = product_state([random_state(2, rng), random_state(3, rng)])
    with pytest.raises(ValueError):
        apply_sym(state, ["r0", "r1"])


def test_duplicate_and_count_checks(rng):
    state = product_state([random_state(2, rng)] * 2)
    with pytest.raises(ValueError):
        apply_sym(state, ["r0", "r0"])
    with pytest.raises(ValueError):
        apply_sym(state, [])
    assert MAX_SYM_REGISTERS >= 3


def test_sym_record_flips_ancilla(rng):
    a, b = random_state(2, rng), random_state(2, rng)
    state = product_state([a, b, np.array([1, 0])], ["r0", "r1", "anc"])
    out = sym_record(state, ["r0", "r1"], "anc")
    t = out.tensor()
    p1 = np.sum(np.abs(t[:, :, 1]) ** 2)
    assert p1 == pytest.approx((1 + abs(np.vdot(a, b)) ** 2) / 2)
    assert np.linalg.norm(out.amplitudes) == pytest.approx(1)


def test_sym_record_control(rng):
    a, b = random_state(2, rng), random_state(2, rng)
    state = product_state([a, b, np.array([1, 0]), np.array([0, 1])], ["r0", "r1", "anc", "ctl"])
    out = sym_record(state, ["r0", "r1"], "anc", control=("ctl", 0))
    assert np.allclose(out.amplitudes, state.amplitudes)


def test_sym_record_needs_qubit(rng):
    state = product_state([random_state(2, rng), random_state(2, rng), random_state(3, rng)], ["r0", "r1", "anc"])
    with pytest.raises(ValueError):
        sym_record(state, ["r0", "r1"], "anc")


def test_entangled_input(rng):
    amps = random_state(9, rng)
    state = MultiRegisterState(amps, [("a", 3), ("b", 3)])
    res = sym_project(state, ["a", "b"])
    p = explicit_sym_projector(3, 2)
    assert res.p_sym == pytest.approx(np.vdot(amps, p @ amps).real)
