import numpy as np
import pytest
from hypothesis import given, strategies as st

from chrslab.haar import sample_haar_state, sample_haar_state_perp_zero
from chrslab.linalg import trace_distance
from chrslab.rng import RngStream
from chrslab.swap_sim import (NORM_ATOL, ReservoirExhausted, SwapWorkspace, dense_swap_query, ideal_output,
                              label_basis, phase_twirl, simulate_swap_query, swap_error_experiment,
                              swap_oracle_unitary, two_query_outputs, two_simulator_demo)


def _psi(d, seed):
    return sample_haar_state_perp_zero(d, RngStream(seed)).amplitudes


def _orthogonal_to_both(psi, seed):
    d = psi.shape[0]
    chi = sample_haar_state(d, RngStream(seed, 1)).amplitudes.copy()
    chi[0] = 0
    chi -= np.vdot(psi, chi) * psi
    return chi / np.linalg.norm(chi)


def _pure(v):
    return np.outer(v, v.conj())


class TestOracle:
    @pytest.mark.parametrize("seed", range(20))
    def test_unitary_hermitian_involution(self, seed):
        u = swap_oracle_unitary(_psi(8, seed))
        assert np.allclose(u @ u.conj().T, np.eye(8), atol=1e-12)
        assert np.allclose(u, u.conj().T, atol=1e-12)
        assert np.allclose(u @ u, np.eye(8), atol=1e-12)

    def test_action(self):
        psi = _psi(5, 1)
        u = swap_oracle_unitary(psi)
        zero = np.eye(5)[0]
        assert np.allclose(u @ zero, psi)
        assert np.allclose(u @ psi, zero)
        chi = _orthogonal_to_both(psi, 2)
        assert np.allclose(u @ chi, chi)

    def test_label_basis_unitary(self):
        b = label_basis(_psi(6, 3))
        assert np.allclose(b.conj().T @ b, np.eye(6), atol=1e-12)

    @pytest.mark.parametrize("psi", [np.ones(4) / 2, np.array([0, 1, 1, 0]), np.array([0, 1])])
    def test_invalid_psi(self, psi):
        with pytest.raises(ValueError):
            swap_oracle_unitary(psi)


class TestSingleQuery:
    @pytest.mark.parametrize("q", [1, 3, 9])
    def test_zero_maps_to_psi_exactly(self, q):
        psi = _psi(4, 5)
        out = simulate_swap_query(psi, q, np.eye(4)[0])
        assert np.allclose(out.matrix, _pure(psi), atol=1e-12)

    @pytest.mark.parametrize("q", [1, 3, 9])
    def test_psi_input_distance(self, q):
        psi = _psi(4, 6)
        out = simulate_swap_query(psi, q, psi)
        assert trace_distance(out.matrix, _pure(np.eye(4)[0])) == pytest.approx(2 * q / (q + 1) ** 2, abs=1e-12)

    @pytest.mark.parametrize("q", [1, 3, 9])
    def test_complement_input_within_bound(self, q):
        psi = _psi(4, 7)
        chi = _orthogonal_to_both(psi, 7)
        out = simulate_swap_query(psi, q, chi)
        assert trace_distance(out.matrix, _pure(chi)) <= 6 / (q + 1)

    @pytest.mark.parametrize("d,q,ref", [(3, 1, 1), (3, 2, 1), (3, 2, 2), (4, 1, 2)])
    def test_sparse_matches_dense(self, d, q, ref):
        psi = _psi(d, 8)
        inp = sample_haar_state(ref * d, RngStream(8, 2)).amplitudes
        sparse = simulate_swap_query(psi, q, inp, ref).matrix
        dense = dense_swap_query(psi, q, inp, ref).matrix
        assert np.allclose(sparse, dense, atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_norm_preserved(self, seed, q):
        psi = _psi(4, seed)
        inp = sample_haar_state(8, RngStream(seed, 3)).amplitudes
        ws = SwapWorkspace(psi, inp, 2)
        ws.new_session(q).query()
        assert max(abs(n - 1) for n in ws.norm_trace) <= NORM_ATOL
        assert ws.copies_used == 2 * q + 1
        assert ws.reduced_state().matrix.trace().real == pytest.approx(1)

    def test_reservoir_exhaustion(self):
        ws = SwapWorkspace(_psi(4, 9), np.eye(4)[1])
        s = ws.new_session(2)
        s.query()
        with pytest.raises(ReservoirExhausted):
            s.query()

    def test_bad_session_arguments(self):
        ws = SwapWorkspace(_psi(4, 9), np.eye(4)[1])
        with pytest.raises(ValueError):
            ws.new_session(0)
        other = SwapWorkspace(_psi(4, 9), np.eye(4)[1]).new_session(1)
        with pytest.raises(ValueError):
            ws.new_session(1, share=other)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            SwapWorkspace(_psi(4, 9), np.ones(4))
        with pytest.raises(ValueError):
            SwapWorkspace(_psi(4, 9), np.eye(3)[0])


def test_phase_twirl_of_ideal_output_is_psi_phase_average():
    psi = _psi(4, 10)
    inp = sample_haar_state(8, RngStream(10, 1)).amplitudes
    avg = np.zeros((8, 8), dtype=complex)
    phases = np.exp(2j * np.pi * np.arange(16) / 16)
    for ph in phases:
        avg += _pure(ideal_output(ph * psi, inp, 2)) / 16
    twirled = phase_twirl(_pure(ideal_output(psi, inp, 2)), psi, 2)
    # the three blocks pick up phases e^{i phi}, e^{-i phi} and 1
    assert np.allclose(twirled, avg, atol=1e-12)


def test_mean_error_decreases_with_q():
    means = [swap_error_experiment(4, q, 6, 4, seed=3)["mean_td"] for q in (1, 3, 5, 9)]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_twirled_error_within_bound():
    out = swap_error_experiment(4, 9, 10, 6, seed=4)
    assert out["max_td_twirled"] <= out["bound"]
    assert out["max_td_twirled"] <= out["max_td"] + 1e-12


def test_error_experiment_is_deterministic():
    a = swap_error_experiment(4, 3, 3, 2, seed=5)
    b = swap_error_experiment(4, 3, 3, 2, seed=5)
    assert a["max_td"] == b["max_td"] and np.array_equal(a["td_strict"], b["td_strict"])


@pytest.mark.xfail(strict=True, reason="simulator output stays entangled with the reservoir, which dephases R "
                                      "across the |0>, |psi> and complement blocks for every fixed psi")
def test_strict_per_query_error_within_bound():
    out = swap_error_experiment(4, 9, 10, 6, seed=4)
    assert out["max_td"] <= 6 / (9 + 1) + 1e-6


class TestTwoSimulators:
    def test_demo_bounds(self):
        out = two_simulator_demo(4, 9, n_psi=20, seed=1)
        assert out["td_single_max"] <= out["bound_single"]
        assert out["td_separate_mean"] >= 0.2

    def test_shared_equals_single(self):
        psi = _psi(4, 12)
        a = two_query_outputs(psi, 3, "single").matrix
        b = two_query_outputs(psi, 3, "shared").matrix
        assert np.allclose(a, b, atol=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            two_query_outputs(_psi(4, 12), 3, "parallel")
