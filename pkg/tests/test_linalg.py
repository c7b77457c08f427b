import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chrslab.linalg import (DensityMatrix, MeasurementEffect, MultiRegisterState, PureState,
                            apply_unitary_on, coherent_record, fidelity, is_unitary,
                            measure_binary, partial_trace, pauli_string, tensor_product,
                            trace_distance)
from conftest import random_density, random_state

seeds = st.integers(0, 2**32 - 1)


class TestStates:
    def test_pure_state_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            PureState([1, 1])

    def test_pure_state_normalize(self):
        s = PureState([3, 4j], normalize=True)
        assert np.isclose(np.linalg.norm(s.amplitudes), 1)
        assert s.n == 1

    def test_non_power_of_two_dimension(self):
        s = PureState.basis(1, 3)
        assert s.dim == 3 and s.n is None

    def test_zero_state(self):
        assert PureState.zero(3).amplitudes[0] == 1

    @pytest.mark.parametrize("bad", [
        np.array([[0.5, 0.1], [0.2, 0.5]]),   # not Hermitian
        np.diag([0.5, 0.6]),                   # trace
        np.diag([1.2, -0.2]),                  # negative eigenvalue
    ])
    def test_density_validation(self, bad):
        with pytest.raises(ValueError):
            DensityMatrix(bad)

    def test_density_default_dims(self):
        assert DensityMatrix.maximally_mixed(8).dims == (2, 2, 2)
        assert DensityMatrix.maximally_mixed(3).dims == (3,)

    def test_multi_register_length_check(self):
        with pytest.raises(ValueError):
            MultiRegisterState(np.ones(5) / math.sqrt(5), [("a", 2), ("b", 2)])

    def test_multi_register_duplicate_labels(self):
        with pytest.raises(ValueError):
            MultiRegisterState([1, 0, 0, 0], [("a", 2), ("a", 2)])

    def test_reorder_round_trip(self, rng):
        v = random_state(12, rng)
        s = MultiRegisterState(v, [("a", 2), ("b", 3), ("c", 2)])
        back = s.reorder(["c", "a", "b"]).reorder(["a", "b", "c"])
        assert np.allclose(back.amplitudes, v)


class TestTensorProduct:
    def test_pure_pure(self):
        out = tensor_product(PureState.basis(1, 2), PureState.basis(0, 2))
        assert isinstance(out, PureState)
        assert out.amplitudes[2] == 1

    def test_pure_mixed_gives_density(self):
        out = tensor_product(PureState.basis(0, 2), DensityMatrix.maximally_mixed(3))
        assert isinstance(out, DensityMatrix)
        assert out.dims == (2, 3)

    def test_operators(self):
        out = tensor_product(np.eye(2), pauli_string(1, "X"))
        assert np.allclose(out, pauli_string(2, "IX"))

    def test_mixed_kinds_raise(self):
        with pytest.raises(TypeError):
            tensor_product(PureState.basis(0, 2), np.eye(2))

    def test_multi_register_concatenates(self):
        a = MultiRegisterState.from_states([("a", PureState.basis(0, 2))])
        b = MultiRegisterState.from_states([("b", PureState.basis(1, 3))])
        assert tensor_product(a, b).labels == ("a", "b")


class TestPartialTrace:
    def test_product_state(self, rng):
        a, b = random_density(2, rng), random_density(3, rng)
        joint = DensityMatrix(np.kron(a, b), [2, 3])
        assert np.allclose(partial_trace(joint, [0]).matrix, a)
        assert np.allclose(partial_trace(joint, [1]).matrix, b)

    def test_bell_state_is_maximally_mixed(self):
        bell = MultiRegisterState(np.array([1, 0, 0, 1]) / math.sqrt(2), [("a", 2), ("b", 2)])
        assert np.allclose(partial_trace(bell, ["a"]).matrix, np.eye(2) / 2)

    def test_order_of_keep(self, rng):
        a, b = random_density(2, rng), random_density(3, rng)
        joint = DensityMatrix(np.kron(a, b), [2, 3])
        assert np.allclose(partial_trace(joint, [1, 0]).matrix, np.kron(b, a))

    def test_empty_keep_raises(self):
        with pytest.raises(ValueError):
            partial_trace(DensityMatrix.maximally_mixed(4), [])

    @given(seeds)
    def test_trace_preserved(self, seed):
        gen = np.random.default_rng(seed)
        s = MultiRegisterState(random_state(24, gen), [("a", 2), ("b", 3), ("c", 4)])
        for keep in (["a"], ["b", "c"], ["c", "a"]):
            assert np.isclose(np.trace(partial_trace(s, keep).matrix).real, 1)


class TestDistances:
    def test_orthogonal_pure_states(self):
        assert trace_distance(PureState.basis(0, 2), PureState.basis(1, 2)) == pytest.approx(1)
        assert fidelity(PureState.basis(0, 2), PureState.basis(1, 2)) == pytest.approx(0)

    def test_plus_versus_zero(self):
        plus = PureState([1, 1], normalize=True)
        assert trace_distance(plus, PureState.basis(0, 2)) == pytest.approx(1 / math.sqrt(2))
        assert fidelity(plus, PureState.basis(0, 2)) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            trace_distance(np.eye(2) / 2, np.eye(3) / 3)

    @given(seeds)
    def test_fuchs_van_de_graaf(self, seed):
        gen = np.random.default_rng(seed)
        rho, sigma = random_density(4, gen), random_density(4, gen)
        td, f = trace_distance(rho, sigma), fidelity(rho, sigma)
        assert 1 - math.sqrt(f) - 1e-9 <= td <= math.sqrt(1 - f) + 1e-9

    @given(seeds)
    def test_pure_state_identity(self, seed):
        gen = np.random.default_rng(seed)
        a, b = PureState(random_state(5, gen)), PureState(random_state(5, gen))
        assert trace_distance(a, b) == pytest.approx(math.sqrt(1 - fidelity(a, b)), abs=1e-9)

    @given(seeds)
    def test_unitary_invariance(self, seed):
        gen = np.random.default_rng(seed)
        rho, sigma = random_density(3, gen), random_density(3, gen)
        u, _ = np.linalg.qr(gen.normal(size=(3, 3)) + 1j * gen.normal(size=(3, 3)))
        rot = lambda m: u @ m @ u.conj().T
        assert trace_distance(rot(rho), rot(sigma)) == pytest.approx(trace_distance(rho, sigma), abs=1e-9)
        assert fidelity(rot(rho), rot(sigma)) == pytest.approx(fidelity(rho, sigma), abs=1e-8)

    @given(seeds)
    def test_partial_trace_contracts(self, seed):
        gen = np.random.default_rng(seed)
        rho = DensityMatrix(random_density(6, gen), [2, 3])
        sigma = DensityMatrix(random_density(6, gen), [2, 3])
        assert trace_distance(partial_trace(rho, [1]), partial_trace(sigma, [1])) <= trace_distance(rho, sigma) + 1e-12


class TestOperators:
    def test_pauli_algebra(self):
        x, y, z = (pauli_string(1, p) for p in "XYZ")
        assert np.allclose(x @ y, 1j * z)
        assert all(is_unitary(p) for p in (x, y, z))

    def test_pauli_string_order(self):
        # qubit 0 is the most significant
        assert np.allclose(pauli_string(2, "XI") @ np.eye(4)[:, 0], np.eye(4)[:, 2])

    def test_pauli_bad_label(self):
        with pytest.raises(ValueError):
            pauli_string(2, "XQ")

    def test_apply_unitary_targets(self):
        s = MultiRegisterState.from_states([("a", PureState.basis(0, 2)), ("b", PureState.basis(0, 2))])
        out = apply_unitary_on(s, pauli_string(1, "X"), ["b"])
        assert out.amplitudes[1] == 1

    def test_apply_rejects_nonunitary(self):
        s = MultiRegisterState.from_states([("a", PureState.basis(0, 2))])
        with pytest.raises(ValueError):
            apply_unitary_on(s, np.diag([1, 0.5]), ["a"])


class TestMeasurement:
    def test_effect_bounds(self):
        with pytest.raises(ValueError):
            MeasurementEffect(np.diag([1.5, 0]))

    def test_collapse_branches(self):
        plus = MultiRegisterState(np.array([1, 1]) / math.sqrt(2), [("a", 2)])
        res = measure_binary(plus, MeasurementEffect(np.diag([1, 0])), ["a"])
        assert res.p_accept == pytest.approx(0.5)
        assert np.allclose(res.post_accept.amplitudes, [1, 0])
        assert np.allclose(res.post_reject.amplitudes, [0, 1])

    def test_coherent_mode(self):
        plus = MultiRegisterState(np.array([1, 1]) / math.sqrt(2), [("a", 2)])
        res = measure_binary(plus, MeasurementEffect(np.diag([1, 0])), ["a"], mode="coherent")
        # |0>|1> + |1>|0>, ancilla innermost with 1 = accept
        assert np.allclose(res.joint.amplitudes, np.array([0, 1, 1, 0]) / math.sqrt(2))

    def test_coherent_requires_projector(self):
        s = MultiRegisterState([1, 0], [("a", 2)])
        with pytest.raises(ValueError):
            measure_binary(s, MeasurementEffect(np.eye(2) / 2), ["a"], mode="coherent")

    def test_coherent_record_is_involution(self, rng):
        s = MultiRegisterState(np.kron(random_state(3, rng), [1, 0]), [("r", 3), ("f", 2)])
        p = np.diag([1, 0, 0])
        twice = coherent_record(coherent_record(s, p, ["r"], "f"), p, ["r"], "f")
        assert np.allclose(twice.amplitudes, s.amplitudes)

    @given(seeds)
    def test_probabilities_sum_to_one(self, seed):
        gen = np.random.default_rng(seed)
        s = MultiRegisterState(random_state(6, gen), [("a", 2), ("b", 3)])
        e = MeasurementEffect(random_density(3, gen))
        res = measure_binary(s, e, ["b"])
        rho_b = partial_trace(s, ["b"]).matrix
        assert res.p_accept == pytest.approx(np.trace(e.operator @ rho_b).real, abs=1e-10)
