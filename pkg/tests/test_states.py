import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monlyap.states import (
    LN2,
    PureState,
    TrajectoryAnnihilatedError,
    apply_single_site_operator,
    apply_two_qubit_gate,
    half_chain_entropy_svd,
    partial_trace,
    subsystem_entropy,
    x_magnetization,
)
from monlyap.channel import sample_haar_unitary

from oracles import embed_gate, partial_trace_bruteforce

SWAP = np.array([[1, 0, 0, 0],
                 [0, 0, 1, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1]], dtype=complex)


def rng(seed=0):
    return np.random.default_rng(seed)


def bell_pair():
    amp = np.zeros(4, dtype=complex)
    amp[0b00] = amp[0b11] = 1 / np.sqrt(2)
    return PureState(2, amp)


class TestPureState:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="normalized"):
            PureState(2, np.ones(4))

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            PureState(3, np.array([1.0, 0.0]))

    def test_basis_state_bit_convention(self):
        # site 1 is the most significant bit
        s = PureState.computational_basis(3, "100")
        assert s.amplitudes[0b100] == 1.0


class TestTwoQubitGate:
    def test_identity_gate_fixes_state(self):
        s = PureState.random(3, rng(1))
        out = apply_two_qubit_gate(s, np.eye(4), 2)
        np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-15)

    def test_swap_permutes_basis(self):
        s = PureState.computational_basis(2, "01")
        out = apply_two_qubit_gate(s, SWAP, 1)
        assert abs(out.amplitudes[0b10] - 1.0) < 1e-15

    def test_norm_preserved_by_random_unitary(self):
        s = PureState.random(4, rng(2))
        out = apply_two_qubit_gate(s, sample_haar_unitary(rng(3)), 2)
        assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-12

    def test_site_out_of_range(self):
        s = PureState.random(3, rng(4))
        with pytest.raises(ValueError):
            apply_two_qubit_gate(s, np.eye(4), 3)

    def test_debug_flag_rejects_non_unitary(self, monkeypatch):
        from monlyap import tolerances
        monkeypatch.setattr(tolerances, "DEBUG_CHECKS", True)
        s = PureState.random(2, rng(5))
        with pytest.raises(ValueError, match="unitary"):
            apply_two_qubit_gate(s, np.diag([1.0, 1.0, 1.0, 0.5]), 1)

    @pytest.mark.parametrize("num_qubits", [2, 3, 4, 5, 6])
    def test_agrees_with_dense_kron_construction(self, num_qubits):
        gen = rng(num_qubits)
        s = PureState.random(num_qubits, gen)
        for left in range(1, num_qubits):
            gate = sample_haar_unitary(gen)
            fast = apply_two_qubit_gate(s, gate, left).amplitudes
            dense = embed_gate(gate, left, num_qubits) @ s.amplitudes
            np.testing.assert_allclose(fast, dense, atol=1e-12)

    def test_norm_drift_over_gate_sequence(self):
        gen = rng(6)
        s = PureState.random(5, gen)
        for _ in range(200):
            left = int(gen.integers(1, 5))
            s = apply_two_qubit_gate(s, sample_haar_unitary(gen), left)
        assert abs(np.linalg.norm(s.amplitudes) - 1.0) < 1e-10


class TestSingleSiteOperator:
    def test_identity_has_zero_weight(self):
        s = PureState.random(3, rng(7))
        out, logw = apply_single_site_operator(s, np.eye(2), 2)
        assert abs(logw) < 1e-12
        np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-12)

    def test_projector_on_occupied_branch(self):
        s = PureState.computational_basis(2, "00")
        out, logw = apply_single_site_operator(s, np.diag([1.0, 0.0]), 1)
        assert abs(logw) < 1e-12
        np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-12)

    def test_projector_on_equal_superposition(self):
        amp = np.array([1.0, 1.0]) / np.sqrt(2)
        s = PureState(1, amp.astype(complex))
        out, logw = apply_single_site_operator(s, np.diag([1.0, 0.0]), 1)
        assert abs(logw - np.log(1 / np.sqrt(2))) < 1e-12
        assert abs(out.amplitudes[0] - 1.0) < 1e-12
        assert abs(out.log_norm - logw) < 1e-15

    def test_annihilated_branch_raises(self):
        s = PureState.computational_basis(1, "1")
        with pytest.raises(TrajectoryAnnihilatedError):
            apply_single_site_operator(s, np.diag([1.0, 0.0]), 1)


class TestPartialTrace:
    def test_product_state_single_site(self):
        s = PureState.computational_basis(3, "000")
        rho = partial_trace(s, [2])
        np.testing.assert_allclose(rho.matrix, np.diag([1.0, 0.0]), atol=1e-14)

    def test_bell_state_is_maximally_mixed(self):
        rho = partial_trace(bell_pair(), [1])
        np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-14)

    def test_matches_bruteforce_summation(self):
        s = PureState.random(3, rng(8))
        rho = partial_trace(s, [1, 2])
        ref = partial_trace_bruteforce(s.amplitudes, 3, [1, 2])
        np.testing.assert_allclose(rho.matrix, ref, atol=1e-12)

    @pytest.mark.parametrize("keep", [[1], [3], [1, 3], [2, 4], [1, 2, 4]])
    def test_matches_bruteforce_on_varied_cuts(self, keep):
        s = PureState.random(4, rng(sum(keep)))
        rho = partial_trace(s, keep)
        ref = partial_trace_bruteforce(s.amplitudes, 4, keep)
        np.testing.assert_allclose(rho.matrix, ref, atol=1e-12)

    def test_rejects_bad_site_lists(self):
        s = PureState.random(3, rng(9))
        with pytest.raises(ValueError):
            partial_trace(s, [])
        with pytest.raises(ValueError):
            partial_trace(s, [2, 2])
        with pytest.raises(ValueError):
            partial_trace(s, [3, 1])


class TestEntropy:
    def test_product_state_has_zero_entropy(self):
        s = PureState.computational_basis(4, "0101")
        for cut in ([1], [1, 2], [2, 3, 4]):
            assert subsystem_entropy(s, cut) < 1e-12

    def test_bell_pair_single_site(self):
        assert abs(subsystem_entropy(bell_pair(), [1]) - LN2) < 1e-12

    def test_ghz_half_cut(self):
        amp = np.zeros(16, dtype=complex)
        amp[0b0000] = amp[0b1111] = 1 / np.sqrt(2)
        s = PureState(4, amp)
        assert abs(subsystem_entropy(s, [1, 2]) - LN2) < 1e-12

    def test_complement_symmetry(self):
        s = PureState.random(5, rng(10))
        for cut in ([1], [1, 2], [2, 4], [1, 3, 5]):
            comp = [x for x in range(1, 6) if x not in cut]
            assert abs(subsystem_entropy(s, cut)
                       - subsystem_entropy(s, comp)) < 1e-9

    @pytest.mark.parametrize("num_qubits", [2, 4, 6])
    def test_svd_route_matches_eigenvalue_route(self, num_qubits):
        s = PureState.random(num_qubits, rng(num_qubits + 20))
        half = list(range(1, num_qubits // 2 + 1))
        assert abs(half_chain_entropy_svd(s)
                   - subsystem_entropy(s, half)) < 1e-10

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_entropy_bounds_on_random_states(self, seed):
        s = PureState.random(4, np.random.default_rng(seed))
        val = subsystem_entropy(s, [1, 2])
        assert -1e-12 <= val <= 2 * LN2 + 1e-9


class TestXMagnetization:
    def test_plus_state_is_extensive(self):
        plus = np.full(8, 1 / np.sqrt(8), dtype=complex)
        s = PureState(3, plus)
        assert abs(x_magnetization(s) - 3.0) < 1e-12

    def test_matches_dense_operator(self):
        s = PureState.random(4, rng(11))
        from oracles import SIGMA, embed_single_site
        dense = sum(embed_single_site(SIGMA[1], site, 4) for site in range(1, 5))
        ref = np.real(np.vdot(s.amplitudes, dense @ s.amplitudes))
        assert abs(x_magnetization(s) - ref) < 1e-12
