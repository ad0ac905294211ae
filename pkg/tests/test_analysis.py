import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monlyap.analysis import (
    DivergentGapError,
    fit_gap_extrapolation,
    measurement_only_gap,
    measurement_plus_probability,
    pauli_weight_profile,
    width_bound,
)
from monlyap.lyapunov import EffectiveHamiltonian

from oracles import pauli_string_dense


class TestMeasurementOnlyGap:
    def test_zero_at_no_measurement(self):
        assert measurement_only_gap(0.0) == 0.0

    def test_reference_point(self):
        # p = 0.9, gap = 0.4 ln 9
        assert abs(measurement_plus_probability(0.5) - 0.9) < 1e-15
        assert abs(measurement_only_gap(0.5) - 0.4 * math.log(9.0)) < 1e-12

    def test_projective_limit_diverges(self):
        with pytest.raises(DivergentGapError):
            measurement_only_gap(1.0)

    def test_rejects_out_of_range(self):
        for eta in (-0.1, 1.5):
            with pytest.raises(ValueError):
                measurement_only_gap(eta)

    def test_monotone_increasing_on_grid(self):
        grid = np.linspace(1e-4, 0.999, 300)
        vals = np.array([measurement_only_gap(e) for e in grid])
        assert np.all(np.diff(vals) > 0)


class TestWidthBound:
    def test_unitary_case_is_tight(self):
        check = width_bound(np.zeros(8), 0.0, 3)
        assert check.bound == 0.0
        assert check.width == 0.0
        assert check.satisfied

    def test_reference_bound_value(self):
        check = width_bound(np.array([0.0, 1.0]), 0.5, 4)
        assert abs(check.bound - 4 * math.log(3.0)) < 1e-12

    def test_projective_limit_flagged(self):
        check = width_bound(np.array([0.0, 5.0]), 1.0, 4)
        assert check.satisfied
        assert check.projective_limit
        assert math.isinf(check.bound)

    def test_accepts_effective_hamiltonian(self):
        ham = EffectiveHamiltonian(eta=0.5, num_qubits=2, time=10,
                                   block_length=2,
                                   spectrum=np.array([0.0, 0.1, 0.2, 0.3]),
                                   vectors=np.eye(4, dtype=complex))
        assert width_bound(ham, 0.5, 2).satisfied

    def test_violation_detected(self):
        check = width_bound(np.array([0.0, 100.0]), 0.1, 2)
        assert not check.satisfied


def synthetic_gaps(d0, alpha, beta, sizes):
    return [(L, d0 + alpha * beta ** (-L)) for L in sizes]


class TestGapFit:
    def test_exact_recovery(self):
        data = synthetic_gaps(0.05, 1.2, 3.0, range(10, 24, 2))
        fit = fit_gap_extrapolation(data, 3e-2)
        assert abs(fit.gap_inf - 0.05) < 1e-6
        assert abs(fit.alpha - 1.2) < 1e-6
        assert abs(fit.beta - 3.0) < 1e-6
        assert fit.phase == "gapped"
        assert fit.err_lo <= fit.gap_inf <= fit.err_hi

    def test_constant_data_yields_gapped_with_tiny_alpha(self):
        data = [(L, 0.07) for L in range(10, 24, 2)]
        fit = fit_gap_extrapolation(data, 3e-2)
        assert abs(fit.gap_inf - 0.07) < 1e-8
        assert abs(fit.alpha * 3.0 ** (-10)) < 1e-6
        assert fit.phase == "gapped"

    def test_gapless_data_straddles_zero(self):
        gen = np.random.default_rng(8)
        data = [(L, 1.4 * 2.2 ** (-L) * float(np.exp(gen.normal(0, 0.02))))
                for L in range(10, 24, 2)]
        fit = fit_gap_extrapolation(data, 3e-2)
        assert fit.err_lo < 0.0
        assert fit.phase == "gapless"

    def test_scale_consistency(self):
        data = synthetic_gaps(0.02, 0.9, 2.5, range(10, 24, 2))
        noisy = [(L, g * (1 + 0.01 * math.sin(L))) for L, g in data]
        base = fit_gap_extrapolation(noisy, 3e-2)
        k = 3.7
        scaled = fit_gap_extrapolation([(L, k * g) for L, g in noisy], 3e-2)
        assert abs(scaled.gap_inf - k * base.gap_inf) < 1e-6 * k
        assert abs(scaled.alpha - k * base.alpha) < 1e-5 * k
        assert abs(scaled.beta - base.beta) < 1e-6
        assert abs(scaled.err_lo - k * base.err_lo) < 2e-4 * k
        assert abs(scaled.err_hi - k * base.err_hi) < 2e-4 * k
        assert scaled.phase == base.phase

    def test_rejects_too_few_sizes(self):
        with pytest.raises(ValueError):
            fit_gap_extrapolation(synthetic_gaps(0.1, 1.0, 2.0, [10, 12, 14]),
                                  3e-2)

    def test_rejects_non_positive_gaps(self):
        data = synthetic_gaps(0.1, 1.0, 2.0, range(10, 20, 2))
        data[0] = (10, -0.01)
        with pytest.raises(ValueError):
            fit_gap_extrapolation(data, 3e-2)

    @given(st.floats(min_value=0.01, max_value=0.3),
           st.floats(min_value=0.2, max_value=2.0),
           st.floats(min_value=1.5, max_value=5.0))
    @settings(max_examples=15, deadline=None)
    def test_recovery_across_parameter_space(self, d0, alpha, beta):
        data = synthetic_gaps(d0, alpha, beta, range(10, 24, 2))
        fit = fit_gap_extrapolation(data, 3e-2)
        assert abs(fit.gap_inf - d0) < 1e-5 * max(1.0, d0)
        assert abs(fit.beta - beta) < 1e-4 * beta


def ham_from_matrix(matrix, eta=0.4, block_length=2, time=10):
    evals, evecs = np.linalg.eigh(matrix)
    return EffectiveHamiltonian(eta=eta, num_qubits=int(np.log2(len(evals))),
                                time=time, block_length=block_length,
                                spectrum=evals, vectors=evecs)


class TestPauliWeights:
    def test_sigma_z_on_first_site(self):
        z1 = pauli_string_dense(3, 0, 3)
        profile = pauli_weight_profile([ham_from_matrix(z1)])
        assert abs(profile.weights[2, 0] - 1.0) < 1e-12
        mask = np.ones((3, 3), dtype=bool)
        mask[2, 0] = False
        assert np.max(profile.weights[mask]) < 1e-12

    def test_identity_has_no_pauli_content(self):
        profile = pauli_weight_profile([ham_from_matrix(np.eye(8) * 2.7)])
        assert np.max(profile.weights) < 1e-12

    def test_invariant_under_identity_shift(self):
        gen = np.random.default_rng(3)
        m = gen.normal(size=(8, 8)) + 1j * gen.normal(size=(8, 8))
        m = (m + m.conj().T) / 2
        a = pauli_weight_profile([ham_from_matrix(m)])
        b = pauli_weight_profile([ham_from_matrix(m + 5.0 * np.eye(8))])
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-10)

    def test_traces_match_dense_strings(self):
        gen = np.random.default_rng(4)
        m = gen.normal(size=(8, 8)) + 1j * gen.normal(size=(8, 8))
        m = (m + m.conj().T) / 2
        profile = pauli_weight_profile([ham_from_matrix(m)])
        for pauli in (1, 2, 3):
            for r in range(3):
                dense = pauli_string_dense(pauli, r, 3)
                ref = abs(np.trace(dense @ m)) / 8
                assert abs(profile.weights[pauli - 1, r] - ref) < 1e-10

    def test_averaging_over_snapshots(self):
        z1 = pauli_string_dense(3, 0, 2)
        x01 = pauli_string_dense(1, 1, 2)
        profile = pauli_weight_profile([ham_from_matrix(z1, block_length=2),
                                        ham_from_matrix(x01, block_length=2)])
        assert profile.num_averaged == 2
        assert abs(profile.weights[2, 0] - 0.5) < 1e-12
        assert abs(profile.weights[0, 1] - 0.5) < 1e-12

    def test_rejects_mismatched_sizes(self):
        with pytest.raises(ValueError):
            pauli_weight_profile([
                ham_from_matrix(np.eye(4)),
                ham_from_matrix(np.eye(8)),
            ])

    def test_rejects_mismatched_block_lengths(self):
        with pytest.raises(ValueError, match="block length"):
            pauli_weight_profile([
                ham_from_matrix(np.eye(4), block_length=2),
                ham_from_matrix(np.eye(4), block_length=4),
            ])

    def test_rejects_empty_input(self):
        with pytest.raises(ValueError):
            pauli_weight_profile([])
