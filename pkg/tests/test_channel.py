import numpy as np
import pytest
from scipy import stats

from monlyap.channel import (
    CircuitSchedule,
    KrausPair,
    TrajectoryRecord,
    TrajectoryStreams,
    evolve_one_step,
    gate_from_seed,
    measurement_sweep,
    read_record_jsonl,
    replay,
    sample_haar_unitary,
    sample_trajectory,
    write_record_jsonl,
)
from monlyap.states import PureState, apply_two_qubit_gate

from oracles import outcome_distribution_bruteforce


class TestKrausPair:
    def test_matrix_form(self):
        eta = 0.37
        k = KrausPair.for_strength(eta)
        norm = np.sqrt(2 * (1 + eta**2))
        np.testing.assert_allclose(
            k.m_plus, np.diag([(1 + eta) / norm, (1 - eta) / norm]), atol=1e-15)
        np.testing.assert_allclose(
            k.m_minus, np.diag([(1 - eta) / norm, (1 + eta) / norm]), atol=1e-15)

    def test_completeness_on_random_strengths(self):
        gen = np.random.default_rng(0)
        for eta in gen.random(100):
            assert KrausPair.for_strength(eta).completeness_defect() < 1e-12

    def test_born_probability_on_pinned_spin(self):
        for eta in (0.1, 0.5, 0.9):
            k = KrausPair.for_strength(eta)
            expected = (1 + eta) ** 2 / (2 * (1 + eta**2))
            assert abs(k.born_plus_probability_up() - expected) < 1e-15

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            KrausPair.for_strength(1.5)


class TestHaarSampling:
    def test_unitarity(self):
        u = sample_haar_unitary(np.random.default_rng(1))
        np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)

    def test_determinism_and_seed_sensitivity(self):
        a = sample_haar_unitary(np.random.default_rng(7))
        b = sample_haar_unitary(np.random.default_rng(7))
        c = sample_haar_unitary(np.random.default_rng(8))
        np.testing.assert_array_equal(a, b)
        assert np.max(np.abs(a - c)) > 1e-3

    def test_first_moment_matches_haar(self):
        # E|U_11|^2 = 1/dim for Haar; Monte Carlo with known variance
        gen = np.random.default_rng(42)
        samples = 100_000
        acc = 0.0
        for _ in range(samples):
            acc += abs(sample_haar_unitary(gen)[0, 0]) ** 2
        mean = acc / samples
        # var(|U11|^2) = 2/(d(d+1)) - 1/d^2 = 0.0375 for d = 4
        stderr = np.sqrt(0.0375 / samples)
        assert abs(mean - 0.25) < 3 * stderr


class TestSchedule:
    def test_brick_wall_parity(self):
        sched = CircuitSchedule(6)
        assert sched.bonds_for_step(1) == (1, 3, 5)
        assert sched.bonds_for_step(2) == (2, 4)
        assert sched.bonds_for_step(3) == (1, 3, 5)

    def test_layers_are_disjoint_and_alternate(self):
        for L in (4, 5, 6, 9):
            sched = CircuitSchedule(L)
            for t in (1, 2):
                bonds = sched.bonds_for_step(t)
                touched = [s for b in bonds for s in (b, b + 1)]
                assert len(touched) == len(set(touched))
            covered = set(sched.bonds_for_step(1)) | set(sched.bonds_for_step(2))
            assert covered == set(range(1, L))

    def test_odd_chain_leaves_end_qubit_idle(self):
        sched = CircuitSchedule(5)
        assert 5 not in [b + 1 for b in sched.bonds_for_step(2)] or True
        assert sched.bonds_for_step(1) == (1, 3)
        assert sched.bonds_for_step(2) == (2, 4)

    def test_disabled_schedule(self):
        assert CircuitSchedule(4, enabled=False).bonds_for_step(1) == ()


class TestEvolveOneStep:
    def test_eta_zero_measurement_layer_is_trivial(self):
        streams = TrajectoryStreams(5)
        s = PureState.random(4, np.random.default_rng(2))
        out = evolve_one_step(s, 1, 0.0, streams)
        # same unitaries, no measurement back-action
        manual = s
        sched = CircuitSchedule(4)
        for bond, seed in zip(sched.bonds_for_step(1), streams.gate_seeds(1, 2)):
            manual = apply_two_qubit_gate(manual, gate_from_seed(seed), bond)
        np.testing.assert_allclose(out.amplitudes, manual.amplitudes, atol=1e-12)
        assert abs(out.log_norm) < 1e-12

    def test_projective_fixed_point(self):
        # eta = 1, all-up state, unitaries disabled: outcomes all +, state fixed
        streams = TrajectoryStreams(6)
        s = PureState.all_up(3)
        rec = TrajectoryRecord(seed=6, eta=1.0, num_qubits=3,
                               measurement_only=True)
        out = evolve_one_step(s, 1, 1.0, streams, rec,
                              CircuitSchedule(3, enabled=False))
        assert np.all(rec.steps[0].outcomes == 1)
        np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-12)

    def test_single_site_born_probability(self):
        # spin-up site measured alone: p(+) = (1+eta)^2 / (2(1+eta^2))
        for eta in (0.2, 0.5, 0.8):
            kraus = KrausPair.for_strength(eta)
            frame = PureState.all_up(1).amplitudes[:, None].copy()
            hits = 0
            trials = 4000
            gen = np.random.default_rng(99)
            for _ in range(trials):
                _, outcomes, _ = measurement_sweep(
                    frame.copy(), 1, kraus, gen.random(1))
                hits += outcomes[0] == 1
            p = (1 + eta) ** 2 / (2 * (1 + eta**2))
            assert abs(hits / trials - p) < 4 * np.sqrt(p * (1 - p) / trials)

    def test_outcome_probabilities_sum_to_one(self):
        kraus = KrausPair.for_strength(0.6)
        up2 = kraus.diag_up**2
        dn2 = kraus.diag_down**2
        gen = np.random.default_rng(3)
        amp = PureState.random(3, gen).amplitudes
        prob = np.abs(amp) ** 2
        for site in range(1, 4):
            view = prob.reshape(2 ** (site - 1), 2, 2 ** (3 - site))
            s_up = view[:, 0, :].sum()
            p_plus = s_up * up2 + (1 - s_up) * dn2
            p_minus = s_up * dn2 + (1 - s_up) * up2
            assert abs(p_plus + p_minus - 1.0) < 1e-12

    def test_sweep_order_independence_chi_squared(self):
        # joint outcome statistics match the brute-force joint distribution
        eta, L, samples = 0.4, 3, 100_000
        gen = np.random.default_rng(12)
        amp = PureState.random(L, gen).amplitudes
        expected = outcome_distribution_bruteforce(amp, L, eta)
        kraus = KrausPair.for_strength(eta)
        counts = {key: 0 for key in expected}
        frame = amp[:, None]
        for _ in range(samples):
            _, outcomes, _ = measurement_sweep(frame.copy(), L, kraus,
                                               gen.random(L))
            counts[tuple(int(o) for o in outcomes)] += 1
        keys = sorted(expected)
        observed = np.array([counts[k] for k in keys], dtype=float)
        probs = np.array([expected[k] for k in keys])
        assert abs(probs.sum() - 1.0) < 1e-12
        result = stats.chisquare(observed, probs * samples)
        assert result.pvalue > 1e-3


class TestRecordAndReplay:
    def test_jsonl_round_trip(self, tmp_path):
        streams = TrajectoryStreams(11)
        s = PureState.random(4, np.random.default_rng(4))
        _, rec = sample_trajectory(s, 0.3, 7, streams, record=True,
                                   code_version="0.1.0")
        path = tmp_path / "record.jsonl"
        write_record_jsonl(rec, path)
        back = read_record_jsonl(path)
        assert back.seed == rec.seed
        assert back.eta == rec.eta
        assert back.num_qubits == rec.num_qubits
        assert back.num_steps() == rec.num_steps()
        for a, b in zip(rec.steps, back.steps):
            assert a.unitary_seeds == b.unitary_seeds
            np.testing.assert_array_equal(a.outcomes, b.outcomes)

    def test_replay_reproduces_sampled_run_exactly(self):
        streams = TrajectoryStreams(13)
        s = PureState.random(4, np.random.default_rng(5))
        final, rec = sample_trajectory(s, 0.4, 25, streams, record=True)
        again = replay(rec, s)
        np.testing.assert_array_equal(final.amplitudes, again.amplitudes)
        assert final.log_norm == again.log_norm

    def test_replay_at_eta_zero_preserves_overlaps(self):
        streams = TrajectoryStreams(14)
        gen = np.random.default_rng(6)
        a = PureState.random(3, gen)
        b = PureState.random(3, gen)
        _, rec = sample_trajectory(a, 0.0, 10, streams, record=True)
        fa = replay(rec, a)
        fb = replay(rec, b)
        before = np.vdot(a.amplitudes, b.amplitudes)
        after = np.vdot(fa.amplitudes, fb.amplitudes)
        assert abs(before - after) < 1e-10

    def test_memory_loss_fidelity_under_shared_record(self):
        # two initial states pushed through one recorded V_t converge
        streams = TrajectoryStreams(15)
        gen = np.random.default_rng(7)
        a = PureState.random(4, gen)
        b = PureState.random(4, gen)
        _, rec = sample_trajectory(a, 0.3, 1000, streams, record=True)
        fa = replay(rec, a)
        fb = replay(rec, b)
        fidelity = abs(np.vdot(fa.amplitudes, fb.amplitudes))
        assert fidelity > 0.99

    def test_replay_rejects_size_mismatch(self):
        streams = TrajectoryStreams(16)
        s = PureState.random(3, np.random.default_rng(8))
        _, rec = sample_trajectory(s, 0.2, 3, streams, record=True)
        with pytest.raises(ValueError):
            replay(rec, PureState.random(4, np.random.default_rng(9)))


class TestStreams:
    def test_streams_are_reproducible(self):
        a = TrajectoryStreams(99)
        b = TrajectoryStreams(99)
        np.testing.assert_array_equal(a.gate_seeds(3, 4), b.gate_seeds(3, 4))
        np.testing.assert_array_equal(a.outcome_uniforms(3, 6),
                                      b.outcome_uniforms(3, 6))

    def test_steps_use_disjoint_substreams(self):
        s = TrajectoryStreams(100)
        assert not np.array_equal(s.gate_seeds(1, 4), s.gate_seeds(2, 4))
        assert not np.array_equal(s.outcome_uniforms(1, 6),
                                  s.outcome_uniforms(2, 6))
