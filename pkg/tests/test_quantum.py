import numpy as np
import pytest

from seqdim.quantum import (
    Behavior,
    behavior_of,
    born_probability,
    haar_unitary,
    moment_matrix,
    random_measurements,
    random_state,
    sample_behavior,
    sequence_operator,
    MeasurementSet,
    StatePrep,
)
from seqdim.words import IDENTITY, ZERO, Scenario, enumerate_words, product


def _fixed_computational_measurements(scenario, d):
    """Test hook: every setting measures the computational basis."""
    eye = np.eye(d, dtype=complex)
    projs = []
    bins = []
    per = d // scenario.o
    for s in range(scenario.m):
        setting = []
        setting_bins = []
        for r in range(scenario.o):
            lo = r * per
            hi = (r + 1) * per if r < scenario.o - 1 else d
            idx = list(range(lo, hi))
            p = np.zeros((d, d), dtype=complex)
            for j in idx:
                p[j, j] = 1.0
            setting.append(p)
            setting_bins.append(tuple(idx))
        projs.append(tuple(setting))
        bins.append(tuple(setting_bins))
    return MeasurementSet(scenario=scenario, dim=d, projectors=tuple(projs), bins=tuple(bins))


class TestHaar:
    def test_unitarity(self):
        rng = np.random.default_rng(0)
        for d in (1, 2, 5):
            u = haar_unitary(d, rng)
            assert np.max(np.abs(u.conj().T @ u - np.eye(d))) < 1e-12

    def test_d1_unit_modulus(self):
        u = haar_unitary(1, np.random.default_rng(3))
        assert abs(abs(u[0, 0]) - 1) < 1e-12

    def test_rejects_zero_dimension(self):
        with pytest.raises(ValueError):
            haar_unitary(0, np.random.default_rng(0))

    def test_determinism(self):
        u1 = haar_unitary(4, np.random.default_rng(9))
        u2 = haar_unitary(4, np.random.default_rng(9))
        assert np.array_equal(u1, u2)

    def test_first_moment(self):
        # analytic Haar moment: E|U_00|^2 = 1/d
        rng = np.random.default_rng(1)
        d = 3
        vals = [abs(haar_unitary(d, rng)[0, 0]) ** 2 for _ in range(10_000)]
        assert abs(np.mean(vals) - 1 / d) < 0.01


class TestRandomState:
    def test_trace_and_purity(self):
        rng = np.random.default_rng(2)
        for d in (1, 2, 4):
            rho = random_state(d, rng).rho
            assert abs(np.trace(rho) - 1) < 1e-10
            assert np.max(np.abs(rho @ rho - rho)) < 1e-10

    def test_rank_one_spectrum(self):
        rho = random_state(4, np.random.default_rng(5)).rho
        eigs = np.sort(np.linalg.eigvalsh(rho))
        assert abs(eigs[-1] - 1) < 1e-10
        assert np.max(np.abs(eigs[:-1])) < 1e-10

    def test_overlap_moment(self):
        rng = np.random.default_rng(8)
        d = 4
        vals = [random_state(d, rng).rho[0, 0].real for _ in range(1000)]
        assert abs(np.mean(vals) - 1 / d) < 0.05


class TestRandomMeasurements:
    @pytest.mark.parametrize("d,o", [(2, 2), (3, 2), (4, 3), (3, 3), (2, 3)])
    def test_projector_invariants(self, d, o):
        scenario = Scenario(2, 2, o)
        rng = np.random.default_rng(13)
        ms = random_measurements(scenario, d, rng)
        eye = np.eye(d)
        for s in range(scenario.m):
            total = sum(ms.projectors[s])
            assert np.max(np.abs(total - eye)) < 1e-10
            for r in range(o):
                p = ms.projectors[s][r]
                assert np.max(np.abs(p @ p - p)) < 1e-10
                assert np.linalg.matrix_rank(p, tol=1e-8) == len(ms.bins[s][r])
                for r2 in range(r + 1, o):
                    assert np.max(np.abs(p @ ms.projectors[s][r2])) < 1e-10

    def test_bins_partition(self):
        scenario = Scenario(3, 2, 3)
        ms = random_measurements(scenario, 4, np.random.default_rng(1))
        for s in range(3):
            merged = sorted(j for b in ms.bins[s] for j in b)
            assert merged == list(range(4))
            assert all(len(b) >= 1 for b in ms.bins[s])

    def test_rank_one_when_d_equals_o(self):
        scenario = Scenario(2, 2, 3)
        ms = random_measurements(scenario, 3, np.random.default_rng(2))
        for s in range(2):
            for r in range(3):
                assert len(ms.bins[s][r]) == 1

    def test_small_dimension_has_empty_bins(self):
        scenario = Scenario(2, 2, 3)
        ms = random_measurements(scenario, 2, np.random.default_rng(3))
        assert ms.has_empty_bins


class TestSequenceOperator:
    def test_identity_word(self):
        scenario = Scenario(2, 2, 2)
        ms = random_measurements(scenario, 3, np.random.default_rng(0))
        assert np.array_equal(sequence_operator(ms, IDENTITY), np.eye(3))

    def test_single_letter(self):
        scenario = Scenario(2, 2, 2)
        ms = random_measurements(scenario, 3, np.random.default_rng(0))
        assert np.array_equal(sequence_operator(ms, ((0, 1),)), ms.projectors[1][0])

    def test_zero_word_is_zero_matrix(self):
        scenario = Scenario(2, 2, 2)
        ms = random_measurements(scenario, 3, np.random.default_rng(0))
        assert np.all(sequence_operator(ms, ZERO) == 0)

    def test_diagonal_projectors_compose(self):
        scenario = Scenario(2, 2, 2)
        ms = _fixed_computational_measurements(scenario, 4)
        op = sequence_operator(ms, ((0, 0), (0, 1)))
        expected = ms.projectors[1][0] @ ms.projectors[0][0]
        assert np.array_equal(op, expected)


class TestBorn:
    def test_aligned_state_probability_one(self):
        scenario = Scenario(2, 2, 2)
        ms = _fixed_computational_measurements(scenario, 2)
        state = StatePrep(rho=np.diag([1.0, 0.0]).astype(complex))
        assert born_probability(state, ms, ((0, 0), (0, 1))) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_state_probability_zero(self):
        scenario = Scenario(2, 2, 2)
        ms = _fixed_computational_measurements(scenario, 2)
        state = StatePrep(rho=np.diag([0.0, 1.0]).astype(complex))
        assert born_probability(state, ms, ((0, 0),)) == pytest.approx(0.0, abs=1e-12)

    def test_plus_state_half(self):
        scenario = Scenario(2, 1, 2)
        plus = np.full((2, 2), 0.5, dtype=complex)
        projs = ((np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)),
                 (plus, np.eye(2) - plus))
        ms = MeasurementSet(scenario=scenario, dim=2, projectors=projs,
                            bins=(((0,), (1,)), ((0,), (1,))))
        state = StatePrep(rho=np.diag([1.0, 0.0]).astype(complex))
        assert born_probability(state, ms, ((0, 1),)) == pytest.approx(0.5, abs=1e-12)

    def test_luders_chain_consistency(self):
        # chained rule: P(w1 ++ w2) = P(w1) * P(w2 | post-measurement state)
        scenario = Scenario(3, 2, 2)
        rng = np.random.default_rng(21)
        for _ in range(25):
            d = rng.integers(2, 5)
            state = random_state(d, rng)
            ms = random_measurements(scenario, d, rng)
            w1 = ((0, int(rng.integers(0, 3))),)
            s2 = int(rng.integers(0, 3))
            if s2 == w1[0][1]:
                s2 = (s2 + 1) % 3
            w2 = ((0, s2),)
            p1 = born_probability(state, ms, w1)
            if p1 < 1e-6:
                continue
            op = sequence_operator(ms, w1)
            post = op @ state.rho @ op.conj().T / p1
            p2 = born_probability(StatePrep(rho=post), ms, w2)
            joint = born_probability(state, ms, w1 + w2)
            assert abs(joint - p1 * p2) < 1e-9

    def test_completeness_marginal(self):
        scenario = Scenario(2, 2, 3)
        rng = np.random.default_rng(31)
        state = random_state(4, rng)
        ms = random_measurements(scenario, 4, rng)
        for s in range(2):
            total = sum(
                np.trace(ms.projectors[s][r] @ state.rho).real for r in range(3)
            )
            assert abs(total - 1) < 1e-10


class TestMomentMatrix:
    def test_all_ones_for_aligned_realization(self):
        scenario = Scenario(3, 2, 2)
        index = enumerate_words(scenario, 1)
        ms = _fixed_computational_measurements(scenario, 2)
        state = StatePrep(rho=np.diag([1.0, 0.0]).astype(complex))
        mm = moment_matrix(state, ms, index)
        assert np.max(np.abs(mm.entries - 1)) < 1e-12

    def test_invariants_on_random_draws(self):
        rng = np.random.default_rng(17)
        for m, l, o in [(3, 2, 2), (2, 2, 3)]:
            scenario = Scenario(m, l, o)
            index = enumerate_words(scenario, 1)
            pair_classes = {}
            for i, w1 in enumerate(index.words):
                for j, w2 in enumerate(index.words):
                    pair_classes.setdefault(product(w1, w2), []).append((i, j))
            for _ in range(20):
                d = int(rng.integers(2, 5))
                mm = moment_matrix(
                    random_state(d, rng), random_measurements(scenario, d, rng), index
                )
                e = mm.entries
                assert np.max(np.abs(e - e.conj().T)) < 1e-12
                assert np.linalg.eigvalsh(e)[0] > -1e-8
                assert abs(e[0, 0] - 1) < 1e-10
                assert np.all(e.diagonal().real > -1e-10)
                assert np.all(e.diagonal().real < 1 + 1e-10)
                for cls, pairs in pair_classes.items():
                    values = [e[i, j] for i, j in pairs]
                    if cls is ZERO:
                        assert np.max(np.abs(values)) < 1e-10
                    else:
                        assert np.max(np.abs(np.array(values) - values[0])) < 1e-10

    def test_diagonal_matches_born(self):
        scenario = Scenario(3, 2, 2)
        index = enumerate_words(scenario, 1)
        rng = np.random.default_rng(23)
        state = random_state(3, rng)
        ms = random_measurements(scenario, 3, rng)
        mm = moment_matrix(state, ms, index)
        for i, w in enumerate(index.words):
            if w == IDENTITY:
                continue
            assert mm.entries[i, i].real == pytest.approx(
                born_probability(state, ms, w), abs=1e-10
            )

    def test_dimension_mismatch_raises(self):
        scenario = Scenario(2, 2, 2)
        index = enumerate_words(scenario, 1)
        state = random_state(2, np.random.default_rng(0))
        ms = random_measurements(scenario, 3, np.random.default_rng(0))
        with pytest.raises(ValueError):
            moment_matrix(state, ms, index)

    def test_determinism(self):
        scenario = Scenario(3, 2, 2)
        index = enumerate_words(scenario, 1)
        entries = []
        for _ in range(2):
            rng = np.random.default_rng(99)
            mm = moment_matrix(
                random_state(3, rng), random_measurements(scenario, 3, rng), index
            )
            entries.append(mm.entries)
        assert np.array_equal(entries[0], entries[1])


class TestBehavior:
    def test_extraction_from_all_ones(self):
        scenario = Scenario(3, 2, 2)
        index = enumerate_words(scenario, 1)
        ms = _fixed_computational_measurements(scenario, 2)
        state = StatePrep(rho=np.diag([1.0, 0.0]).astype(complex))
        behavior = behavior_of(moment_matrix(state, ms, index))
        assert set(behavior.values) == set(index.behavior_words())
        assert all(v == pytest.approx(1.0) for v in behavior.values.values())

    def test_maximally_mixed_half(self):
        scenario = Scenario(3, 1, 2)
        index = enumerate_words(scenario, 1)
        ms = _fixed_computational_measurements(scenario, 2)
        state = StatePrep(rho=np.eye(2, dtype=complex) / 2)
        behavior = behavior_of(moment_matrix(state, ms, index))
        assert all(v == pytest.approx(0.5) for v in behavior.values.values())

    def test_identity_word_excluded(self):
        scenario = Scenario(2, 2, 2)
        index = enumerate_words(scenario, 1)
        rng = np.random.default_rng(3)
        behavior = behavior_of(
            moment_matrix(random_state(2, rng), random_measurements(scenario, 2, rng), index)
        )
        assert IDENTITY not in behavior.values

    def test_json_round_trip(self, tmp_path):
        scenario = Scenario(2, 2, 2)
        behavior = sample_behavior(scenario, 3, np.random.default_rng(4))
        path = tmp_path / "behavior.json"
        behavior.save(path)
        loaded = Behavior.load(path)
        assert loaded.scenario == scenario
        assert loaded.values == behavior.values

    def test_rejects_invalid_probability(self):
        with pytest.raises(ValueError):
            Behavior.from_json_dict({"scenario": "2-2-2", "values": {"0|0": 1.2}})

    def test_rejects_non_event_word(self):
        with pytest.raises(ValueError):
            Behavior.from_json_dict({"scenario": "2-2-2", "values": {"1": 0.5}})
