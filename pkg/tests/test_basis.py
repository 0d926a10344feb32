import json

import numpy as np
import pytest

from seqdim.basis import (
    Basis,
    BasisBuildError,
    basis_cache_name,
    build_basis,
    classify,
    rank_oracle,
)
from seqdim.quantum import moment_matrix, random_measurements, random_state
from seqdim.words import Scenario, enumerate_words

DROP = 1e-7


class TestBuild:
    def test_first_candidate_always_retained(self, basis_322_d2_k1):
        assert basis_322_d2_k1.norm_log[0] == pytest.approx(1.0, abs=1e-12)

    def test_cardinality_matches_rank_oracle(self, basis_322_d2_k1):
        oracle = rank_oracle(
            Scenario.parse("3-2-2"), 2, 1,
            n_samples=2 * basis_322_d2_k1.cardinality + 10,
            rng=np.random.default_rng(1),
        )
        assert basis_322_d2_k1.cardinality == oracle

    def test_oracle_rank_saturates_when_samples_double(self):
        scenario = Scenario.parse("2-3-2")
        r1 = rank_oracle(scenario, 2, 1, 40, np.random.default_rng(3))
        r2 = rank_oracle(scenario, 2, 1, 80, np.random.default_rng(4))
        assert r1 == r2

    def test_trivial_scenario_rank_one(self):
        # d = 1 forces scalar projectors: every moment matrix is the same
        scenario = Scenario(1, 1, 2)
        assert rank_oracle(scenario, 1, 1, 8, np.random.default_rng(0)) == 1
        basis = build_basis(scenario, 1, 1, np.random.default_rng(0))
        assert basis.cardinality == 1

    def test_elements_orthonormal(self, basis_322_d2_k1):
        els = basis_322_d2_k1.elements
        for i, a in enumerate(els):
            assert np.vdot(a, a).real == pytest.approx(1.0, abs=1e-10)
            for b in els[i + 1:]:
                assert abs(np.vdot(a, b)) < 1e-8

    def test_norm_drop_gap(self, basis_322_d2_k1, basis_322_d2_k2, basis_233_d3_k1):
        for basis in (basis_322_d2_k1, basis_322_d2_k2, basis_233_d3_k1):
            assert basis.drop_gap() >= 1e6

    def test_reconstruction_of_fresh_samples(self, basis_322_d2_k1):
        scenario = Scenario.parse("3-2-2")
        index = enumerate_words(scenario, 1)
        rng = np.random.default_rng(202)
        for _ in range(100):
            mm = moment_matrix(
                random_state(2, rng), random_measurements(scenario, 2, rng), index
            )
            assert basis_322_d2_k1.residual(mm.entries) < 1e-7

    def test_cardinality_monotone_in_d_and_k(self):
        scenario = Scenario.parse("2-2-2")
        rng = np.random.default_rng(5)
        cards = {}
        for d in (2, 3):
            for k in (1, 2):
                cards[(d, k)] = build_basis(scenario, d, k, rng).cardinality
        assert cards[(2, 1)] <= cards[(3, 1)]
        assert cards[(2, 1)] <= cards[(2, 2)]
        assert cards[(3, 1)] <= cards[(3, 2)]

    def test_budget_exhaustion_raises_with_log(self):
        scenario = Scenario.parse("3-2-2")
        with pytest.raises(BasisBuildError) as err:
            build_basis(scenario, 2, 1, np.random.default_rng(0), max_candidates=5)
        assert len(err.value.norm_log) == 5

    def test_rejects_zero_dimension(self):
        with pytest.raises(ValueError):
            build_basis(Scenario.parse("2-2-2"), 0, 1, np.random.default_rng(0))


class TestRealSection:
    def test_elements_real_orthonormal(self, basis_322_d2_k1):
        section = basis_322_d2_k1.real_section
        for i, a in enumerate(section.elements):
            assert np.array_equal(a, a.T)
            assert np.sum(a * a) == pytest.approx(1.0, abs=1e-10)
            for b in section.elements[i + 1:]:
                assert abs(np.sum(a * b)) < 1e-8

    def test_real_parts_reconstruct(self, basis_322_d2_k1):
        scenario = Scenario.parse("3-2-2")
        index = enumerate_words(scenario, 1)
        rng = np.random.default_rng(77)
        section = basis_322_d2_k1.real_section
        for _ in range(20):
            mm = moment_matrix(
                random_state(2, rng), random_measurements(scenario, 2, rng), index
            )
            target = mm.entries.real
            coeffs = [np.sum(b * target) for b in section.elements]
            recon = sum(c * b for c, b in zip(coeffs, section.elements))
            assert np.max(np.abs(recon - target)) < 1e-7

    def test_compression_preserves_psd_cone(self, basis_322_d2_k2):
        # the isometry spans the common range, so compression keeps eigenvalues
        section = basis_322_d2_k2.real_section
        v = section.isometry
        assert np.max(np.abs(v.T @ v - np.eye(v.shape[1]))) < 1e-12
        for b_full, b_comp in zip(section.elements, section.compressed):
            assert np.max(np.abs(v @ b_comp @ v.T - b_full)) < 1e-9


class TestClassify:
    def test_flags_and_ratio(self):
        scenarios = [Scenario.parse("3-2-2")]
        table = classify(scenarios, dims=[2, 3], k=1, rng=np.random.default_rng(8))
        assert table.cardinalities["3-2-2"][2] < table.cardinalities["3-2-2"][3]
        assert table.gap_flags("3-2-2")[(2, 3)] is True
        assert table.has_gap("3-2-2")
        assert table.ratio("3-2-2") > 1.0

    def test_flag_unset_between_saturated_dims(self):
        table = classify([Scenario.parse("2-2-2")], dims=[3, 4], k=1,
                         rng=np.random.default_rng(9))
        assert table.gap_flags("2-2-2")[(3, 4)] is False

    def test_errors_do_not_abort_table(self, monkeypatch):
        import seqdim.basis as basis_mod

        calls = {"n": 0}
        real_build = basis_mod.build_basis

        def flaky(scenario, d, k, rng, **kwargs):
            calls["n"] += 1
            if d == 3:
                raise BasisBuildError("synthetic failure", [])
            return real_build(scenario, d, k, rng, **kwargs)

        monkeypatch.setattr(basis_mod, "build_basis", flaky)
        table = basis_mod.classify([Scenario.parse("2-2-2")], dims=[2, 3], k=1,
                                   rng=np.random.default_rng(1))
        assert table.cardinalities["2-2-2"][2] is not None
        assert table.cardinalities["2-2-2"][3] is None
        assert "2-2-2" in table.errors

    def test_json_payload_shape(self):
        table = classify([Scenario.parse("2-2-2")], dims=[2], k=1,
                         rng=np.random.default_rng(2))
        payload = table.to_json_dict()
        assert payload["k"] == 1
        assert "cardinalities" in payload and "gaps" in payload


class TestPersistence:
    def test_round_trip(self, tmp_path, basis_322_d2_k1):
        path = tmp_path / "basis.json"
        basis_322_d2_k1.save(path)
        loaded = Basis.load(path)
        assert loaded.scenario == basis_322_d2_k1.scenario
        assert loaded.cardinality == basis_322_d2_k1.cardinality
        for a, b in zip(loaded.elements, basis_322_d2_k1.elements):
            assert np.array_equal(a, b)

    def test_rebuild_is_byte_identical(self, tmp_path):
        scenario = Scenario.parse("2-3-2")
        paths = []
        for run in range(2):
            basis = build_basis(scenario, 2, 1, np.random.default_rng(31), seed=31,
                                version="t")
            path = tmp_path / f"b{run}.json"
            basis.save(path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_cache_name_keyed_by_all_parameters(self):
        name = basis_cache_name(Scenario.parse("3-2-2"), 2, 1, 7, "1.0")
        assert "3-2-2" in name and "d2" in name and "k1" in name and "seed7" in name
