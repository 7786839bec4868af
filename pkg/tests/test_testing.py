import json
import os

import numpy as np
import pytest

import oracles
from otranks import nulldist, qmc, ranks, stats, testing
from otranks.errors import MetadataError, ShapeError, UsageError


def _cloud(rows):
    return ranks.PointCloud.from_rows(rows)


class TestRdcovTest:
    def test_two_point_hand_value(self):
        report = testing.rdcov_test(_cloud([0.0, 1.0]), _cloud([0.0, 1.0]), b=50, seed=1)
        assert report.statistic_raw == pytest.approx(1 / 16, abs=1e-14)
        assert report.statistic_scaled == pytest.approx(1 / 8, abs=1e-14)
        assert report.scaling == "n"
        assert report.grids == ("lattice1d", "lattice1d")

    def test_single_observation(self):
        report = testing.rdcov_test(_cloud([3.0]), _cloud([-1.0]), b=20, seed=2)
        assert report.statistic_raw == 0.0
        assert report.p_value == 1.0

    def test_count_mismatch(self):
        with pytest.raises(ShapeError):
            testing.rdcov_test(_cloud([1.0]), _cloud([1.0, 2.0]), b=5, seed=0)

    def test_prerank_gives_monotone_invariant_statistic(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(30, 2))
        y = rng.normal(size=(30, 2))
        base = testing.rdcov_test(_cloud(x), _cloud(y), b=10, seed=3, prerank=True)
        warped_x = np.column_stack([np.exp(x[:, 0]), x[:, 1] ** 3])
        warped = testing.rdcov_test(_cloud(warped_x), _cloud(y), b=10, seed=3, prerank=True)
        assert warped.statistic_raw == pytest.approx(base.statistic_raw, abs=1e-12)

    def test_decision_matches_threshold_rule(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(40, 2))
        y = x + 0.01 * rng.normal(size=(40, 2))  # strongly dependent
        report = testing.rdcov_test(_cloud(x), _cloud(y), b=500, seed=4)
        assert report.reject == (report.statistic_scaled >= report.critical_value)
        assert report.reject
        assert report.p_value <= report.alpha


class TestReTest:
    def test_singletons_hand_value(self):
        report = testing.re_test(_cloud([0.0]), _cloud([5.0]), b=30, seed=7)
        assert report.statistic_raw == pytest.approx(1.0, abs=1e-14)
        assert report.statistic_scaled == pytest.approx(0.5, abs=1e-14)
        assert report.scaling == "mn/(m+n)"

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            testing.re_test(_cloud([[1.0, 2.0]]), _cloud([1.0]), b=5, seed=0)

    def test_unequal_sizes_supported(self):
        rng = np.random.default_rng(8)
        report = testing.re_test(
            _cloud(rng.normal(size=(12, 2))),
            _cloud(rng.normal(size=(20, 2))),
            b=200,
            seed=9,
        )
        assert report.m == 12 and report.n == 20
        assert report.scale_factor == pytest.approx(12 * 20 / 32)


class TestKIndepTest:
    def test_two_blocks_equal_rdcov_test(self):
        rng = np.random.default_rng(10)
        data = rng.normal(size=(25, 4))
        joint = testing.k_indep_test(_cloud(data), (2, 2), b=100, seed=11)
        split = testing.rdcov_test(
            _cloud(data[:, :2]), _cloud(data[:, 2:]), b=100, seed=11
        )
        assert joint.statistic_raw == pytest.approx(split.statistic_raw, abs=1e-14)
        assert joint.statistic_scaled == pytest.approx(split.statistic_scaled, abs=1e-14)

    def test_three_blocks_direct_formula(self):
        rng = np.random.default_rng(12)
        data = rng.normal(size=(5, 3))
        report = testing.k_indep_test(_cloud(data), (1, 1, 1), b=50, seed=13)
        grids = [qmc.lattice1d(5)] * 3
        rank_arrays = [
            ranks.empirical_ranks(_cloud(data[:, j]), grids[j]).ranks for j in range(3)
        ]
        expected = stats.dcov_sq(
            rank_arrays[0], np.hstack(rank_arrays[1:])
        ) + stats.dcov_sq(rank_arrays[1], rank_arrays[2])
        assert report.statistic_raw == pytest.approx(expected, abs=1e-14)
        assert report.scale_factor == 5.0

    def test_bad_partition(self):
        with pytest.raises(ShapeError):
            testing.k_indep_test(_cloud([[1.0, 2.0, 3.0]]), (2, 2), b=5, seed=0)
        with pytest.raises(UsageError):
            testing.k_indep_test(_cloud([[1.0, 2.0]]), (2,), b=5, seed=0)


class TestKSampleTest:
    def test_two_samples_match_re_raw(self):
        rng = np.random.default_rng(14)
        x = _cloud(rng.normal(size=(8, 2)))
        y = _cloud(rng.normal(size=(12, 2)))
        ks = testing.k_sample_test([x, y], b=80, seed=15)
        re = testing.re_test(x, y, b=80, seed=15)
        assert ks.statistic_raw == pytest.approx(re.statistic_raw, abs=1e-14)
        # documented scale difference: pooled n versus mn/(m+n)
        assert ks.scale_factor == 20.0
        assert re.scale_factor == pytest.approx(8 * 12 / 20)
        assert "pooled" in ks.scaling

    def test_singleton_samples_hand_enumeration(self):
        report = testing.k_sample_test(
            [_cloud([0.0]), _cloud([10.0])], b=40, seed=16
        )
        # pooled lattice ranks: 0 -> 1/2, 10 -> 1; energy = 2*|1/2-1| = 1
        assert report.statistic_raw == pytest.approx(1.0, abs=1e-14)
        assert report.statistic_scaled == pytest.approx(2.0, abs=1e-14)

    def test_three_samples_direct_formula(self):
        rng = np.random.default_rng(17)
        samples = [_cloud(rng.normal(size=(2, 2))) for _ in range(3)]
        report = testing.k_sample_test(samples, b=60, seed=18)
        grid = qmc.halton_grid(6, 2)
        pooled = ranks.pooled_ranks(samples, grid)
        expected = stats.energy_sq(pooled.slices[0], pooled.slices[1]) + stats.energy_sq(
            pooled.slices[1], pooled.slices[2]
        )
        assert report.statistic_raw == pytest.approx(expected, abs=1e-14)
        assert report.counts == (2, 2, 2)


class TestSymmetryTest:
    def test_single_observation(self):
        report = testing.symmetry_test(_cloud([4.0]), b=25, seed=19)
        assert report.p_value == 1.0
        assert "n/2" in report.scaling

    def test_level_on_symmetric_data(self):
        table = nulldist.null_sample_symmetry(100, 2, 4000, seed=60)
        crit = nulldist.critical_value(table, 0.05)
        hits = 0
        streams = np.random.SeedSequence(61).spawn(500)
        for s in streams:
            rng = np.random.Generator(np.random.PCG64(s))
            sym = ranks.paired_symmetry_ranks(
                ranks.PointCloud.from_rows(rng.normal(size=(100, 2)))
            )
            hits += (50 * stats.energy_sq(sym.x_ranks, sym.neg_x_ranks)) >= crit
        assert abs(hits / 500 - 0.05) <= 0.03

    def test_power_on_asymmetric_data(self):
        table = nulldist.null_sample_symmetry(200, 1, 2000, seed=62)
        crit = nulldist.critical_value(table, 0.05)
        hits = 0
        streams = np.random.SeedSequence(63).spawn(40)
        for s in streams:
            rng = np.random.Generator(np.random.PCG64(s))
            x = -np.log1p(-rng.random(200))  # Exponential(1)
            sym = ranks.paired_symmetry_ranks(ranks.PointCloud.from_rows(x))
            hits += (100 * stats.energy_sq(sym.x_ranks, sym.neg_x_ranks)) >= crit
        assert hits / 40 >= 0.9

    def test_statistic_matches_components(self):
        rng = np.random.default_rng(20)
        data = _cloud(rng.normal(size=(10, 2)))
        report = testing.symmetry_test(data, b=30, seed=21)
        sym = ranks.paired_symmetry_ranks(data)
        assert report.statistic_raw == pytest.approx(
            stats.energy_sq(sym.x_ranks, sym.neg_x_ranks), abs=1e-14
        )
        assert report.scale_factor == 5.0


class TestReportContract:
    def test_json_schema_fields(self):
        report = testing.rdcov_test(_cloud([0.0, 1.0]), _cloud([2.0, 3.0]), b=10, seed=22)
        doc = json.loads(report.to_json())
        for key in (
            "schema", "test_kind", "statistic_raw", "statistic_scaled",
            "scale_factor", "scaling", "p_value", "alpha", "critical_value",
            "reject", "n", "m", "counts", "dims", "grids", "b", "seed",
            "warnings", "timings",
        ):
            assert key in doc
        assert doc["schema"] == 1

    def test_byte_determinism(self):
        x, y = _cloud([0.5, -1.0, 2.0]), _cloud([3.0, 1.0, 0.0])
        a = testing.rdcov_test(x, y, b=99, seed=7).to_json()
        b = testing.rdcov_test(x, y, b=99, seed=7).to_json()
        assert a == b

    def test_decision_route_consistency(self):
        # p <= alpha must imply reject for any observed value and table
        table = nulldist.null_sample_rdcov(
            5, qmc.halton_grid(5, 2), qmc.halton_grid(5, 2), 137, seed=23
        )
        alpha = 0.05
        crit = nulldist.critical_value(table, alpha)
        probes = np.concatenate(
            [table.samples, table.samples + 1e-12, [0.0, 1e9], table.samples - 1e-12]
        )
        for obs in probes:
            p = nulldist.p_value(table, obs)
            reject = obs >= crit
            if p <= alpha:
                assert reject


class TestAffineInvariance:
    def test_statistic_invariant_under_shift_and_scale(self):
        rng = np.random.default_rng(50)
        x = rng.normal(size=(25, 2))
        y = rng.normal(size=(25, 3))
        base = testing.rdcov_test(_cloud(x), _cloud(y), b=50, seed=51)
        moved = testing.rdcov_test(
            _cloud(3.5 * x + [1.0, -2.0]),
            _cloud(0.25 * y + [4.0, 4.0, 4.0]),
            b=50,
            seed=51,
        )
        assert moved.statistic_raw == base.statistic_raw
        assert moved.reject == base.reject


class TestTableResolution:
    def test_cache_dir_round_trip(self, tmp_path):
        x, y = _cloud([0.0, 1.0, 2.0]), _cloud([5.0, 4.0, 3.0])
        first = testing.rdcov_test(x, y, b=64, seed=30, table_dir=str(tmp_path))
        files = list(tmp_path.iterdir())
        assert len(files) == 1
        mtime = files[0].stat().st_mtime_ns
        second = testing.rdcov_test(x, y, b=64, seed=30, table_dir=str(tmp_path))
        assert files[0].stat().st_mtime_ns == mtime  # reused, not regenerated
        assert first.critical_value == second.critical_value

    def test_env_var_cache(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OT_RANKS_TABLE_DIR", str(tmp_path))
        testing.re_test(_cloud([0.0, 1.0]), _cloud([2.0]), b=32, seed=31)
        assert len(list(tmp_path.iterdir())) == 1

    def test_wrong_table_path_refused(self, tmp_path):
        table = nulldist.null_sample_rdcov(
            4, qmc.halton_grid(4, 2), qmc.halton_grid(4, 2), 16, seed=32
        )
        path = tmp_path / "wrong.nulltab"
        nulldist.save_table(table, path)
        with pytest.raises(MetadataError):
            testing.rdcov_test(
                _cloud([[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]]),
                _cloud([[0.0, 1.0], [1.0, 0.0], [0.3, 0.3]]),
                b=16,
                seed=32,
                table_path=str(path),  # table was built for n=4, data has n=3
            )

    def test_supplied_table_must_match_configuration(self):
        table = nulldist.null_sample_rdcov(
            3, qmc.lattice1d(3), qmc.lattice1d(3), 16, seed=33
        )
        with pytest.raises(UsageError):
            testing.rdcov_test(
                _cloud([0.0, 1.0, 2.0, 3.0]),
                _cloud([1.0, 0.0, 2.0, -1.0]),
                b=16,
                seed=33,
                null_table=table,  # built for n=3, data has n=4
            )

    def test_supplied_table_seed_is_provenance(self):
        # a shared table may be reused under any run seed; the report
        # carries the table's own seed
        table = nulldist.null_sample_rdcov(
            3, qmc.lattice1d(3), qmc.lattice1d(3), 16, seed=33
        )
        report = testing.rdcov_test(
            _cloud([0.0, 1.0, 2.0]),
            _cloud([1.0, 0.0, 2.0]),
            b=16,
            seed=34,
            null_table=table,
        )
        assert report.seed == 33


class TestSmallNEnumerationLevel:
    """Observed statistics and the sampled null must share one law."""

    def test_rdcov_observed_law_matches_enumeration(self):
        # full pipeline on H0 data lands on the enumerated support
        rng = np.random.default_rng(40)
        g = qmc.lattice1d(3)
        exact = oracles.exact_rdcov(g, g)
        for _ in range(25):
            x = _cloud(rng.normal(size=3))
            y = _cloud(rng.normal(size=3))
            report = testing.rdcov_test(x, y, b=8, seed=41)
            assert round(report.statistic_scaled, 10) in exact
