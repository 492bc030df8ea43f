import itertools

import numpy as np
import pytest

from frametime.features import (FeatureSpec, LassoPath, RegressionDataset,
                                ZeroFrequencyVarianceError, _lasso_cd,
                                build_dataset, cross_validated_path,
                                default_eta_grid, lasso_fit, load_feature_spec,
                                pearson_prune, save_feature_spec,
                                select_features)
from frametime.trace import (AffineMap, CounterModel, FrequencyTable, Trace,
                             TraceSample, WorkloadSpec, generate_runtime)


def make_trace(frame_times, freqs, counters, table=None):
    table = table or FrequencyTable(tuple(sorted(set(freqs))))
    counters = np.atleast_2d(np.asarray(counters, dtype=float))
    samples = tuple(
        TraceSample(0.05 * k, float(t), 3, float(f), tuple(counters[k]))
        for k, (t, f) in enumerate(zip(frame_times, freqs)))
    names = tuple(f"c{i}" for i in range(counters.shape[1]))
    return Trace(samples, names, table)


def synthetic_dataset(rng, n=200, m_counters=3, coef=None, noise=0.0):
    spec = FeatureSpec(tuple(range(m_counters)))
    h = rng.normal(size=(n, spec.m))
    coef = np.asarray(coef) if coef is not None else rng.normal(size=spec.m)
    y = h @ coef + noise * rng.normal(size=n)
    return RegressionDataset(h=h, targets=y, feature_spec=spec), coef


class TestPearsonPrune:
    def test_proportional_counter_excluded(self):
        freqs = [200.0, 311.0, 400.0, 511.0] * 5
        prop = [f * 2.0 for f in freqs]
        indep = [7.0, 9.0, 8.0, 7.5] * 5
        trace = make_trace(np.ones(20), freqs, np.column_stack([prop, indep]))
        assert pearson_prune(trace) == [1]

    def test_constant_counter_disqualified_not_crash(self):
        freqs = [200.0, 400.0] * 4
        const = np.full(8, 5.0)
        trace = make_trace(np.ones(8), freqs, const[:, None])
        assert pearson_prune(trace) == []

    def test_single_frequency_errors(self):
        table = FrequencyTable((200.0, 400.0))
        trace = make_trace(np.ones(6), [200.0] * 6, np.arange(6.0)[:, None], table)
        with pytest.raises(ZeroFrequencyVarianceError):
            pearson_prune(trace)

    def test_oracle_indep_counter_kept(self, char_workload, sweep_table):
        from frametime.workloads import noiseless
        from frametime.trace import generate_characterization
        trace = generate_characterization(noiseless(char_workload), sweep_table,
                                          range(1, 17), 1, seed=0)
        kept = pearson_prune(trace)
        assert kept == [2, 3, 4, 5]

    def test_threshold_domain(self, char_workload):
        from frametime.trace import generate_characterization
        from frametime.workloads import SWEEP_TABLE, noiseless
        trace = generate_characterization(noiseless(char_workload), SWEEP_TABLE,
                                          [1.0, 2.0], 1, seed=0)
        with pytest.raises(ValueError):
            pearson_prune(trace, threshold=0.0)


class TestBuildDataset:
    def test_direct_substitution(self):
        trace = make_trace([10.0, 11.0], [400.0, 444.0], [[3.0], [5.0]],
                           FrequencyTable((400.0, 444.0)))
        ds = build_dataset(trace, FeatureSpec((0,)))
        assert len(ds) == 1
        assert ds.h[0, 0] == pytest.approx(10.0 * (400.0 / 444.0 - 1.0))
        assert ds.h[0, 0] == pytest.approx(-0.991, abs=1e-3)
        assert ds.h[0, 1] == pytest.approx(44.0)
        assert ds.h[0, 2] == pytest.approx(2.0)
        assert ds.targets[0] == pytest.approx(1.0)

    def test_stationary_rows_are_zero(self):
        trace = make_trace([8.0, 8.0, 8.0], [400.0] * 3, [[2.0], [2.0], [2.0]],
                           FrequencyTable((200.0, 400.0)))
        ds = build_dataset(trace, FeatureSpec((0,)))
        assert np.allclose(ds.h, 0.0)
        assert np.allclose(ds.targets, 0.0)

    def test_fully_scalable_oracle_identity(self, small_table):
        # with no unscalable part, target equals h0 exactly (Eq-style identity)
        spec = WorkloadSpec((5.0,) * 12, AffineMap(0.5, 1.0), AffineMap(0.0, 0.0),
                            200.0, indep_counters=(
                                CounterModel("u", "indep", AffineMap(1.0, 0.0)),),
                            noise_sigma=0.0)
        freqs = [200.0, 400.0, 600.0, 200.0, 600.0, 400.0] * 2
        trace = generate_runtime(spec, small_table, freqs, seed=0)
        ds = build_dataset(trace, FeatureSpec((0,)))
        assert np.allclose(ds.targets, ds.h[:, 0], atol=1e-12)

    def test_shifted_trace_recomputation_identity(self):
        rng = np.random.default_rng(2)
        freqs = [200.0, 311.0, 400.0, 311.0, 200.0, 400.0]
        t = rng.uniform(5, 15, 6)
        x = rng.uniform(0, 100, (6, 2))
        table = FrequencyTable((200.0, 311.0, 400.0))
        shift = 3.7
        ds = build_dataset(make_trace(t + shift, freqs, x, table), FeatureSpec((0, 1)))
        f = np.array(freqs)
        expect_h0 = (t + shift)[:-1] * (f[:-1] / f[1:] - 1.0)
        expect_target = np.diff(t + shift)
        assert np.allclose(ds.h[:, 0], expect_h0)
        assert np.allclose(ds.targets, expect_target)

    def test_needs_two_samples(self):
        trace = make_trace([1.0], [200.0], [[1.0]], FrequencyTable((200.0, 400.0)))
        with pytest.raises(ValueError):
            build_dataset(trace, FeatureSpec((0,)))

    def test_constant_frequency_rows_use_counters_only(self, simple_workload, small_table):
        trace = generate_runtime(simple_workload, small_table, 400.0, seed=0)
        ds = build_dataset(trace, FeatureSpec((0,)))
        assert np.allclose(ds.h[:, 0], 0.0)
        assert np.allclose(ds.h[:, 1], 0.0)


class TestLassoFit:
    def test_eta_zero_matches_least_squares(self):
        rng = np.random.default_rng(0)
        ds, _ = synthetic_dataset(rng, n=150, noise=0.05)
        coefs = lasso_fit(ds, 0.0)
        # reference: least squares with intercept, slopes compared
        X = np.column_stack([ds.h, np.ones(len(ds))])
        ref = np.linalg.lstsq(X, ds.targets, rcond=None)[0][:-1]
        assert np.allclose(coefs, ref, rtol=1e-6, atol=1e-9)

    def test_huge_eta_all_zero(self):
        rng = np.random.default_rng(1)
        ds, _ = synthetic_dataset(rng, n=100, noise=0.05)
        grid = default_eta_grid(ds)
        assert np.count_nonzero(lasso_fit(ds, grid[0] * 1.01)) == 0

    def test_support_recovery_against_subset_regression(self):
        rng = np.random.default_rng(4)
        spec = FeatureSpec((0, 1, 2))   # M = 5
        h = rng.normal(size=(300, 5))
        y = 3.0 * h[:, 0] - 2.0 * h[:, 2] + 0.01 * rng.normal(size=300)
        ds = RegressionDataset(h=h, targets=y, feature_spec=spec)

        # independent oracle: exhaustive 2-subset least squares
        best, best_sse = None, np.inf
        for pair in itertools.combinations(range(5), 2):
            Xs = h[:, pair]
            coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
            sse = float(np.sum((y - Xs @ coef) ** 2))
            if sse < best_sse:
                best, best_sse = pair, sse
        assert best == (0, 2)

        # moderate penalty zeroes the inactive features
        grid = default_eta_grid(ds)
        coefs = lasso_fit(ds, grid[12])
        assert set(np.flatnonzero(coefs)) == {0, 2}

    def test_objective_monotone_per_sweep(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n, m = 60, 4
            X = rng.normal(size=(n, m))
            y = rng.normal(size=n)
            _, history = _lasso_cd(X - X.mean(0), y - y.mean(), float(rng.uniform(0, 5)))
            assert all(b <= a * (1 + 1e-12) + 1e-9 for a, b in zip(history, history[1:]))

    def test_empty_dataset_rejected(self):
        spec = FeatureSpec((0,))
        empty = RegressionDataset(h=np.zeros((0, 3)), targets=np.zeros(0), feature_spec=spec)
        with pytest.raises(ValueError):
            lasso_fit(empty, 1.0)
        with pytest.raises(ValueError):
            lasso_fit(synthetic_dataset(np.random.default_rng(0))[0], -1.0)


class TestCrossValidation:
    def test_path_shapes_and_determinism(self):
        rng = np.random.default_rng(6)
        ds, _ = synthetic_dataset(rng, n=120, noise=0.2)
        grid = default_eta_grid(ds, n=20)
        a = cross_validated_path(ds, grid, folds=5, seed=1)
        b = cross_validated_path(ds, grid, folds=5, seed=1)
        assert np.array_equal(a.cv_mean_mse, b.cv_mean_mse)
        assert np.array_equal(a.coefs, b.coefs)
        assert np.all(a.cv_stderr >= 0)
        assert a.etas[0] > a.etas[-1]

    def test_min_mse_eta_not_above_one_se_eta(self):
        rng = np.random.default_rng(7)
        ds, _ = synthetic_dataset(rng, n=200, noise=0.5)
        path = cross_validated_path(ds, default_eta_grid(ds, n=30), folds=5, seed=0)
        i_min = int(np.argmin(path.cv_mean_mse))
        limit = path.cv_mean_mse[i_min] + path.cv_stderr[i_min]
        i_1se = next(i for i in range(path.etas.size) if path.cv_mean_mse[i] <= limit)
        assert path.etas[i_1se] >= path.etas[i_min]

    def test_one_se_support_not_larger(self):
        rng = np.random.default_rng(8)
        for trial in range(5):
            ds, _ = synthetic_dataset(rng, n=150, noise=1.0)
            path = cross_validated_path(ds, default_eta_grid(ds, n=25), folds=5, seed=0)
            n_min = select_features(path, "min_mse").m
            n_1se = select_features(path, "one_se").m
            assert n_1se <= n_min

    def test_too_few_rows(self):
        rng = np.random.default_rng(9)
        ds, _ = synthetic_dataset(rng, n=5)
        with pytest.raises(ValueError):
            cross_validated_path(ds, [1.0, 0.1], folds=10, seed=0)


class TestSelectFeatures:
    def test_singleton_path(self):
        spec = FeatureSpec((4, 9))
        path = LassoPath(etas=np.array([1.0]),
                         coefs=np.array([[0.5, 0.0, 1.0, 0.0]]),
                         cv_mean_mse=np.array([0.1]), cv_stderr=np.array([0.0]),
                         nonzero_counts=np.array([2]), feature_spec=spec)
        chosen = select_features(path, "min_mse")
        assert chosen.indep_counter_indices == (4,)
        assert chosen.m == 3

    def test_frequency_terms_always_retained(self):
        spec = FeatureSpec((0,))
        path = LassoPath(etas=np.array([1.0]),
                         coefs=np.array([[0.0, 0.0, 0.0]]),
                         cv_mean_mse=np.array([0.1]), cv_stderr=np.array([0.0]),
                         nonzero_counts=np.array([0]), feature_spec=spec)
        chosen = select_features(path, "min_mse")
        assert chosen.m == 2
        assert chosen.indep_counter_indices == ()

    def test_spec_file_round_trip(self, tmp_path):
        spec = FeatureSpec((2, 3), ("geometry_batches", "shader_slots"))
        path = tmp_path / "features.spec"
        save_feature_spec(spec, path)
        assert load_feature_spec(path) == spec

    def test_spec_invariants(self):
        with pytest.raises(ValueError):
            FeatureSpec((1, 1))
        with pytest.raises(ValueError):
            FeatureSpec((-1,))
        assert FeatureSpec(()).m == 2
