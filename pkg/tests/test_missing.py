"""Error-correlation test for inputs the scorer used but the audit lacks."""

import numpy as np
import pytest

import distillaudit as da
from distillaudit.missing import (
    CorrelationInterval,
    EVIDENCE_MARGIN,
    _verdict,
    error_pairs,
    load_error_pairs_csv,
)


def interval(lo):
    return CorrelationInterval(max(lo + 0.1, 0.0), lo, lo + 0.3)


class TestVerdictRule:
    def test_evidence_needs_all_three_above_margin(self):
        assert _verdict([interval(0.05), interval(0.02), interval(0.011)]) == "evidence"

    def test_weak_when_positive_but_inside_margin(self):
        assert _verdict([interval(0.005), interval(0.05), interval(0.05)]) == "weak"
        assert _verdict([interval(-0.2), interval(0.05), interval(-0.1)]) == "weak"

    def test_none_when_no_lower_bound_positive(self):
        assert _verdict([interval(-0.1), interval(0.0), interval(-0.3)]) == "none"

    def test_margin_is_strict(self):
        assert _verdict([interval(EVIDENCE_MARGIN)] * 3) == "weak"


class TestCorrelationTest:
    def test_identical_series_give_estimates_of_one(self):
        rng = np.random.default_rng(0)
        e = rng.exponential(size=200)
        result = da.correlation_test(e, e, resamples=200)
        for iv in (result.pearson, result.spearman, result.kendall):
            assert iv.estimate == pytest.approx(1.0)
            assert iv.lower > 0.9
        assert result.verdict == "evidence"
        assert result.n_pairs == 200

    def test_independent_series_contain_zero(self):
        rng = np.random.default_rng(1)
        a = rng.exponential(size=500)
        b = rng.exponential(size=500)
        result = da.correlation_test(a, b, resamples=400)
        for iv in (result.pearson, result.spearman, result.kendall):
            assert iv.lower < 0.0 < iv.upper
        assert result.verdict == "none"

    def test_interval_brackets_estimate(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=100)
        b = 0.4 * a + rng.normal(size=100)
        result = da.correlation_test(a, b, resamples=300, seed=5)
        for iv in (result.pearson, result.spearman, result.kendall):
            assert iv.lower <= iv.estimate <= iv.upper

    def test_seed_determinism(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=80)
        b = 0.5 * a + rng.normal(size=80)
        r1 = da.correlation_test(a, b, resamples=150, seed=9)
        r2 = da.correlation_test(a, b, resamples=150, seed=9)
        assert r1.pearson.lower == r2.pearson.lower
        assert r1.kendall.upper == r2.kendall.upper

    def test_fisher_interval_matches_formula(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=120)
        b = 0.6 * a + rng.normal(size=120)
        result = da.correlation_test(a, b, resamples=150, pearson_ci="fisher")
        z = np.arctanh(result.pearson.estimate)
        half = 1.96 / np.sqrt(120 - 3)
        assert result.pearson.lower == pytest.approx(np.tanh(z - half))
        assert result.pearson.upper == pytest.approx(np.tanh(z + half))

    def test_input_validation(self):
        ok = np.arange(40.0)
        with pytest.raises(da.DegenerateStatisticsError, match="at least 30"):
            da.correlation_test(np.arange(10.0), np.arange(10.0))
        with pytest.raises(da.DataError, match="length"):
            da.correlation_test(ok, ok[:-1])
        with pytest.raises(da.DegenerateStatisticsError, match="constant"):
            da.correlation_test(np.ones(40), ok)
        bad = ok.copy()
        bad[3] = np.nan
        with pytest.raises(da.DataError, match="non-finite"):
            da.correlation_test(bad, ok)
        with pytest.raises(da.DataError, match="resamples"):
            da.correlation_test(ok, ok, resamples=50)
        with pytest.raises(da.DataError, match="pearson_ci"):
            da.correlation_test(ok, ok, pearson_ci="exact")

    def test_json_dict_shape(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=60)
        result = da.correlation_test(a, a + rng.normal(size=60), resamples=120)
        blob = result.to_json_dict()
        assert set(blob) == {"pearson", "spearman", "kendall", "verdict", "n_pairs", "resamples"}
        assert len(blob["pearson"]["ci"]) == 2


def hidden_pipeline(strength, hidden, n_rows=4000, seed=0):
    ds, _ = da.gen_hidden_feature(n_rows=n_rows, seed=seed, strength=strength, hidden=hidden)
    plan = da.plan_bags(ds.n_rows, K=2, L=2, seed=seed)
    config = da.TrainConfig(learning_rate=0.15, max_rounds=300, seed=seed)
    schema = da.fit_schema(ds, max_bins=32)
    paired = da.train_paired(ds, plan=plan, config=config, schema=schema)
    return paired, ds


class TestErrorPairs:
    def test_counts_and_fold_assignment(self):
        paired, ds = hidden_pipeline(1.0, hidden=True, n_rows=600)
        pairs = error_pairs(paired, ds)
        fold_of = np.full(ds.n_rows, -1)
        for k in reversed(range(paired.plan.K)):
            fold_of[paired.plan.test[k]] = k
        assert pairs.n_pairs == int(np.sum(fold_of >= 0))
        assert pairs.n_excluded_never_held_out == int(np.sum(fold_of < 0))
        assert pairs.n_pairs + pairs.n_excluded_never_held_out == ds.n_rows
        assert np.all(pairs.fold_ids >= 0)
        assert np.all(pairs.mimic_error >= 0) and np.all(pairs.outcome_error >= 0)

    def test_row_in_two_folds_scored_by_lowest(self):
        paired, ds = hidden_pipeline(1.0, hidden=True, n_rows=600)
        both = set(paired.plan.test[0]) & set(paired.plan.test[1])
        if not both:
            pytest.skip("seed produced disjoint test folds")
        row = min(both)
        pairs = error_pairs(paired, ds)
        fold_of = np.full(ds.n_rows, -1)
        for k in reversed(range(paired.plan.K)):
            fold_of[paired.plan.test[k]] = k
        held = np.flatnonzero(fold_of >= 0)
        assert fold_of[row] == 0
        assert pairs.fold_ids[np.searchsorted(held, row)] == 0

    def test_score_only_rows_excluded(self):
        paired, ds = hidden_pipeline(1.0, hidden=True, n_rows=600)
        outcome = ds.outcome.copy()
        outcome[::3] = np.nan
        masked = da.AuditDataset.from_arrays(
            {n: ds.columns[n] for n in ds.feature_names}, score=ds.score, outcome=outcome
        )
        pairs = error_pairs(paired, masked)
        assert pairs.n_excluded_score_only > 0
        full = error_pairs(paired, ds)
        assert pairs.n_pairs < full.n_pairs

    def test_csv_round_trip_and_header_check(self, tmp_path):
        paired, ds = hidden_pipeline(1.0, hidden=True, n_rows=600)
        pairs = error_pairs(paired, ds)
        path = tmp_path / "pairs.csv"
        pairs.to_csv(path)
        loaded = load_error_pairs_csv(path)
        np.testing.assert_array_equal(loaded.mimic_error, pairs.mimic_error)
        np.testing.assert_array_equal(loaded.outcome_error, pairs.outcome_error)
        np.testing.assert_array_equal(loaded.fold_ids, pairs.fold_ids)
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(da.DataError, match="columns"):
            load_error_pairs_csv(bad)


class TestHiddenFeatureDetection:
    def test_hidden_input_detected_and_control_clear(self):
        paired, ds = hidden_pipeline(2.0, hidden=True)
        pairs = error_pairs(paired, ds)
        result = da.correlation_test(pairs.mimic_error, pairs.outcome_error, resamples=400)
        assert result.pearson.lower > 0
        assert result.spearman.lower > 0
        assert result.kendall.lower > 0

        paired, ds = hidden_pipeline(2.0, hidden=False)
        pairs = error_pairs(paired, ds)
        control = da.correlation_test(pairs.mimic_error, pairs.outcome_error, resamples=400)
        assert control.pearson.lower < result.pearson.lower
        assert control.pearson.estimate < 0.1

    def test_correlation_monotone_in_hidden_strength(self):
        estimates = []
        for strength in (0.5, 1.0, 2.0):
            paired, ds = hidden_pipeline(strength, hidden=True, seed=11)
            pairs = error_pairs(paired, ds)
            r = da.correlation_test(pairs.mimic_error, pairs.outcome_error, resamples=200)
            estimates.append(r.spearman.estimate)
        assert estimates[0] < estimates[1] < estimates[2]

    def test_row_count_mismatch_rejected(self):
        paired, ds = hidden_pipeline(1.0, hidden=True, n_rows=600)
        shorter = da.AuditDataset.from_arrays(
            {n: ds.columns[n][:-1] for n in ds.feature_names},
            score=ds.score[:-1],
            outcome=ds.outcome[:-1],
        )
        with pytest.raises(da.DataError):
            error_pairs(paired, shorter)
