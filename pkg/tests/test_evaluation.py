"""Quality metrics, splits, grid search, and the end-to-end pipeline."""

import numpy as np
import pytest

from rssi_occupancy.evaluation import (
    EvaluationError,
    PipelineConfig,
    PipelineStageError,
    classification_metrics,
    grid_search,
    holdout_split,
    kfold_split,
    regression_metrics,
    run_pipeline,
)
from rssi_occupancy.features import FeatureDiagnostics, FeatureMatrix
from rssi_occupancy.simulator import simulate

from conftest import small_scenario


def make_matrix(rows, occupancy=None, counts=None):
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if occupancy is None:
        occupancy = np.zeros(n, dtype=bool)
    if counts is None:
        counts = occupancy.astype(np.int64)
    return FeatureMatrix(
        feature_names=tuple(f"m/f{i}" for i in range(rows.shape[1])),
        rows=rows,
        labels_occupancy=np.asarray(occupancy, dtype=bool),
        labels_count=np.asarray(counts, dtype=np.int64),
        diagnostics=FeatureDiagnostics(),
    )


class TestClassificationMetrics:
    def test_perfect_prediction(self):
        truth = np.array([True, False, True, False])
        m = classification_metrics(truth, truth)
        assert (m.precision, m.specificity, m.recall, m.accuracy) == (1.0, 1.0, 1.0, 1.0)
        assert m.degenerate == ()

    def test_hand_computed_counts(self):
        # tp=2, fp=1, tn=3, fn=0
        pred = np.array([True, True, True, False, False, False])
        truth = np.array([True, True, False, False, False, False])
        m = classification_metrics(pred, truth)
        assert (m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn) == (2, 1, 3, 0)
        assert m.precision == pytest.approx(2 / 3)
        assert m.specificity == pytest.approx(3 / 4)
        assert m.recall == 1.0
        assert m.accuracy == pytest.approx(5 / 6)

    def test_all_positive_predictor_on_balanced_data(self):
        truth = np.array([True] * 10 + [False] * 10)
        pred = np.ones(20, dtype=bool)
        m = classification_metrics(pred, truth)
        assert m.recall == 1.0
        assert m.specificity == 0.0
        assert m.accuracy == 0.5
        assert m.precision == 0.5
        assert m.degenerate == ()

    def test_degenerate_ratios_flagged_as_one(self):
        nothing = np.zeros(4, dtype=bool)
        m = classification_metrics(nothing, nothing)
        assert m.precision == 1.0 and "precision" in m.degenerate
        assert m.recall == 1.0 and "recall" in m.degenerate
        assert m.specificity == 1.0
        assert m.accuracy == 1.0

    def test_length_mismatch_and_empty(self):
        with pytest.raises(EvaluationError, match="length mismatch"):
            classification_metrics(np.array([True]), np.array([True, False]))
        with pytest.raises(EvaluationError, match="empty"):
            classification_metrics(np.array([], dtype=bool), np.array([], dtype=bool))

    def test_bounds_on_random_inputs(self):
        rng = np.random.default_rng(60)
        for _ in range(50):
            pred = rng.integers(0, 2, 30).astype(bool)
            truth = rng.integers(0, 2, 30).astype(bool)
            m = classification_metrics(pred, truth)
            for value in (m.precision, m.specificity, m.recall, m.accuracy):
                assert 0.0 <= value <= 1.0
            assert m.counts.p + m.counts.n == 30


class TestRegressionMetrics:
    def test_zero_error(self):
        truth = np.array([1.0, 2.0, 3.0])
        m = regression_metrics(truth, truth)
        assert (m.rmse, m.mae) == (0.0, 0.0)

    def test_hand_computed(self):
        m = regression_metrics(np.array([2.0, 0.0]), np.array([0.0, 0.0]))
        assert m.rmse == pytest.approx(np.sqrt(2.0), rel=1e-12)
        assert m.mae == 1.0

    def test_rmse_at_least_mae(self):
        rng = np.random.default_rng(61)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            pred = rng.normal(size=n) * 3
            truth = rng.normal(size=n) * 3
            m = regression_metrics(pred, truth)
            assert m.rmse >= m.mae - 1e-12

    def test_rmse_equals_mae_for_constant_error_magnitude(self):
        truth = np.zeros(8)
        pred = np.array([2.0, -2.0] * 4)
        m = regression_metrics(pred, truth)
        assert m.rmse == pytest.approx(m.mae, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            regression_metrics(np.array([]), np.array([]))


class TestHoldout:
    def test_75_25_split(self):
        rng = np.random.default_rng(62)
        matrix = make_matrix(rng.normal(size=(100, 2)), occupancy=rng.integers(0, 2, 100).astype(bool))
        train, test = holdout_split(matrix, "classification", seed=0)
        assert (train.n_rows, test.n_rows) == (75, 25)

    def test_rounding_rule_101_rows(self):
        rng = np.random.default_rng(63)
        matrix = make_matrix(rng.normal(size=(101, 2)), counts=rng.integers(0, 4, 101))
        train, test = holdout_split(matrix, "regression", seed=0)
        assert (train.n_rows, test.n_rows) == (76, 25)

    def test_disjoint_and_covering(self):
        rng = np.random.default_rng(64)
        rows = np.arange(40, dtype=np.float64)[:, None]
        matrix = make_matrix(rows, occupancy=rng.integers(0, 2, 40).astype(bool))
        train, test = holdout_split(matrix, "classification", seed=3)
        combined = np.sort(np.concatenate([train.rows[:, 0], test.rows[:, 0]]))
        assert np.array_equal(combined, rows[:, 0])

    def test_stratification_within_one_sample(self):
        rng = np.random.default_rng(65)
        occupancy = np.array([True] * 30 + [False] * 70)
        matrix = make_matrix(rng.normal(size=(100, 3)), occupancy=occupancy)
        train, _ = holdout_split(matrix, "classification", seed=1)
        n_true_train = int(train.labels_occupancy.sum())
        assert abs(n_true_train - 0.75 * 30) <= 1
        assert abs((train.n_rows - n_true_train) - 0.75 * 70) <= 1

    def test_tiny_class_rejected(self):
        occupancy = np.array([True] + [False] * 19)
        matrix = make_matrix(np.zeros((20, 1)), occupancy=occupancy)
        with pytest.raises(EvaluationError, match="stratified"):
            holdout_split(matrix, "classification", seed=0)

    def test_chronological_mode_takes_prefix(self):
        rows = np.arange(20, dtype=np.float64)[:, None]
        matrix = make_matrix(rows, counts=np.arange(20) % 3)
        train, test = holdout_split(matrix, "regression", seed=5, mode="chronological")
        assert np.array_equal(train.rows[:, 0], np.arange(15))
        assert np.array_equal(test.rows[:, 0], np.arange(15, 20))

    def test_seed_determinism(self):
        rng = np.random.default_rng(66)
        matrix = make_matrix(rng.normal(size=(50, 2)), occupancy=rng.integers(0, 2, 50).astype(bool))
        a_train, _ = holdout_split(matrix, "classification", seed=9)
        b_train, _ = holdout_split(matrix, "classification", seed=9)
        assert np.array_equal(a_train.rows, b_train.rows)

    def test_too_few_rows(self):
        with pytest.raises(EvaluationError):
            holdout_split(make_matrix(np.zeros((3, 1))), "regression")


class TestKfold:
    def test_ten_rows_five_folds_of_two(self):
        pairs = kfold_split(10, 5, seed=0)
        assert [len(v) for _, v in pairs] == [2, 2, 2, 2, 2]

    def test_eleven_rows_three_folds(self):
        pairs = kfold_split(11, 3, seed=0)
        assert [len(v) for _, v in pairs] == [4, 4, 3]

    def test_validation_folds_partition_rows(self):
        pairs = kfold_split(23, 5, seed=4)
        union = np.sort(np.concatenate([v for _, v in pairs]))
        assert np.array_equal(union, np.arange(23))
        for fit_idx, val_idx in pairs:
            assert np.intersect1d(fit_idx, val_idx).size == 0
            assert np.array_equal(np.sort(np.concatenate([fit_idx, val_idx])), np.arange(23))

    def test_k_must_be_supported(self):
        with pytest.raises(EvaluationError, match="one of"):
            kfold_split(20, 4, seed=0)

    def test_k_larger_than_rows(self):
        with pytest.raises(EvaluationError, match="folds"):
            kfold_split(2, 3, seed=0)


class TestGridSearch:
    def _classification_matrix(self, seed=70, n=120):
        rng = np.random.default_rng(seed)
        occupancy = rng.integers(0, 2, n).astype(bool)
        rows = rng.normal(size=(n, 3))
        rows[:, 0] += occupancy * 4.0
        return make_matrix(rows, occupancy=occupancy)

    def test_singleton_grid_returned(self):
        matrix = self._classification_matrix()
        result = grid_search("knn", [{"k": 3}], matrix, k=3, seed=0)
        assert result.best_params == {"k": 3}
        assert result.metric == "accuracy"

    def test_best_score_is_maximal_and_recomputable(self):
        matrix = self._classification_matrix()
        grid = [{"k": k} for k in (1, 3, 5, 11)]
        result = grid_search("knn", grid, matrix, k=5, seed=2)
        best = result.scores[result.best_index]
        assert all(best.mean >= s.mean for s in result.scores if s.fold_scores)
        again = grid_search("knn", [result.best_params], matrix, k=5, seed=2)
        assert again.scores[0].mean == best.mean

    def test_planted_bayes_optimal_k_selected(self):
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = 240
            occupancy = rng.integers(0, 2, n).astype(bool)
            rows = rng.normal(size=(n, 2)) + np.where(occupancy, 1.0, 0.0)[:, None]
            matrix = make_matrix(rows, occupancy=occupancy)
            result = grid_search("knn", [{"k": 1}, {"k": 11}], matrix, k=5, seed=seed)
            wins += result.best_params == {"k": 11}
        assert wins >= 19  # >= 95% of 20 seeds

    def test_winner_invariant_under_feature_scaling(self):
        matrix = self._classification_matrix(seed=71)
        scaled = make_matrix(matrix.rows * 2.0, occupancy=matrix.labels_occupancy)
        grid = [{"k": k} for k in (1, 3, 5, 11)]
        a = grid_search("knn", grid, matrix, k=5, seed=0)
        b = grid_search("knn", grid, scaled, k=5, seed=0)
        assert a.best_params == b.best_params

    def test_failing_configs_reported_and_excluded(self):
        matrix = self._classification_matrix(n=30)
        grid = [{"k": 3}, {"k": 11}]  # k=11 < fold size, fine; force failure via k>rows
        grid = [{"k": 3}, {"k": 29}]  # folds hold 20 rows; k=29 cannot fit
        result = grid_search("knn", grid, matrix, k=3, seed=0)
        assert result.scores[1].n_failed == 3
        assert result.scores[1].fold_scores == []
        assert result.best_params == {"k": 3}

    def test_all_configs_failing_is_an_error(self):
        matrix = self._classification_matrix(n=12)
        with pytest.raises(EvaluationError, match="every grid configuration failed"):
            grid_search("knn", [{"k": 11}], matrix, k=3, seed=0)

    def test_empty_grid_rejected(self):
        with pytest.raises(EvaluationError, match="empty"):
            grid_search("knn", [], self._classification_matrix(), k=3, seed=0)

    def test_regression_metric_is_neg_rmse(self):
        rng = np.random.default_rng(72)
        counts = rng.integers(0, 4, 90)
        rows = rng.normal(size=(90, 2))
        rows[:, 0] += counts * 2.0
        matrix = make_matrix(rows, counts=counts)
        result = grid_search("ridge", [{"lam": 0.001}], matrix, k=3, seed=0)
        assert result.metric == "neg_rmse"
        assert result.scores[0].mean <= 0.0


class TestRunPipeline:
    def test_detection_with_raw_representation_rejected(self, small_dataset):
        with pytest.raises(EvaluationError, match="features representation"):
            run_pipeline(small_dataset, "detection", "raw", PipelineConfig())

    def test_family_task_mismatch_rejected(self, small_dataset):
        config = PipelineConfig(families=("ridge",))
        with pytest.raises(EvaluationError, match="does not solve"):
            run_pipeline(small_dataset, "detection", "features", config)

    def test_stage_errors_name_the_stage(self):
        tiny = simulate(small_scenario(duration_s=0.5))  # shorter than one window
        with pytest.raises(PipelineStageError, match="stage 'segment'"):
            run_pipeline(tiny, "counting", "features", PipelineConfig(families=("linear",), k=3))

    def test_detection_end_to_end(self, small_dataset):
        grids = {"svm": [{"kernel": "linear", "penalty": "l2", "loss": "hinge", "C": 1.0}]}
        config = PipelineConfig(families=("svm",), k=3, seed=7, grids=grids)
        report = run_pipeline(small_dataset, "detection", "features", config)
        result = report.family_results[0]
        assert result.test_metrics.accuracy >= 0.95
        assert report.best_family == "svm"
        fp = report.fingerprint
        assert fp["n_train"] + fp["n_test"] == fp["n_rows"]
        assert fp["n_features_kept"] <= fp["n_features_total"]
        assert "per-window" in report.prediction_cadence

    def test_counting_end_to_end(self, small_dataset):
        grids = {"random_forest": [{"n_trees": 50, "depth": 8}]}
        config = PipelineConfig(families=("random_forest",), k=3, seed=7, grids=grids)
        report = run_pipeline(small_dataset, "counting", "features", config)
        assert report.family_results[0].test_metrics.mae <= 0.5

    def test_counting_raw_cadence_noted(self, small_dataset):
        grids = {"linear": [{}]}
        config = PipelineConfig(families=("linear",), k=3, seed=7, grids=grids)
        report = run_pipeline(small_dataset, "counting", "raw", config)
        assert "per-sample" in report.prediction_cadence
        assert report.fingerprint["n_rows"] > report.fingerprint["n_windows"]

    def test_report_reproducible_byte_for_byte(self, small_dataset):
        grids = {"knn": [{"k": 3}, {"k": 5}]}
        config = PipelineConfig(families=("knn",), k=3, seed=11, grids=grids)
        first = run_pipeline(small_dataset, "detection", "features", config)
        second = run_pipeline(small_dataset, "detection", "features", config)
        assert first.to_json() == second.to_json()
        assert first.scores_csv() == second.scores_csv()

    def test_best_cv_invariant_within_families(self, small_dataset):
        grids = {"knn": [{"k": 1}, {"k": 3}, {"k": 5}]}
        config = PipelineConfig(families=("knn",), k=3, seed=1, grids=grids)
        report = run_pipeline(small_dataset, "detection", "features", config)
        search = report.family_results[0].search
        best_mean = search.scores[search.best_index].mean
        assert all(best_mean >= s.mean for s in search.scores if s.fold_scores)
