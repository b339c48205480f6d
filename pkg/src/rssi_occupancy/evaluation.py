"""Hold-out split, k-fold cross-validation, grid search and quality metrics.

``run_pipeline`` wires the whole offline workflow: dedup -> segment ->
featurize (or raw pass-through) -> stratified 75/25 hold-out -> robust
scaling and tree-based selection fitted on the training split -> exhaustive
grid search per model family under k-fold cross-validation -> final test
evaluation of every family's best configuration.

Selection metrics: accuracy for detection, negated RMSE for counting.
Regression test metrics are computed on the unrounded estimates; the rounded
occupant view is presentation-only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .dataset import RssiDataset, deduplicate
from .features import FeatureMatrix, build_feature_matrix, build_raw_matrix, segment
from .models import ModelSpec, default_grid, family_task, fit
from .preprocess import SelectionConfig, apply_mask, apply_scaler, fit_scaler, select_features

KFOLD_CHOICES = (3, 5, 10)

TASKS = ("detection", "counting")
REPRESENTATIONS = ("features", "raw")


class EvaluationError(ValueError):
    """Bad evaluation input or an unsatisfiable request."""


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def p(self) -> int:
        return self.tp + self.fn

    @property
    def n(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.p + self.n


@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    specificity: float
    recall: float
    accuracy: float
    counts: ConfusionCounts
    degenerate: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "specificity": self.specificity,
            "recall": self.recall,
            "accuracy": self.accuracy,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "tn": self.counts.tn,
            "fn": self.counts.fn,
            "degenerate": list(self.degenerate),
        }


@dataclass(frozen=True)
class RegressionMetrics:
    rmse: float
    mae: float

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae}


def classification_metrics(pred: np.ndarray, truth: np.ndarray) -> ClassificationMetrics:
    """Precision, specificity, recall, accuracy; positive = occupied.

    Ratios with a zero denominator are reported as 1 and flagged.
    """
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise EvaluationError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise EvaluationError("cannot score an empty prediction vector")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    tn = int(np.count_nonzero(~pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    counts = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)

    degenerate: list[str] = []

    def ratio(numerator: int, denominator: int, name: str) -> float:
        if denominator == 0:
            degenerate.append(name)
            return 1.0
        return numerator / denominator

    precision = ratio(tp, tp + fp, "precision")
    specificity = ratio(tn, fp + tn, "specificity")
    recall = ratio(tp, tp + fn, "recall")
    accuracy = (tp + tn) / counts.total
    return ClassificationMetrics(
        precision=precision,
        specificity=specificity,
        recall=recall,
        accuracy=accuracy,
        counts=counts,
        degenerate=tuple(degenerate),
    )


def regression_metrics(pred: np.ndarray, truth: np.ndarray) -> RegressionMetrics:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise EvaluationError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise EvaluationError("cannot score empty vectors")
    errors = pred - truth
    return RegressionMetrics(
        rmse=float(np.sqrt(np.mean(errors**2))), mae=float(np.mean(np.abs(errors)))
    )


def holdout_split(
    matrix: FeatureMatrix,
    task: str = "classification",
    ratio: float = 0.75,
    seed: int = 0,
    mode: str = "random",
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Disjoint covering train/test split; |train| = round(ratio * N).

    Classification splits are stratified on the occupancy label (per-class
    train share within one sample of the global ratio); regression splits are
    plain random. ``mode="chronological"`` takes the first rows as training
    data instead, for callers worried about temporal leakage.
    """
    n = matrix.n_rows
    if n < 4:
        raise EvaluationError(f"need at least 4 rows to split, got {n}")
    if not 0 < ratio < 1:
        raise EvaluationError(f"ratio must be in (0, 1), got {ratio}")
    n_train = round(ratio * n)
    n_train = min(max(n_train, 1), n - 1)

    if mode == "chronological":
        train_idx = np.arange(n_train)
        test_idx = np.arange(n_train, n)
    elif mode == "random":
        rng = np.random.default_rng(seed)
        if task == "classification":
            labels = matrix.labels_occupancy
            classes = np.unique(labels)
            allocations: dict = {}
            fractions = []
            total_base = 0
            for c in classes:
                members = np.flatnonzero(labels == c)
                if members.size < 2:
                    raise EvaluationError(
                        f"stratified split impossible: class {c} has {members.size} member(s)"
                    )
                exact = ratio * members.size
                base = int(np.floor(exact))
                allocations[bool(c)] = [members, base]
                fractions.append((exact - base, bool(c)))
                total_base += base
            remainder = max(0, n_train - total_base)
            for _, c in sorted(fractions, key=lambda item: -item[0])[:remainder]:
                allocations[c][1] += 1
            train_parts = []
            for c in classes:
                members, take = allocations[bool(c)]
                shuffled = rng.permutation(members)
                train_parts.append(shuffled[:take])
            train_idx = np.sort(np.concatenate(train_parts))
            test_idx = np.setdiff1d(np.arange(n), train_idx)
        else:
            perm = rng.permutation(n)
            train_idx = np.sort(perm[:n_train])
            test_idx = np.sort(perm[n_train:])
    else:
        raise EvaluationError(f"unknown split mode {mode!r}")
    return matrix.take_rows(train_idx), matrix.take_rows(test_idx)


def kfold_split(n_rows: int, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """k (fit, validate) index pairs; validation folds partition the rows."""
    if k not in KFOLD_CHOICES:
        raise EvaluationError(f"k must be one of {KFOLD_CHOICES}, got {k}")
    if n_rows < k:
        raise EvaluationError(f"cannot make {k} folds from {n_rows} rows")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_rows)
    folds = np.array_split(perm, k)
    pairs = []
    for i in range(k):
        validate_idx = np.sort(folds[i])
        fit_idx = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        pairs.append((fit_idx, validate_idx))
    return pairs


@dataclass
class ConfigScore:
    params: dict
    fold_scores: list[float]
    n_failed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores)) if self.fold_scores else float("-inf")

    @property
    def sd(self) -> float:
        return float(np.std(self.fold_scores)) if self.fold_scores else float("nan")


@dataclass
class GridSearchResult:
    family: str
    scores: list[ConfigScore]
    best_index: int
    metric: str

    @property
    def best_params(self) -> dict:
        return self.scores[self.best_index].params


def grid_search(
    family: str,
    grid: Sequence[Mapping],
    train: FeatureMatrix,
    k: int = 5,
    seed: int = 0,
) -> GridSearchResult:
    """Evaluate every config with k-fold CV; ties break by grid order.

    Metric: accuracy for classifiers, negated RMSE for regressors. Configs
    whose fit fails on every fold are excluded (kept in the report with an
    empty score list); if every config fails, that is an error.
    """
    if not grid:
        raise EvaluationError("empty hyperparameter grid")
    task = family_task(family)
    y = train.labels_for(task)
    folds = kfold_split(train.n_rows, k, seed)

    scores: list[ConfigScore] = []
    for params in grid:
        spec = ModelSpec(family=family, params=dict(params), seed=seed)
        fold_scores: list[float] = []
        n_failed = 0
        for fit_idx, val_idx in folds:
            try:
                model = fit(spec, train.rows[fit_idx], y[fit_idx])
                pred = model.predict(train.rows[val_idx])
            except Exception:
                n_failed += 1
                continue
            if task == "classification":
                fold_scores.append(float(np.mean(pred == y[val_idx])))
            else:
                fold_scores.append(
                    -regression_metrics(pred, y[val_idx]).rmse
                )
        scores.append(ConfigScore(params=dict(params), fold_scores=fold_scores, n_failed=n_failed))

    usable = [i for i, s in enumerate(scores) if s.fold_scores]
    if not usable:
        raise EvaluationError(f"{family}: every grid configuration failed to fit")
    best_index = max(usable, key=lambda i: (scores[i].mean, -i))
    metric = "accuracy" if task == "classification" else "neg_rmse"
    return GridSearchResult(family=family, scores=scores, best_index=best_index, metric=metric)


@dataclass(frozen=True)
class PipelineConfig:
    families: tuple[str, ...] = ()
    window_s: float = 1.0
    holdout_ratio: float = 0.75
    k: int = 5
    seed: int = 0
    split_mode: str = "random"
    selection: SelectionConfig | None = None
    grids: Mapping[str, Sequence[Mapping]] | None = None


@dataclass
class FamilyResult:
    family: str
    search: GridSearchResult
    test_metrics: ClassificationMetrics | RegressionMetrics

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "metric": self.search.metric,
            "grid": [
                {
                    "params": _json_params(s.params),
                    "cv_mean": s.mean if s.fold_scores else None,
                    "cv_sd": s.sd if s.fold_scores else None,
                    "folds_failed": s.n_failed,
                }
                for s in self.search.scores
            ],
            "best_params": _json_params(self.search.best_params),
            "best_cv_score": self.search.scores[self.search.best_index].mean,
            "test": self.test_metrics.as_dict(),
        }


def _json_params(params: Mapping) -> dict:
    return {key: params[key] for key in sorted(params)}


@dataclass
class EvalReport:
    task: str
    representation: str
    config: PipelineConfig
    fingerprint: dict
    family_results: list[FamilyResult]
    best_family: str
    prediction_cadence: str
    run_config: dict | None = None
    versions: dict = field(default_factory=lambda: {"rssi_occupancy": __version__})

    def as_dict(self) -> dict:
        return {
            "task": self.task,
            "representation": self.representation,
            "window_s": self.config.window_s,
            "holdout_ratio": self.config.holdout_ratio,
            "k": self.config.k,
            "seed": self.config.seed,
            "split_mode": self.config.split_mode,
            "families": [r.as_dict() for r in self.family_results],
            "best_family": self.best_family,
            "prediction_cadence": self.prediction_cadence,
            "fingerprint": self.fingerprint,
            "run_config": self.run_config,
            "versions": self.versions,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

    def scores_csv(self) -> str:
        lines = ["family,config_index,params,cv_mean,cv_sd,folds_failed"]
        for result in self.family_results:
            for i, score in enumerate(result.search.scores):
                params = ";".join(f"{k}={v}" for k, v in sorted(score.params.items()))
                mean = repr(score.mean) if score.fold_scores else ""
                sd = repr(score.sd) if score.fold_scores else ""
                lines.append(
                    f"{result.family},{i},{params},{mean},{sd},{score.n_failed}"
                )
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        lines = [f"task={self.task} representation={self.representation}"]
        for result in self.family_results:
            metrics = result.test_metrics
            if isinstance(metrics, ClassificationMetrics):
                lines.append(
                    f"{result.family}: accuracy={metrics.accuracy:.4f} "
                    f"precision={metrics.precision:.4f} recall={metrics.recall:.4f} "
                    f"specificity={metrics.specificity:.4f} ({result.search.best_params})"
                )
            else:
                lines.append(
                    f"{result.family}: rmse={metrics.rmse:.4f} mae={metrics.mae:.4f} "
                    f"({result.search.best_params})"
                )
        lines.append(f"best family: {self.best_family}")
        return "\n".join(lines)


def _count_balance(counts: np.ndarray) -> dict:
    values, freq = np.unique(counts, return_counts=True)
    return {str(int(v)): int(f) for v, f in zip(values, freq)}


def run_pipeline(
    dataset: RssiDataset,
    task: str,
    representation: str,
    config: PipelineConfig,
) -> EvalReport:
    """Execute the full offline workflow and score each family on the test set."""
    if task not in TASKS:
        raise EvaluationError(f"unknown task {task!r}; expected one of {TASKS}")
    if representation not in REPRESENTATIONS:
        raise EvaluationError(f"unknown representation {representation!r}")
    if task == "detection" and representation == "raw":
        raise EvaluationError(
            "detection requires the features representation: the classifiers "
            "cannot consume unsegmented raw samples"
        )
    families = config.families or (
        ("knn", "wknn", "lda", "qlda", "svm")
        if task == "detection"
        else ("gradient_boosting", "random_forest", "linear", "ridge", "ransac", "bayesian", "theil_sen")
    )
    model_task = "classification" if task == "detection" else "regression"
    for family in families:
        if family_task(family) != model_task:
            raise EvaluationError(f"family {family!r} does not solve task {task!r}")

    def stage(name, function, *args, **kwargs):
        try:
            return function(*args, **kwargs)
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc

    deduped = stage("deduplicate", deduplicate, dataset)
    windows = stage("segment", segment, deduped, config.window_s)
    if representation == "features":
        matrix = stage("featurize", build_feature_matrix, windows)
        cadence = f"per-window (one estimate every {config.window_s:g} s)"
    else:
        matrix = stage("raw-matrix", build_raw_matrix, windows)
        cadence = (
            f"per-sample (one estimate every {1000.0 / dataset.sampling_hz:g} ms "
            f"at {dataset.sampling_hz:g} Hz)"
        )

    train, test = stage(
        "holdout-split",
        holdout_split,
        matrix,
        model_task,
        config.holdout_ratio,
        config.seed,
        config.split_mode,
    )

    scaler = stage("fit-scaler", fit_scaler, train)
    train = stage("apply-scaler", apply_scaler, train, scaler)
    test = stage("apply-scaler", apply_scaler, test, scaler)

    n_features_total = train.n_features
    n_kept = n_features_total
    if representation == "features":
        selection_config = config.selection or SelectionConfig(seed=config.seed)
        mask = stage("select-features", select_features, train, train.labels_for(model_task),
                     selection_config, model_task)
        train = stage("apply-selection", apply_mask, train, mask)
        test = stage("apply-selection", apply_mask, test, mask)
        n_kept = int(mask.kept.size)

    y_train = train.labels_for(model_task)
    y_test = test.labels_for(model_task)

    family_results: list[FamilyResult] = []
    for family in families:
        grid = list((config.grids or {}).get(family, default_grid(family)))
        search = stage(f"grid-search[{family}]", grid_search, family, grid, train,
                       config.k, config.seed)
        spec = ModelSpec(family=family, params=search.best_params, seed=config.seed)
        model = stage(f"final-fit[{family}]", fit, spec, train.rows, y_train)
        pred = stage(f"test-predict[{family}]", model.predict, test.rows)
        if model_task == "classification":
            metrics = classification_metrics(pred, test.labels_occupancy)
        else:
            metrics = regression_metrics(pred, y_test)
        family_results.append(FamilyResult(family=family, search=search, test_metrics=metrics))

    if model_task == "classification":
        best = max(family_results, key=lambda r: r.test_metrics.accuracy)
    else:
        best = min(family_results, key=lambda r: r.test_metrics.rmse)

    fingerprint = {
        "n_records": len(dataset.records),
        "n_records_deduped": len(deduped.records),
        "n_windows": len(windows),
        "n_rows": matrix.n_rows,
        "n_train": train.n_rows,
        "n_test": test.n_rows,
        "occupied_fraction": float(np.mean(matrix.labels_occupancy)),
        "count_histogram": _count_balance(matrix.labels_count),
        "n_features_total": n_features_total,
        "n_features_kept": n_kept,
        "sampling_hz": dataset.sampling_hz,
        "nonfinite_replaced": matrix.diagnostics.nonfinite_replaced,
        "hf_ratio_ill_posed": matrix.diagnostics.hf_ratio_ill_posed,
    }
    return EvalReport(
        task=task,
        representation=representation,
        config=config,
        fingerprint=fingerprint,
        family_results=family_results,
        best_family=best.family,
        prediction_cadence=cadence,
    )
