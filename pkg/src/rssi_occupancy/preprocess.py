"""Robust-scaler normalization and tree-based feature selection.

Both transforms are fitted on training data only and applied unchanged to
test data, so no test statistic leaks into the model.

Scaling: x_nor = (x - Q2) / (Q3 - Q1) per column, with quartiles interpolated
linearly between closest ranks; zero-IQR columns are centered only
(divisor 1).

Selection: a random forest is fitted on the training matrix (Gini impurity
for classification, variance for regression) and columns whose normalized
total impurity decrease reaches the mean importance are kept. Exact duplicate
columns are fitted once and share their importance equally, which keeps the
ranking symmetric under feature duplication. The mask is never empty: if no
column reaches the threshold the single top column is kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix
from .models.ensembles import RandomForest


class PreprocessError(ValueError):
    """Bad input to scaling or selection."""


@dataclass(frozen=True)
class ScalerParams:
    """Per-column training quartiles."""

    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.q1.shape[0]


@dataclass(frozen=True)
class SelectionMask:
    """Kept column indices plus the per-column importance distribution."""

    kept: np.ndarray  # strictly increasing column indices
    importances: np.ndarray  # non-negative, sums to 1


@dataclass(frozen=True)
class SelectionConfig:
    n_trees: int = 50
    min_leaf: int = 1
    importance_rule: str = "mean"
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise PreprocessError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_leaf < 1:
            raise PreprocessError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.importance_rule not in ("mean", "median"):
            raise PreprocessError(f"unknown importance_rule {self.importance_rule!r}")


def fit_scaler(train: FeatureMatrix) -> ScalerParams:
    """Per-column Q1/Q2/Q3 of the training matrix."""
    if train.n_rows < 1:
        raise PreprocessError("cannot fit a scaler on an empty matrix")
    q1, q2, q3 = np.percentile(train.rows, (25, 50, 75), axis=0)
    return ScalerParams(q1=q1, q2=q2, q3=q3)


def apply_scaler(matrix: FeatureMatrix, params: ScalerParams) -> FeatureMatrix:
    """x_nor = (x - Q2) / (Q3 - Q1); zero-IQR columns only get centered."""
    if matrix.n_features != params.n_columns:
        raise PreprocessError(
            f"column mismatch: matrix has {matrix.n_features}, scaler {params.n_columns}"
        )
    iqr = params.q3 - params.q1
    divisor = np.where(iqr > 0, iqr, 1.0)
    return FeatureMatrix(
        feature_names=matrix.feature_names,
        rows=(matrix.rows - params.q2) / divisor,
        labels_occupancy=matrix.labels_occupancy,
        labels_count=matrix.labels_count,
        diagnostics=matrix.diagnostics,
    )


def _duplicate_groups(rows: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Unique-column representatives plus the member indices of each group."""
    groups: dict[bytes, list[int]] = {}
    for j in range(rows.shape[1]):
        groups.setdefault(rows[:, j].tobytes(), []).append(j)
    representatives = np.array([members[0] for members in groups.values()], dtype=np.int64)
    return representatives, [np.array(m, dtype=np.int64) for m in groups.values()]


def select_features(
    train: FeatureMatrix,
    labels: np.ndarray,
    config: SelectionConfig = SelectionConfig(),
    task: str = "classification",
) -> SelectionMask:
    """Forest-importance selection; deterministic under the config seed."""
    labels = np.asarray(labels)
    if task == "classification":
        classes, y = np.unique(labels, return_inverse=True)
        if classes.size < 2:
            raise PreprocessError("selection needs at least 2 distinct labels")
    elif task == "regression":
        y = labels.astype(np.float64)
        if np.unique(y).size < 2:
            raise PreprocessError("selection needs at least 2 distinct targets")
    else:
        raise PreprocessError(f"unknown task {task!r}")
    if train.n_rows < 2:
        raise PreprocessError("selection needs at least 2 rows")

    representatives, groups = _duplicate_groups(train.rows)
    forest = RandomForest(
        task=task,
        n_trees=config.n_trees,
        max_depth=config.max_depth,
        min_leaf=config.min_leaf,
        max_features="sqrt",
        seed=config.seed,
    )
    forest.fit(train.rows[:, representatives], y)

    importances = np.zeros(train.n_features)
    for group, unique_importance in zip(groups, forest.importances_):
        importances[group] = unique_importance / group.size

    total = importances.sum()
    importances = importances / total if total > 0 else np.full_like(importances, 1.0 / importances.size)

    if config.importance_rule == "mean":
        threshold = importances.mean()
    else:
        threshold = np.median(importances)
    # epsilon keeps exact-equality cases (uniform importances) in the mask
    kept = np.flatnonzero(importances >= threshold - 1e-12)
    if kept.size == 0:
        kept = np.array([int(np.argmax(importances))], dtype=np.int64)
    return SelectionMask(kept=kept, importances=importances)


def apply_mask(matrix: FeatureMatrix, mask: SelectionMask) -> FeatureMatrix:
    if mask.kept.size and int(mask.kept.max()) >= matrix.n_features:
        raise PreprocessError("selection mask refers to columns beyond the matrix width")
    return matrix.take_columns(mask.kept)


# -- plain-text sidecar (re-apply a trained pipeline later) -------------------


def scaler_to_text(params: ScalerParams, feature_names: tuple[str, ...]) -> str:
    lines = ["# robust scaler: name q1 q2 q3"]
    for name, q1, q2, q3 in zip(feature_names, params.q1, params.q2, params.q3):
        lines.append(f"{name} {float(q1)!r} {float(q2)!r} {float(q3)!r}")
    return "\n".join(lines) + "\n"


def scaler_from_text(text: str) -> tuple[ScalerParams, tuple[str, ...]]:
    names: list[str] = []
    quartiles: list[tuple[float, float, float]] = []
    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        name, q1, q2, q3 = stripped.rsplit(" ", 3)
        names.append(name)
        quartiles.append((float(q1), float(q2), float(q3)))
    arr = np.array(quartiles, dtype=np.float64).reshape(-1, 3)
    return (
        ScalerParams(q1=arr[:, 0], q2=arr[:, 1], q3=arr[:, 2]),
        tuple(names),
    )


def mask_to_text(mask: SelectionMask) -> str:
    lines = ["# feature selection: kept column indices, then importances"]
    lines.append("kept " + " ".join(str(int(i)) for i in mask.kept))
    lines.append("importances " + " ".join(repr(float(v)) for v in mask.importances))
    return "\n".join(lines) + "\n"


def mask_from_text(text: str) -> SelectionMask:
    kept: np.ndarray | None = None
    importances: np.ndarray | None = None
    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, _, rest = stripped.partition(" ")
        if key == "kept":
            kept = np.array([int(v) for v in rest.split()], dtype=np.int64)
        elif key == "importances":
            importances = np.array([float(v) for v in rest.split()], dtype=np.float64)
    if kept is None or importances is None:
        raise PreprocessError("selection sidecar is missing kept/importances lines")
    return SelectionMask(kept=kept, importances=importances)
