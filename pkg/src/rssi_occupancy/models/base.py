"""Uniform fit/predict contract over the classifier and regressor families.

Classifier families: knn, wknn, lda, qlda, svm.
Regressor families: gradient_boosting, random_forest, linear, ridge, ransac,
bayesian, theil_sen.

``ModelSpec`` names a family, a hyperparameter mapping (keys restricted to
the family's documented grid dimensions) and a seed; ``fit`` returns an
immutable ``TrainedModel`` whose predictions are deterministic given
(spec, seed, data).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .. import __version__
from .discriminant import LinearDiscriminant
from .ensembles import GradientBoosting, RandomForest
from .linear import BayesianRidge, LeastSquares, RidgeRegression
from .neighbors import NearestNeighbors
from .robust import RansacRegression, TheilSenRegression
from .svm import SupportVectorClassifier

CLASSIFIER_FAMILIES = ("knn", "wknn", "lda", "qlda", "svm")
REGRESSOR_FAMILIES = (
    "gradient_boosting",
    "random_forest",
    "linear",
    "ridge",
    "ransac",
    "bayesian",
    "theil_sen",
)
FAMILIES = CLASSIFIER_FAMILIES + REGRESSOR_FAMILIES

_PARAM_KEYS: dict[str, frozenset[str]] = {
    "knn": frozenset({"k"}),
    "wknn": frozenset({"k"}),
    "lda": frozenset(),
    "qlda": frozenset(),
    "svm": frozenset({"kernel", "penalty", "loss", "C"}),
    "gradient_boosting": frozenset({"n_trees", "depth"}),
    "random_forest": frozenset({"n_trees", "depth"}),
    "linear": frozenset(),
    "ridge": frozenset({"lam"}),
    "ransac": frozenset({"residual_quantile"}),
    "bayesian": frozenset({"lam"}),
    "theil_sen": frozenset({"n_subsets"}),
}

_DEFAULTS: dict[str, dict] = {
    "knn": {"k": 5},
    "wknn": {"k": 5},
    "lda": {},
    "qlda": {},
    "svm": {"kernel": "linear", "penalty": "l2", "loss": "hinge", "C": 1.0},
    "gradient_boosting": {"n_trees": 100, "depth": 4},
    "random_forest": {"n_trees": 100, "depth": None},
    "linear": {},
    "ridge": {"lam": 1.0},
    "ransac": {"residual_quantile": 0.5},
    "bayesian": {"lam": 1.0},
    "theil_sen": {"n_subsets": 200},
}

MODEL_FORMAT = "rssi-occupancy/model"
MODEL_FORMAT_VERSION = 1


class ModelError(ValueError):
    """Unknown family, bad hyperparameters, or degenerate training input."""


def family_task(family: str) -> str:
    if family in CLASSIFIER_FAMILIES:
        return "classification"
    if family in REGRESSOR_FAMILIES:
        return "regression"
    raise ModelError(f"unknown model family {family!r}")


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus its hyperparameter configuration and seed."""

    family: str
    params: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        allowed = _PARAM_KEYS.get(self.family)
        if allowed is None:
            raise ModelError(f"unknown model family {self.family!r}")
        unknown = set(self.params) - allowed
        if unknown:
            raise ModelError(
                f"{self.family}: unknown hyperparameters {sorted(unknown)}; "
                f"allowed: {sorted(allowed)}"
            )

    def resolved_params(self) -> dict:
        merged = dict(_DEFAULTS[self.family])
        merged.update(self.params)
        return merged


def default_grid(family: str) -> list[dict]:
    """The documented hyperparameter grid, in deterministic order."""
    if family in ("knn", "wknn"):
        return [{"k": k} for k in (1, 3, 5, 11)]
    if family in ("lda", "qlda", "linear"):
        return [{}]
    if family == "svm":
        return [
            {"kernel": kernel, "penalty": penalty, "loss": loss, "C": c}
            for kernel in ("linear", "poly", "sigmoid", "rbf")
            for penalty in ("l1", "l2")
            for loss in ("hinge", "squared_hinge")
            for c in (0.1, 1.0, 10.0)
        ]
    if family in ("random_forest", "gradient_boosting"):
        return [
            {"n_trees": n, "depth": depth} for n in (50, 200) for depth in (4, 8, None)
        ]
    if family in ("ridge", "bayesian"):
        return [{"lam": lam} for lam in (1e-3, 1e-1, 1.0)]
    if family == "theil_sen":
        return [{"n_subsets": n} for n in (200, 500)]
    if family == "ransac":
        return [{"residual_quantile": 0.5}]
    raise ModelError(f"unknown model family {family!r}")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted model: spec, task, and family-specific fitted state."""

    spec: ModelSpec
    task: str
    n_features: int
    inner: object
    classes: np.ndarray | None = None  # classification only

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Class labels (classification) or real-valued estimates (regression)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(
                f"column mismatch: model was fitted on {self.n_features} features, "
                f"got {X.shape[1] if X.ndim == 2 else X.ndim}"
            )
        raw = self.inner.predict(X)
        if self.task == "classification":
            return self.classes[np.asarray(raw, dtype=np.int64)]
        return np.asarray(raw, dtype=np.float64)

    def predict_count(self, X: np.ndarray) -> np.ndarray:
        """Integer occupant view: round half away from zero, clamp at 0."""
        if self.task != "regression":
            raise ModelError("predict_count is defined for regression models only")
        estimates = self.predict(X)
        return np.maximum(np.floor(estimates + 0.5), 0.0).astype(np.int64)


def _build_inner(spec: ModelSpec, params: dict):
    family = spec.family
    if family in ("knn", "wknn"):
        return NearestNeighbors(k=int(params["k"]), weighted=family == "wknn")
    if family in ("lda", "qlda"):
        return LinearDiscriminant(quadratic=family == "qlda")
    if family == "svm":
        return SupportVectorClassifier(
            kernel=params["kernel"],
            penalty=params["penalty"],
            loss=params["loss"],
            C=float(params["C"]),
        )
    if family == "random_forest":
        return RandomForest(
            task="regression",
            n_trees=int(params["n_trees"]),
            max_depth=params["depth"],
            seed=spec.seed,
        )
    if family == "gradient_boosting":
        return GradientBoosting(
            n_trees=int(params["n_trees"]), max_depth=params["depth"], seed=spec.seed
        )
    if family == "linear":
        return LeastSquares()
    if family == "ridge":
        return RidgeRegression(lam=float(params["lam"]))
    if family == "bayesian":
        return BayesianRidge(lam=float(params["lam"]))
    if family == "ransac":
        return RansacRegression(
            residual_quantile=float(params["residual_quantile"]), seed=spec.seed
        )
    if family == "theil_sen":
        return TheilSenRegression(n_subsets=int(params["n_subsets"]), seed=spec.seed)
    raise ModelError(f"unknown model family {family!r}")


def fit(spec: ModelSpec, X: np.ndarray, y: np.ndarray) -> TrainedModel:
    """Fit ``spec`` on (X, y); deterministic given the spec's seed."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ModelError("X must be a 2-D matrix")
    if X.shape[0] < 2:
        raise ModelError(f"need at least 2 training rows, got {X.shape[0]}")
    y = np.asarray(y)
    if y.shape[0] != X.shape[0]:
        raise ModelError("X and y row counts differ")

    task = family_task(spec.family)
    params = spec.resolved_params()
    inner = _build_inner(spec, params)

    if task == "classification":
        classes, y_idx = np.unique(y, return_inverse=True)
        if classes.size < 2:
            raise ModelError("classification needs at least 2 distinct labels")
        try:
            inner.fit(X, y_idx, classes.size)
        except np.linalg.LinAlgError as exc:
            raise ModelError(f"{spec.family}: degenerate training data ({exc})") from exc
        return TrainedModel(
            spec=spec, task=task, n_features=X.shape[1], inner=inner, classes=classes
        )

    y_float = y.astype(np.float64)
    if np.unique(y_float).size < 2:
        raise ModelError("regression needs at least 2 distinct target values")
    try:
        inner.fit(X, y_float)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{spec.family}: degenerate training data ({exc})") from exc
    return TrainedModel(spec=spec, task=task, n_features=X.shape[1], inner=inner)


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return model.predict(X)


def predictions_to_csv(predictions: np.ndarray, column: str = "prediction") -> str:
    """Export a prediction vector as a one-column CSV."""
    values = np.asarray(predictions)
    lines = [column]
    for value in values:
        if isinstance(value, (bool, np.bool_)):
            lines.append("true" if value else "false")
        elif isinstance(value, (int, np.integer)):
            lines.append(str(int(value)))
        else:
            lines.append(repr(float(value)))
    return "\n".join(lines) + "\n"


_CLASS_KINDS = {"b": bool, "i": int, "u": int, "f": float, "U": str}


def model_to_text(model: TrainedModel) -> str:
    """Self-describing text artifact (JSON) with a format/version tag."""
    document = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "package_version": __version__,
        "family": model.spec.family,
        "params": model.spec.resolved_params(),
        "seed": model.spec.seed,
        "task": model.task,
        "n_features": model.n_features,
        "state": model.inner.state(),
    }
    if model.classes is not None:
        document["classes"] = model.classes.tolist()
        document["classes_kind"] = model.classes.dtype.kind
    return json.dumps(document, sort_keys=True, indent=1)


_INNER_TYPES = {
    "knn": NearestNeighbors,
    "wknn": NearestNeighbors,
    "lda": LinearDiscriminant,
    "qlda": LinearDiscriminant,
    "svm": SupportVectorClassifier,
    "random_forest": RandomForest,
    "gradient_boosting": GradientBoosting,
    "linear": LeastSquares,
    "ridge": RidgeRegression,
    "bayesian": BayesianRidge,
    "ransac": RansacRegression,
    "theil_sen": TheilSenRegression,
}


def model_from_text(text: str) -> TrainedModel:
    document = json.loads(text)
    if document.get("format") != MODEL_FORMAT:
        raise ModelError(f"not a model artifact (format={document.get('format')!r})")
    if document.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {document.get('format_version')!r}")
    family = document["family"]
    spec = ModelSpec(family=family, params=document["params"], seed=document["seed"])
    inner = _INNER_TYPES[family].from_state(document["state"])
    classes = None
    if "classes" in document:
        kind = _CLASS_KINDS.get(document.get("classes_kind", "i"), int)
        classes = np.array([kind(c) for c in document["classes"]])
    return TrainedModel(
        spec=spec,
        task=document["task"],
        n_features=int(document["n_features"]),
        inner=inner,
        classes=classes,
    )
