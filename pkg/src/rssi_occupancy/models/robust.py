"""Outlier-robust regressors: inlier-consensus (RANSAC-style) and Theil-Sen.

The consensus estimator samples minimal row subsets, fits least squares, and
keeps the model with the largest inlier set; the inlier threshold is a
quantile of |y - median(y)| (quantile 0.5 gives the classic MAD threshold).
The Theil-Sen estimator aggregates least-squares fits on random subsets with
the spatial median (Weiszfeld iteration).
"""

from __future__ import annotations

import numpy as np

from .linear import LeastSquares

RANSAC_TRIALS = 100
_WEISZFELD_MAX_ITER = 500
_WEISZFELD_TOL = 1e-10


def _fit_full_rank(X: np.ndarray, y: np.ndarray) -> np.ndarray | None:
    """Least-squares coefficients [w..., b], or None when the subset is degenerate."""
    design = np.column_stack([X, np.ones(X.shape[0])])
    solution, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        return None
    return solution


class RansacRegression:
    """Iterative inlier consensus around a least-squares base model."""

    def __init__(self, residual_quantile: float = 0.5, n_trials: int = RANSAC_TRIALS, seed: int = 0):
        if not 0 < residual_quantile <= 1:
            raise ValueError(f"residual_quantile must be in (0, 1], got {residual_quantile}")
        self.residual_quantile = float(residual_quantile)
        self.n_trials = int(n_trials)
        self.seed = int(seed)
        self.coef_: np.ndarray | None = None
        self.intercept_: float = 0.0
        self.n_inliers_: int = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RansacRegression":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n, d = X.shape
        min_samples = d + 1
        if n < min_samples:
            raise ValueError(f"need at least {min_samples} rows, got {n}")
        threshold = float(np.quantile(np.abs(y - np.median(y)), self.residual_quantile))
        if threshold <= 0:
            threshold = 1e-12

        rng = np.random.default_rng(self.seed)
        best: tuple[int, float] | None = None
        best_mask: np.ndarray | None = None
        for _ in range(self.n_trials):
            subset = rng.choice(n, size=min_samples, replace=False)
            solution = _fit_full_rank(X[subset], y[subset])
            if solution is None:
                continue
            residuals = np.abs(X @ solution[:-1] + solution[-1] - y)
            mask = residuals <= threshold
            score = (int(mask.sum()), -float(np.sum(residuals[mask] ** 2)))
            if best is None or score > best:
                best = score
                best_mask = mask
        if best_mask is None:
            raise ValueError("every sampled subset was rank-deficient")

        refit = LeastSquares().fit(X[best_mask], y[best_mask])
        self.coef_ = refit.coef_
        self.intercept_ = refit.intercept_
        self.n_inliers_ = int(best_mask.sum())
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def state(self) -> dict:
        return {
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "n_inliers": self.n_inliers_,
            "residual_quantile": self.residual_quantile,
        }

    @classmethod
    def from_state(cls, state: dict) -> "RansacRegression":
        model = cls(residual_quantile=state["residual_quantile"])
        model.coef_ = np.asarray(state["coef"], dtype=np.float64)
        model.intercept_ = float(state["intercept"])
        model.n_inliers_ = int(state["n_inliers"])
        return model


def spatial_median(points: np.ndarray) -> np.ndarray:
    """Geometric median via Weiszfeld updates; exact for coincident points."""
    points = np.asarray(points, dtype=np.float64)
    center = points.mean(axis=0)
    scale = max(float(np.max(np.abs(points))), 1.0)
    for _ in range(_WEISZFELD_MAX_ITER):
        distances = np.linalg.norm(points - center, axis=1)
        if np.all(distances < _WEISZFELD_TOL * scale):
            return center
        weights = 1.0 / np.maximum(distances, _WEISZFELD_TOL * scale)
        updated = (weights[:, None] * points).sum(axis=0) / weights.sum()
        if np.linalg.norm(updated - center) < _WEISZFELD_TOL * scale:
            return updated
        center = updated
    return center


class TheilSenRegression:
    """Spatial-median aggregation of least-squares fits on random row subsets."""

    def __init__(self, n_subsets: int = 200, seed: int = 0):
        if n_subsets < 1:
            raise ValueError(f"n_subsets must be >= 1, got {n_subsets}")
        self.n_subsets = int(n_subsets)
        self.seed = int(seed)
        self.coef_: np.ndarray | None = None
        self.intercept_: float = 0.0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "TheilSenRegression":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n, d = X.shape
        subset_size = d + 1
        if n < subset_size:
            raise ValueError(f"need at least {subset_size} rows, got {n}")

        rng = np.random.default_rng(self.seed)
        solutions = []
        attempts = 0
        while len(solutions) < self.n_subsets and attempts < 10 * self.n_subsets:
            attempts += 1
            subset = rng.choice(n, size=subset_size, replace=False)
            solution = _fit_full_rank(X[subset], y[subset])
            if solution is not None:
                solutions.append(solution)
        if not solutions:
            raise ValueError("every sampled subset was rank-deficient")

        median = spatial_median(np.vstack(solutions))
        self.coef_ = median[:-1]
        self.intercept_ = float(median[-1])
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def state(self) -> dict:
        return {
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "n_subsets": self.n_subsets,
        }

    @classmethod
    def from_state(cls, state: dict) -> "TheilSenRegression":
        model = cls(n_subsets=state["n_subsets"])
        model.coef_ = np.asarray(state["coef"], dtype=np.float64)
        model.intercept_ = float(state["intercept"])
        return model
