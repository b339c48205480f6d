"""Bagged and boosted tree ensembles built on the CART core.

Random forests bootstrap rows per tree and subsample features per split
(``sqrt`` policy by default); per-tree generators are spawned from one seed
sequence, so results are seed-deterministic and trees could be fitted in
parallel without changing the outcome.

Gradient boosting fits regression trees to residuals under squared loss with
shrinkage; the recorded training loss per round is non-increasing for
learning rates in (0, 2].
"""

from __future__ import annotations

import numpy as np

from .trees import DecisionTree


def _resolve_max_features(policy, d: int) -> int | None:
    if policy is None or policy == "all":
        return None
    if policy == "sqrt":
        return max(1, int(np.sqrt(d)))
    if policy == "third":
        return max(1, d // 3)
    return max(1, min(int(policy), d))


class RandomForest:
    """Bagging ensemble; task is "regression" (variance) or "classification" (gini)."""

    def __init__(
        self,
        task: str = "regression",
        n_trees: int = 100,
        max_depth: int | None = None,
        min_leaf: int = 1,
        max_features="sqrt",
        seed: int = 0,
    ):
        self.task = task
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.max_features = max_features
        self.seed = int(seed)
        self.trees: list[DecisionTree] = []
        self.n_classes = 0
        self.importances_: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        n, d = X.shape
        criterion = "gini" if self.task == "classification" else "variance"
        if self.task == "classification":
            y = np.asarray(y, dtype=np.int64)
            self.n_classes = int(y.max()) + 1
        else:
            y = np.asarray(y, dtype=np.float64)
        k = _resolve_max_features(self.max_features, d)

        children = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees = []
        raw_importance = np.zeros(d)
        for child in children:
            rng = np.random.default_rng(child)
            rows = rng.integers(0, n, size=n)
            tree = DecisionTree(
                criterion=criterion,
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                max_features=k,
            )
            if self.task == "classification":
                tree.n_classes = self.n_classes
            tree.fit(X[rows], y[rows], rng)
            raw_importance += tree.importances_
            self.trees.append(tree)
        total = raw_importance.sum()
        self.importances_ = raw_importance / total if total > 0 else np.full(d, 1.0 / d)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.task == "classification":
            votes = np.zeros((X.shape[0], self.n_classes))
            for tree in self.trees:
                counts = tree.predict(X)
                votes += counts / np.maximum(counts.sum(axis=1, keepdims=True), 1.0)
            return np.argmax(votes, axis=1)
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def state(self) -> dict:
        return {
            "task": self.task,
            "n_classes": self.n_classes,
            "trees": [t.state() for t in self.trees],
        }

    @classmethod
    def from_state(cls, state: dict) -> "RandomForest":
        forest = cls(task=state["task"], n_trees=len(state["trees"]))
        forest.n_classes = state["n_classes"]
        forest.trees = [DecisionTree.from_state(s) for s in state["trees"]]
        return forest


class GradientBoosting:
    """Squared-loss boosting of regression trees with shrinkage."""

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int | None = 4,
        min_leaf: int = 1,
        learning_rate: float = 0.1,
        seed: int = 0,
    ):
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.learning_rate = float(learning_rate)
        self.seed = int(seed)
        self.base_: float = 0.0
        self.trees: list[DecisionTree] = []
        self.train_losses_: list[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoosting":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        rng = np.random.default_rng(self.seed)  # trees use all features; kept for API parity
        self.base_ = float(y.mean())
        current = np.full(y.shape, self.base_)
        self.trees = []
        self.train_losses_ = [float(np.mean((y - current) ** 2))]
        for _ in range(self.n_trees):
            residual = y - current
            tree = DecisionTree(
                criterion="variance",
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                max_features=None,
            )
            tree.fit(X, residual, rng)
            current = current + self.learning_rate * tree.predict(X)
            self.trees.append(tree)
            self.train_losses_.append(float(np.mean((y - current) ** 2)))
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        acc = np.full(X.shape[0], self.base_)
        for tree in self.trees:
            acc += self.learning_rate * tree.predict(X)
        return acc

    def state(self) -> dict:
        return {
            "base": self.base_,
            "learning_rate": self.learning_rate,
            "trees": [t.state() for t in self.trees],
        }

    @classmethod
    def from_state(cls, state: dict) -> "GradientBoosting":
        model = cls(n_trees=len(state["trees"]), learning_rate=state["learning_rate"])
        model.base_ = state["base"]
        model.trees = [DecisionTree.from_state(s) for s in state["trees"]]
        return model
