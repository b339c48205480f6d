"""Support vector classifiers trained by minimizing regularized hinge losses.

Solvers (the objective is the contract, not the algorithm):

- L2 penalty: the dual box QP is solved with accelerated projected gradient
  descent (Nesterov momentum with adaptive restart). The bias is handled by
  augmenting the kernel with +1 (a regularized bias, the liblinear
  convention), which removes the equality constraint. Squared hinge uses the
  standard diagonal shift I/(2C) with an unbounded box. Convergence is
  certified by the projected-gradient norm dropping below 1e-4 (relative).
- L1 penalty: proximal gradient (FISTA) on the primal coefficients with a
  soft-threshold step; the intercept is explicit and unpenalized. Squared
  hinge is smooth and solved exactly to the same tolerance; plain hinge is
  smoothed (Huber, mu=1e-3) for the gradient steps while the true hinge
  objective is tracked and the best iterate returned.

Kernels: linear, polynomial (degree 3, coef0 1), sigmoid (coef0 1), and RBF;
gamma follows the "scale" convention 1/(n_features * var(X)).

Multiclass inputs are reduced one-vs-rest; occupancy detection itself is
binary.
"""

from __future__ import annotations

import numpy as np

KERNELS = ("linear", "poly", "sigmoid", "rbf")
PENALTIES = ("l1", "l2")
LOSSES = ("hinge", "squared_hinge")

_TOL = 1e-4
_MAX_ITER_DUAL = 2000
_MAX_ITER_PRIMAL = 2000
_HUBER_MU = 1e-3
_DEGREE = 3
_COEF0 = 1.0


def _kernel_matrix(kind: str, A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    if kind == "linear":
        return A @ B.T
    if kind == "poly":
        return (gamma * (A @ B.T) + _COEF0) ** _DEGREE
    if kind == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + _COEF0)
    if kind == "rbf":
        sq = (
            np.sum(A**2, axis=1)[:, None]
            + np.sum(B**2, axis=1)[None, :]
            - 2.0 * A @ B.T
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    raise ValueError(f"unknown kernel {kind!r}")


def _scale_gamma(X: np.ndarray) -> float:
    variance = float(X.var())
    if variance <= 0:
        return 1.0
    return 1.0 / (X.shape[1] * variance)


def _spectral_norm(matvec, dim: int, iterations: int = 30) -> float:
    v = np.full(dim, 1.0 / np.sqrt(dim))
    norm = 1.0
    for _ in range(iterations):
        w = matvec(v)
        norm = float(np.linalg.norm(w))
        if norm <= 0:
            return 1.0
        v = w / norm
    return norm


class _BinarySVM:
    """One binary machine; labels are +-1."""

    def __init__(self, kernel: str, penalty: str, loss: str, C: float):
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r}")
        if penalty not in PENALTIES:
            raise ValueError(f"unknown penalty {penalty!r}")
        if loss not in LOSSES:
            raise ValueError(f"unknown loss {loss!r}")
        if C <= 0:
            raise ValueError(f"C must be positive, got {C}")
        self.kernel = kernel
        self.penalty = penalty
        self.loss = loss
        self.C = float(C)
        self.gamma: float = 1.0
        # linear models store (w, b); kernel models store rows + coefficients
        self.w: np.ndarray | None = None
        self.b: float = 0.0
        self.support_rows: np.ndarray | None = None
        self.dual_coef: np.ndarray | None = None
        self.converged: bool = False

    # --- L2 penalty: dual box QP ------------------------------------------

    def _fit_dual(self, X: np.ndarray, y: np.ndarray) -> None:
        m = X.shape[0]
        K = _kernel_matrix(self.kernel, X, X, self.gamma) + 1.0
        Q = (y[:, None] * y[None, :]) * K
        if self.loss == "squared_hinge":
            Q = Q + np.eye(m) / (2.0 * self.C)
            upper = np.inf
        else:
            upper = self.C
        lipschitz = _spectral_norm(lambda v: Q @ v, m) * 1.05

        def project(a: np.ndarray) -> np.ndarray:
            return np.clip(a, 0.0, upper)

        alpha = np.zeros(m)
        velocity = alpha
        t_prev = 1.0
        pg0: float | None = None
        self.converged = False
        for iteration in range(_MAX_ITER_DUAL):
            grad_v = Q @ velocity - 1.0
            alpha_next = project(velocity - grad_v / lipschitz)
            if grad_v @ (alpha_next - alpha) > 0:  # restart momentum on non-descent
                t_prev = 1.0
                velocity = alpha_next
            else:
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev**2))
                velocity = alpha_next + ((t_prev - 1.0) / t_next) * (alpha_next - alpha)
                t_prev = t_next
            alpha = alpha_next
            if iteration % 10 == 9:
                grad = Q @ alpha - 1.0
                pg = float(np.linalg.norm(alpha - project(alpha - grad)))
                if pg0 is None:
                    pg0 = max(pg, 1.0)
                if pg <= _TOL * pg0:
                    self.converged = True
                    break

        dual = alpha * y
        if self.kernel == "linear":
            self.w = X.T @ dual
            self.b = float(dual.sum())
        else:
            keep = np.abs(alpha) > 0
            self.support_rows = X[keep]
            self.dual_coef = dual[keep]
            self.b = float(dual.sum())

    # --- L1 penalty: primal proximal gradient -------------------------------

    def _fit_primal_l1(self, X: np.ndarray, y: np.ndarray) -> None:
        if self.kernel == "linear":
            G = X
        else:
            G = _kernel_matrix(self.kernel, X, X, self.gamma)
        m, p = G.shape

        smooth_hinge = self.loss == "squared_hinge"
        mu = _HUBER_MU

        def loss_grad(margin_deficit: np.ndarray) -> tuple[float, np.ndarray]:
            t = np.maximum(margin_deficit, 0.0)
            if smooth_hinge:
                return float(np.sum(t**2)), 2.0 * t
            smoothed = np.where(t < mu, t**2 / (2.0 * mu), t - mu / 2.0)
            return float(np.sum(smoothed)), np.minimum(t / mu, 1.0)

        def true_objective(coef: np.ndarray, bias: float) -> float:
            deficit = 1.0 - y * (G @ coef + bias)
            t = np.maximum(deficit, 0.0)
            data_term = np.sum(t**2) if smooth_hinge else np.sum(t)
            return float(np.sum(np.abs(coef)) + self.C * data_term)

        # spectral norm of the bias-augmented Gram [G, 1]^T [G, 1]
        def augmented_gram(w: np.ndarray) -> np.ndarray:
            fitted = G @ w[:-1] + w[-1]
            return np.concatenate([G.T @ fitted, [fitted.sum()]])

        aug_norm = _spectral_norm(augmented_gram, p + 1)
        curvature = 2.0 * self.C if smooth_hinge else self.C / mu
        lipschitz = curvature * aug_norm * 1.05

        coef = np.zeros(p)
        bias = 0.0
        z_coef, z_bias = coef, bias
        t_prev = 1.0
        best = (np.inf, coef, bias)
        gm0: float | None = None
        self.converged = False
        for iteration in range(_MAX_ITER_PRIMAL):
            deficit = 1.0 - y * (G @ z_coef + z_bias)
            _, dloss = loss_grad(deficit)
            weight = self.C * dloss * (-y)
            grad_coef = G.T @ weight
            grad_bias = float(weight.sum())

            step = 1.0 / lipschitz
            coef_next = z_coef - step * grad_coef
            coef_next = np.sign(coef_next) * np.maximum(np.abs(coef_next) - step, 0.0)
            bias_next = z_bias - step * grad_bias

            move = np.sqrt(np.sum((coef_next - coef) ** 2) + (bias_next - bias) ** 2)
            if move * lipschitz <= _TOL * (1.0 if gm0 is None else gm0) and iteration > 0:
                coef, bias = coef_next, bias_next
                self.converged = True
                obj = true_objective(coef, bias)
                if obj < best[0]:
                    best = (obj, coef, bias)
                break
            if gm0 is None:
                gm0 = max(move * lipschitz, 1.0)

            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev**2))
            z_coef = coef_next + ((t_prev - 1.0) / t_next) * (coef_next - coef)
            z_bias = bias_next + ((t_prev - 1.0) / t_next) * (bias_next - bias)
            t_prev = t_next
            coef, bias = coef_next, bias_next

            obj = true_objective(coef, bias)
            if obj < best[0]:
                best = (obj, coef, bias)

        _, coef, bias = best
        if self.kernel == "linear":
            self.w = coef
            self.b = float(bias)
        else:
            keep = coef != 0.0
            if not keep.any():
                keep = np.zeros(m, dtype=bool)
                keep[0] = True
            self.support_rows = X[keep]
            self.dual_coef = coef[keep]
            self.b = float(bias)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "_BinarySVM":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.gamma = _scale_gamma(X)
        if self.penalty == "l2":
            self._fit_dual(X, y)
        else:
            self._fit_primal_l1(X, y)
        return self

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.w is not None:
            return X @ self.w + self.b
        K = _kernel_matrix(self.kernel, X, self.support_rows, self.gamma)
        if self.penalty == "l2":
            K = K + 1.0
            return K @ self.dual_coef
        return K @ self.dual_coef + self.b

    def state(self) -> dict:
        state = {
            "kernel": self.kernel,
            "penalty": self.penalty,
            "loss": self.loss,
            "C": self.C,
            "gamma": self.gamma,
            "b": self.b,
        }
        if self.w is not None:
            state["w"] = self.w.tolist()
        else:
            state["support_rows"] = self.support_rows.tolist()
            state["dual_coef"] = self.dual_coef.tolist()
        return state

    @classmethod
    def from_state(cls, state: dict) -> "_BinarySVM":
        machine = cls(state["kernel"], state["penalty"], state["loss"], state["C"])
        machine.gamma = float(state["gamma"])
        machine.b = float(state["b"])
        if "w" in state:
            machine.w = np.asarray(state["w"], dtype=np.float64)
        else:
            machine.support_rows = np.asarray(state["support_rows"], dtype=np.float64)
            machine.dual_coef = np.asarray(state["dual_coef"], dtype=np.float64)
        return machine


class SupportVectorClassifier:
    """One-vs-rest wrapper; binary problems use a single machine."""

    def __init__(self, kernel="linear", penalty="l2", loss="hinge", C=1.0):
        self.kernel = kernel
        self.penalty = penalty
        self.loss = loss
        self.C = C
        self.machines: list[_BinarySVM] = []
        self.n_classes = 0

    def fit(self, X: np.ndarray, y_idx: np.ndarray, n_classes: int) -> "SupportVectorClassifier":
        self.n_classes = n_classes
        self.machines = []
        if n_classes == 2:
            y = np.where(np.asarray(y_idx) == 1, 1.0, -1.0)
            self.machines.append(_BinarySVM(self.kernel, self.penalty, self.loss, self.C).fit(X, y))
        else:
            for c in range(n_classes):
                y = np.where(np.asarray(y_idx) == c, 1.0, -1.0)
                self.machines.append(
                    _BinarySVM(self.kernel, self.penalty, self.loss, self.C).fit(X, y)
                )
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.n_classes == 2:
            return (self.machines[0].decision(X) >= 0).astype(np.int64)
        scores = np.column_stack([m.decision(X) for m in self.machines])
        return np.argmax(scores, axis=1)

    def state(self) -> dict:
        return {"n_classes": self.n_classes, "machines": [m.state() for m in self.machines]}

    @classmethod
    def from_state(cls, state: dict) -> "SupportVectorClassifier":
        first = state["machines"][0]
        model = cls(first["kernel"], first["penalty"], first["loss"], first["C"])
        model.n_classes = state["n_classes"]
        model.machines = [_BinarySVM.from_state(s) for s in state["machines"]]
        return model
