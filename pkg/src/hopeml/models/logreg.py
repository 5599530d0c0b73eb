"""Multinomial logistic regression with L1/L2 penalties.

Two solvers: a quasi-Newton loop (scipy's L-BFGS-B over our analytic
gradient) for smooth objectives, and an accelerated proximal-gradient
solver that also handles the non-smooth L1 penalty. The objective is
total cross-entropy plus (1/C) times the penalty; biases are unpenalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from hopeml.models import (
    ModelError,
    TrainConfig,
    TrainedModel,
    as_matrix,
    encode_labels,
    infer_classes,
    softmax,
)

SOLVERS = ("lbfgs", "proximal")
PENALTIES = ("l1", "l2", "none")


@dataclass
class LogregParams:
    weights: np.ndarray  # D x K
    bias: np.ndarray  # K

    def scores(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights) + self.bias

    def proba(self, X) -> np.ndarray:
        return softmax(self.scores(X))

    def to_payload(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_payload(cls, payload: dict) -> "LogregParams":
        return cls(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=np.asarray(payload["bias"], dtype=np.float64),
        )


def _unpack(theta: np.ndarray, d: int, k: int):
    return theta[: d * k].reshape(d, k), theta[d * k :]


def loss_and_grad(theta: np.ndarray, X, y_idx: np.ndarray, C: float, penalty: str):
    """Total cross-entropy plus (1/C) * L2 penalty, with analytic gradient.

    The L1 penalty is non-smooth and handled by the proximal solver; only
    the smooth part belongs here.
    """
    n = X.shape[0]
    d = X.shape[1]
    k = theta.size // (d + 1)
    w, b = _unpack(theta, d, k)

    logits = np.asarray(X @ w) + b
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_proba = shifted - log_z[:, None]
    loss = -log_proba[np.arange(n), y_idx].sum()

    delta = np.exp(log_proba)
    delta[np.arange(n), y_idx] -= 1.0
    grad_w = np.asarray(X.T @ delta)
    grad_b = delta.sum(axis=0)

    if penalty == "l2":
        loss += 0.5 / C * float((w * w).sum())
        grad_w = grad_w + w / C
    return loss, np.concatenate([grad_w.ravel(), grad_b])


def _soft_threshold(w: np.ndarray, radius: float) -> np.ndarray:
    return np.sign(w) * np.maximum(np.abs(w) - radius, 0.0)


def _fista(X, y_idx, k: int, C: float, penalty: str, max_iter: int, tol: float):
    """Accelerated proximal gradient on the smooth part, prox for L1."""
    d = X.shape[1]
    theta = np.zeros(d * k + k)
    momentum = theta.copy()
    t_acc = 1.0
    step = 1.0
    smooth_penalty = penalty if penalty == "l2" else "none"

    def prox(vec: np.ndarray, lip: float) -> np.ndarray:
        if penalty != "l1":
            return vec
        w, b = _unpack(vec.copy(), d, k)
        w = _soft_threshold(w, 1.0 / (C * lip))
        return np.concatenate([w.ravel(), b])

    loss_prev, grad = loss_and_grad(momentum, X, y_idx, C, smooth_penalty)
    for _ in range(max_iter):
        # Backtracking on the smooth part's quadratic upper bound.
        while True:
            candidate = prox(momentum - grad / step, step)
            diff = candidate - momentum
            cand_loss, _ = loss_and_grad(candidate, X, y_idx, C, smooth_penalty)
            bound = loss_prev + float(grad @ diff) + 0.5 * step * float(diff @ diff)
            if cand_loss <= bound + 1e-12 * abs(bound):
                break
            step *= 2.0
            if step > 1e18:
                raise ModelError("proximal solver line search failed")

        grad_map = step * (momentum - candidate)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc)) / 2.0
        theta_next = candidate + (t_acc - 1.0) / t_next * (candidate - theta)
        theta, momentum, t_acc = candidate, theta_next, t_next
        if np.max(np.abs(grad_map)) <= tol:
            return theta, True
        loss_prev, grad = loss_and_grad(momentum, X, y_idx, C, smooth_penalty)
        step *= 0.9  # let the step size recover between iterations
    return theta, False


def train_logreg(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_matrix(X)
    if sp.issparse(X):
        X = X.tocsr()
    classes = infer_classes(y)
    if len(classes) < 2:
        raise ModelError("logistic regression needs at least two classes")
    y_idx = encode_labels(y, classes)

    penalty = cfg.get("penalty", "l2")
    if penalty is None:
        penalty = "none"
    if penalty not in PENALTIES:
        raise ModelError(f"unknown penalty {penalty!r}")
    solver = cfg.get("solver", "lbfgs")
    if solver not in SOLVERS:
        raise ModelError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    if penalty == "l1" and solver == "lbfgs":
        raise ModelError("the l1 penalty requires the proximal solver")
    C = float(cfg.get("C", 1.0))
    if C <= 0:
        raise ModelError(f"C must be positive, got {C}")
    epochs = int(cfg.get("epochs", 100))
    tol = float(cfg.get("tol", 1e-6))

    d, k = X.shape[1], len(classes)
    if solver == "lbfgs":
        result = scipy.optimize.minimize(
            loss_and_grad,
            np.zeros(d * k + k),
            args=(X, y_idx, C, penalty),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": epochs, "gtol": tol, "ftol": 1e-16, "maxls": 50},
        )
        theta = result.x
        converged = bool(result.success) or result.status == 1  # status 1 = hit maxiter
    else:
        theta, converged = _fista(X, y_idx, k, C, penalty, max_iter=epochs, tol=tol)

    w, b = _unpack(theta, d, k)
    return TrainedModel(
        kind="logreg",
        classes=classes,
        feature_dim=d,
        params=LogregParams(weights=w.copy(), bias=b.copy()),
        converged=converged,
    )
