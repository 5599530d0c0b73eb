"""Mistake-driven linear classifier, one-vs-rest across classes.

Per epoch the sample order is reshuffled from the seed; every mistake
applies the textbook update w += eta0 * t * x. An optional penalty shrinks
the weights at each visited sample (multiplicative decay for l2, soft
threshold for l1). Training stops early once an epoch is mistake-free for
every binary subproblem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
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

PENALTIES = ("l1", "l2", "none")


@dataclass
class PerceptronParams:
    weights: np.ndarray  # K x D
    bias: np.ndarray  # K

    def scores(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights.T) + self.bias

    def proba(self, X) -> np.ndarray:
        return softmax(self.scores(X))

    def to_payload(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_payload(cls, payload: dict) -> "PerceptronParams":
        return cls(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=np.asarray(payload["bias"], dtype=np.float64),
        )


def train_perceptron(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_matrix(X)
    sparse = sp.issparse(X)
    if sparse:
        X = X.tocsr()
    classes = infer_classes(y)
    if len(classes) < 2:
        raise ModelError("perceptron needs at least two classes with samples")
    y_idx = encode_labels(y, classes)
    counts = np.bincount(y_idx, minlength=len(classes))
    if (counts == 0).any():
        raise ModelError("every class must have at least one sample")

    penalty = cfg.get("penalty", "none")
    if penalty is None:
        penalty = "none"
    if penalty not in PENALTIES:
        raise ModelError(f"unknown penalty {penalty!r}")
    alpha = float(cfg.get("alpha", 0.0001))
    eta0 = float(cfg.get("eta0", 1.0))
    epochs = int(cfg.get("epochs", 100))
    if eta0 <= 0:
        raise ModelError(f"eta0 must be positive, got {eta0}")

    n, d = X.shape
    k = len(classes)
    # Targets are +1 for the subproblem's class, -1 for the rest.
    targets = np.where(y_idx[:, None] == np.arange(k)[None, :], 1.0, -1.0)

    rng = np.random.default_rng(cfg.seed)
    weights = np.zeros((k, d))
    bias = np.zeros(k)
    shrink = eta0 * alpha
    converged = False
    for _ in range(epochs):
        mistakes = 0
        for i in rng.permutation(n):
            if sparse:
                start, end = X.indptr[i], X.indptr[i + 1]
                cols, vals = X.indices[start:end], X.data[start:end]
                margins = targets[i] * ((weights[:, cols] * vals).sum(axis=1) + bias)
            else:
                row = X[i]
                margins = targets[i] * (weights @ row + bias)
            if penalty == "l2":
                weights *= max(0.0, 1.0 - shrink)
            elif penalty == "l1":
                weights = np.sign(weights) * np.maximum(np.abs(weights) - shrink, 0.0)
            wrong = margins <= 0
            if wrong.any():
                mistakes += int(wrong.sum())
                step = eta0 * targets[i] * wrong
                if sparse:
                    weights[:, cols] += step[:, None] * vals[None, :]
                else:
                    weights += step[:, None] * row[None, :]
                bias += step
        if mistakes == 0:
            converged = True
            break

    return TrainedModel(
        kind="perceptron",
        classes=classes,
        feature_dim=d,
        params=PerceptronParams(weights=weights, bias=bias),
        converged=converged,
    )
