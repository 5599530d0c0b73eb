"""Gaussian naive Bayes with variance smoothing.

Each class gets an independent Gaussian per feature; prediction is the
maximum log-posterior with empirical class priors. Variances are smoothed
by var_smoothing times the largest per-feature variance of the data, which
keeps degenerate (constant) features usable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopeml.models import (
    ModelError,
    TrainConfig,
    TrainedModel,
    as_dense,
    encode_labels,
    infer_classes,
)


@dataclass
class GnbParams:
    means: np.ndarray  # K x D
    variances: np.ndarray  # K x D, already smoothed
    priors: np.ndarray  # K

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X.todense()) if hasattr(X, "todense") else np.asarray(X)
        k = self.means.shape[0]
        out = np.empty((X.shape[0], k))
        for i in range(k):
            log_det = np.sum(np.log(2.0 * np.pi * self.variances[i]))
            maha = np.sum((X - self.means[i]) ** 2 / self.variances[i], axis=1)
            out[:, i] = np.log(self.priors[i]) - 0.5 * (log_det + maha)
        return out

    def proba(self, X) -> np.ndarray:
        log_joint = self.scores(X)
        shifted = log_joint - log_joint.max(axis=1, keepdims=True)
        joint = np.exp(shifted)
        return joint / joint.sum(axis=1, keepdims=True)

    def to_payload(self) -> dict:
        return {
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "priors": self.priors.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "GnbParams":
        return cls(
            means=np.asarray(payload["means"], dtype=np.float64),
            variances=np.asarray(payload["variances"], dtype=np.float64),
            priors=np.asarray(payload["priors"], dtype=np.float64),
        )


def train_gnb(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_dense(X)
    classes = infer_classes(y)
    y_idx = encode_labels(y, classes)
    var_smoothing = float(cfg.get("var_smoothing", 1e-9))
    if var_smoothing < 0:
        raise ModelError(f"var_smoothing must be non-negative, got {var_smoothing}")

    n, d = X.shape
    k = len(classes)
    means = np.empty((k, d))
    variances = np.empty((k, d))
    priors = np.empty(k)
    epsilon = var_smoothing * float(X.var(axis=0).max()) if d else 0.0
    for i in range(k):
        rows = X[y_idx == i]
        if rows.shape[0] == 0:
            raise ModelError(f"class {classes[i]!r} has no samples")
        means[i] = rows.mean(axis=0)
        variances[i] = rows.var(axis=0) + epsilon
        priors[i] = rows.shape[0] / n
    if (variances <= 0).any():
        raise ModelError("zero variance encountered; increase var_smoothing above 0")

    return TrainedModel(
        kind="gnb",
        classes=classes,
        feature_dim=d,
        params=GnbParams(means=means, variances=variances, priors=priors),
    )
