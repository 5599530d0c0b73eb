"""Multiclass AdaBoost over depth-1 stumps (SAMME weighting).

Each round fits a stump to the current sample weights, scores it by its
weighted error, and reweights mistakes up. Boosting stops early when a
stump is no better than chance for K classes (error >= 1 - 1/K) or when
it is perfect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopeml.models import TrainConfig, TrainedModel, as_dense, encode_labels, infer_classes, softmax
from hopeml.models.trees import build_tree, tree_predict_dist


@dataclass
class AdaboostParams:
    stumps: list[dict]
    stump_weights: list[float]
    n_classes: int

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X.todense()) if hasattr(X, "todense") else np.asarray(X)
        agg = np.zeros((X.shape[0], self.n_classes))
        for stump, weight in zip(self.stumps, self.stump_weights):
            pred = np.argmax(tree_predict_dist(stump, X), axis=1)
            agg[np.arange(X.shape[0]), pred] += weight
        return agg / max(sum(self.stump_weights), 1e-300)

    def proba(self, X) -> np.ndarray:
        return softmax(self.scores(X))

    def to_payload(self) -> dict:
        return {"stumps": self.stumps, "stump_weights": self.stump_weights, "n_classes": self.n_classes}

    @classmethod
    def from_payload(cls, payload: dict) -> "AdaboostParams":
        return cls(
            stumps=payload["stumps"],
            stump_weights=[float(w) for w in payload["stump_weights"]],
            n_classes=int(payload["n_classes"]),
        )


def train_adaboost(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_dense(X)
    classes = infer_classes(y)
    y_idx = encode_labels(y, classes)
    n_estimators = int(cfg.get("n_estimators", 50))
    learning_rate = float(cfg.get("learning_rate", 1.0))

    n = X.shape[0]
    k = len(classes)
    weights = np.full(n, 1.0 / n)
    stumps: list[dict] = []
    alphas: list[float] = []
    for _ in range(n_estimators):
        stump = build_tree(X, y_idx, k=k, max_depth=1, min_samples_split=2, sample_weight=weights)
        pred = np.argmax(tree_predict_dist(stump, X), axis=1)
        miss = pred != y_idx
        error = float(weights[miss].sum())
        if error <= 0.0:
            # perfect stump dominates; keep it alone-weighted and stop
            stumps.append(stump)
            alphas.append(1.0)
            break
        if error >= 1.0 - 1.0 / k:
            break
        alpha = learning_rate * (np.log((1.0 - error) / error) + np.log(k - 1.0))
        stumps.append(stump)
        alphas.append(float(alpha))
        weights = weights * np.exp(alpha * miss)
        weights /= weights.sum()

    if not stumps:
        # no stump beat chance on round one; fall back to the prior stump
        stump = build_tree(X, y_idx, k=k, max_depth=0, sample_weight=weights)
        stumps.append(stump)
        alphas.append(1.0)

    return TrainedModel(
        kind="adaboost",
        classes=classes,
        feature_dim=X.shape[1],
        params=AdaboostParams(stumps=stumps, stump_weights=alphas, n_classes=k),
    )
