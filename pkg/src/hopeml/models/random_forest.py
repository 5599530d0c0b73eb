"""Random forest: bagged CART trees with per-split feature subsampling.

Each tree sees a bootstrap sample of the rows and sqrt(D) feature
candidates per split. Prediction averages the leaf class distributions;
argmax of the average is the majority vote with deterministic ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopeml.models import ModelError, TrainConfig, TrainedModel, as_dense, encode_labels, infer_classes
from hopeml.models.trees import build_tree, tree_predict_dist


@dataclass
class ForestParams:
    trees: list[dict]
    n_classes: int

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X.todense()) if hasattr(X, "todense") else np.asarray(X)
        votes = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            votes += tree_predict_dist(tree, X)
        return votes / len(self.trees)

    def proba(self, X) -> np.ndarray:
        return self.scores(X)

    def to_payload(self) -> dict:
        return {"trees": self.trees, "n_classes": self.n_classes}

    @classmethod
    def from_payload(cls, payload: dict) -> "ForestParams":
        return cls(trees=payload["trees"], n_classes=int(payload["n_classes"]))


def train_random_forest(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_dense(X)
    classes = infer_classes(y)
    y_idx = encode_labels(y, classes)

    n_estimators = int(cfg.get("n_estimators", 100))
    if n_estimators < 1:
        raise ModelError(f"n_estimators must be >= 1, got {n_estimators}")
    max_depth = int(cfg.get("max_depth", 10))
    min_samples_split = int(cfg.get("min_samples_split", 2))
    bootstrap = bool(cfg.get("bootstrap", True))
    max_features = cfg.get("max_features", "sqrt")

    n, d = X.shape
    if max_features == "sqrt":
        n_features = max(1, int(np.sqrt(d)))
    elif max_features is None:
        n_features = None
    else:
        n_features = int(max_features)

    rng = np.random.default_rng(cfg.seed)
    trees = []
    for _ in range(n_estimators):
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            build_tree(
                X[idx],
                y_idx[idx],
                k=len(classes),
                max_depth=max_depth,
                min_samples_split=min_samples_split,
                max_features=n_features,
                rng=rng,
            )
        )

    return TrainedModel(
        kind="random_forest",
        classes=classes,
        feature_dim=d,
        params=ForestParams(trees=trees, n_classes=len(classes)),
    )
