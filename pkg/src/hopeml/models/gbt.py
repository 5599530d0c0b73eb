"""Gradient-boosted trees on softmax logistic loss with second-order leaves.

One score column per class. Each round fits one shallow regression tree
per class to the current gradient/hessian of the loss; leaf weights are
-G/(H + lambda) and split gain is the matching second-order improvement.
Deterministic: no row or feature subsampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopeml.models import TrainConfig, TrainedModel, as_dense, encode_labels, infer_classes, softmax


def _leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    return -g_sum / (h_sum + reg_lambda)


def _leaf_gain(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    return g_sum * g_sum / (h_sum + reg_lambda)


def _best_split(values: np.ndarray, g: np.ndarray, h: np.ndarray, reg_lambda: float):
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sg = np.cumsum(g[order])
    sh = np.cumsum(h[order])
    g_total, h_total = sg[-1], sh[-1]
    parent = _leaf_gain(g_total, h_total, reg_lambda)

    best_gain = 0.0
    best_threshold = None
    for i in range(len(sv) - 1):
        if sv[i] == sv[i + 1]:
            continue
        gain = (
            _leaf_gain(sg[i], sh[i], reg_lambda)
            + _leaf_gain(g_total - sg[i], h_total - sh[i], reg_lambda)
            - parent
        ) / 2.0
        if gain > best_gain + 1e-15:
            best_gain = gain
            best_threshold = (sv[i] + sv[i + 1]) / 2.0
    if best_threshold is None:
        return None
    return best_gain, best_threshold


def _grow(X: np.ndarray, g: np.ndarray, h: np.ndarray, idx: np.ndarray, depth: int, max_depth: int, reg_lambda: float) -> dict:
    if depth >= max_depth or idx.size < 2:
        return {"leaf": True, "weight": _leaf_weight(g[idx].sum(), h[idx].sum(), reg_lambda)}
    best = None
    for feature in range(X.shape[1]):
        found = _best_split(X[idx, feature], g[idx], h[idx], reg_lambda)
        if found is None:
            continue
        gain, threshold = found
        if best is None or gain > best[0] + 1e-15:
            best = (gain, feature, threshold)
    if best is None:
        return {"leaf": True, "weight": _leaf_weight(g[idx].sum(), h[idx].sum(), reg_lambda)}
    _, feature, threshold = best
    mask = X[idx, feature] < threshold
    return {
        "leaf": False,
        "feature": feature,
        "threshold": threshold,
        "left": _grow(X, g, h, idx[mask], depth + 1, max_depth, reg_lambda),
        "right": _grow(X, g, h, idx[~mask], depth + 1, max_depth, reg_lambda),
    }


def _tree_scores(node: dict, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])

    def walk(nd: dict, idx: np.ndarray):
        if nd["leaf"]:
            out[idx] = nd["weight"]
            return
        mask = X[idx, nd["feature"]] < nd["threshold"]
        walk(nd["left"], idx[mask])
        walk(nd["right"], idx[~mask])

    walk(node, np.arange(X.shape[0]))
    return out


@dataclass
class GbtParams:
    rounds: list[list[dict]]  # rounds[r][class] -> tree
    learning_rate: float
    n_classes: int

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X.todense()) if hasattr(X, "todense") else np.asarray(X)
        scores = np.zeros((X.shape[0], self.n_classes))
        for round_trees in self.rounds:
            for k, tree in enumerate(round_trees):
                scores[:, k] += self.learning_rate * _tree_scores(tree, X)
        return scores

    def proba(self, X) -> np.ndarray:
        return softmax(self.scores(X))

    def to_payload(self) -> dict:
        return {"rounds": self.rounds, "learning_rate": self.learning_rate, "n_classes": self.n_classes}

    @classmethod
    def from_payload(cls, payload: dict) -> "GbtParams":
        return cls(
            rounds=payload["rounds"],
            learning_rate=float(payload["learning_rate"]),
            n_classes=int(payload["n_classes"]),
        )


def logloss(scores: np.ndarray, y_idx: np.ndarray) -> float:
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_z - shifted[np.arange(len(y_idx)), y_idx]))


def train_gbt(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_dense(X)
    classes = infer_classes(y)
    y_idx = encode_labels(y, classes)

    max_depth = int(cfg.get("max_depth", 1))
    n_estimators = int(cfg.get("n_estimators", 100))
    learning_rate = float(cfg.get("learning_rate", 0.1))
    reg_lambda = float(cfg.get("reg_lambda", 1.0))

    n = X.shape[0]
    k = len(classes)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y_idx] = 1.0

    scores = np.zeros((n, k))
    rounds: list[list[dict]] = []
    loss_history: list[float] = []
    for _ in range(n_estimators):
        proba = softmax(scores)
        grad = proba - onehot
        hess = proba * (1.0 - proba)
        round_trees = []
        for c in range(k):
            tree = _grow(X, grad[:, c], hess[:, c], np.arange(n), 0, max_depth, reg_lambda)
            scores[:, c] += learning_rate * _tree_scores(tree, X)
            round_trees.append(tree)
        rounds.append(round_trees)
        loss_history.append(logloss(scores, y_idx))

    model = TrainedModel(
        kind="gbt",
        classes=classes,
        feature_dim=X.shape[1],
        params=GbtParams(rounds=rounds, learning_rate=learning_rate, n_classes=k),
    )
    # handy for monotone-loss checks and debugging; not serialized
    object.__setattr__(model, "train_loss_history", loss_history)
    return model
