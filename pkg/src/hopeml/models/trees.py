"""CART classification trees: Gini splitting over midpoint thresholds.

Shared by the random forest (optionally with per-split feature subsampling
and bootstrap rows) and by AdaBoost (depth-1 stumps on weighted samples).
Trees are plain nested dicts so they serialize to JSON as-is.
"""

from __future__ import annotations

import numpy as np


def gini(class_weights: np.ndarray) -> float:
    total = class_weights.sum()
    if total <= 0:
        return 0.0
    p = class_weights / total
    return float(1.0 - (p * p).sum())


def _best_split_feature(values: np.ndarray, y_idx: np.ndarray, weights: np.ndarray, k: int):
    """Best (gain, threshold) for one feature column, or None if unsplittable.

    Thresholds are midpoints between consecutive distinct sorted values;
    gain is the weighted Gini decrease. Ties keep the first threshold in
    ascending scan order.
    """
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sy = y_idx[order]
    sw = weights[order]

    total = np.zeros(k)
    np.add.at(total, sy, sw)
    total_weight = total.sum()
    parent = gini(total)

    left = np.zeros(k)
    best_gain = 0.0
    best_threshold = None
    n = len(sv)
    for i in range(n - 1):
        left[sy[i]] += sw[i]
        if sv[i] == sv[i + 1]:
            continue
        left_weight = left.sum()
        right = total - left
        right_weight = total_weight - left_weight
        gain = parent - (left_weight * gini(left) + right_weight * gini(right)) / total_weight
        if gain > best_gain + 1e-15:
            best_gain = gain
            best_threshold = (sv[i] + sv[i + 1]) / 2.0
    if best_threshold is None:
        return None
    return best_gain, best_threshold


def build_tree(
    X: np.ndarray,
    y_idx: np.ndarray,
    k: int,
    max_depth: int,
    min_samples_split: int = 2,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    sample_weight: np.ndarray | None = None,
) -> dict:
    """Grow a classification tree; leaves hold class-weight distributions.

    max_features, when set, draws that many feature candidates without
    replacement at every split (rng required); features are scanned in the
    drawn-then-sorted index order so ties are deterministic.
    """
    if sample_weight is None:
        sample_weight = np.ones(len(y_idx))

    def leaf(idx) -> dict:
        dist = np.zeros(k)
        np.add.at(dist, y_idx[idx], sample_weight[idx])
        total = dist.sum()
        if total > 0:
            dist = dist / total
        return {"leaf": True, "dist": dist.tolist()}

    def grow(idx: np.ndarray, depth: int) -> dict:
        if depth >= max_depth or idx.size < min_samples_split:
            return leaf(idx)
        node_y = y_idx[idx]
        if (node_y == node_y[0]).all():
            return leaf(idx)

        d = X.shape[1]
        if max_features is not None and max_features < d:
            candidates = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            candidates = np.arange(d)

        best = None
        for feature in candidates:
            found = _best_split_feature(X[idx, feature], node_y, sample_weight[idx], k)
            if found is None:
                continue
            gain, threshold = found
            if best is None or gain > best[0] + 1e-15:
                best = (gain, int(feature), threshold)
        if best is None:
            return leaf(idx)

        _, feature, threshold = best
        mask = X[idx, feature] < threshold
        return {
            "leaf": False,
            "feature": feature,
            "threshold": threshold,
            "left": grow(idx[mask], depth + 1),
            "right": grow(idx[~mask], depth + 1),
        }

    return grow(np.arange(len(y_idx)), 0)


def tree_predict_dist(node: dict, X: np.ndarray) -> np.ndarray:
    """Per-row class distribution from the reached leaf."""
    out = np.empty((X.shape[0], len(_first_leaf(node)["dist"])))

    def walk(nd: dict, idx: np.ndarray):
        if nd["leaf"]:
            out[idx] = nd["dist"]
            return
        mask = X[idx, nd["feature"]] < nd["threshold"]
        walk(nd["left"], idx[mask])
        walk(nd["right"], idx[~mask])

    walk(node, np.arange(X.shape[0]))
    return out


def _first_leaf(node: dict) -> dict:
    while not node["leaf"]:
        node = node["left"]
    return node


def tree_depth(node: dict) -> int:
    if node["leaf"]:
        return 0
    return 1 + max(tree_depth(node["left"]), tree_depth(node["right"]))
