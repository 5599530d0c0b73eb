"""Soft-margin SVM trained by sequential minimal optimization.

Binary problems solve one dual; multiclass trains one-vs-rest machines
sharing a kernel cache. The pair step solves the two-variable
subproblem analytically; when the kernel is indefinite (sigmoid can
be) the curvature along the constraint line may be non-positive, and
the step falls back to comparing the dual objective at the two
endpoints of the feasible segment.

Decision convention: f(x) = sum_i alpha_i t_i K(x_i, x) + b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopeml.models import ModelError, TrainConfig, TrainedModel, as_dense, encode_labels, infer_classes, softmax

KERNELS = ("linear", "poly", "rbf", "sigmoid")

_SHRINK = 1e-12  # below this an alpha is treated as zero


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float, degree: int, coef0: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "poly":
        return (gamma * (A @ B.T) + coef0) ** degree
    if kernel == "rbf":
        sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    if kernel == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + coef0)
    raise ModelError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


def default_gamma(X: np.ndarray) -> float:
    var = float(X.var())
    if var <= 0.0:
        return 1.0 / X.shape[1]
    return 1.0 / (X.shape[1] * var)


class _KernelCache:
    """Kernel rows on demand; full matrix only for small problems."""

    def __init__(self, X: np.ndarray, kernel: str, gamma: float, degree: int, coef0: float):
        self.X = X
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        n = X.shape[0]
        if n <= 4096:
            self._full = kernel_matrix(X, X, kernel, gamma, degree, coef0)
            self._rows = None
        else:
            self._full = None
            self._rows: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        cached = self._rows.get(i)
        if cached is None:
            cached = kernel_matrix(self.X[i : i + 1], self.X, self.kernel, self.gamma, self.degree, self.coef0)[0]
            if len(self._rows) > 512:
                self._rows.clear()
            self._rows[i] = cached
        return cached


def dual_objective(alpha: np.ndarray, K: np.ndarray, t: np.ndarray) -> float:
    """W(alpha) = sum(alpha) - 1/2 alpha^T (tt^T * K) alpha (maximized)."""
    at = alpha * t
    return float(alpha.sum() - 0.5 * at @ K @ at)


def kkt_residuals(alpha: np.ndarray, K: np.ndarray, t: np.ndarray, b: float, C: float) -> np.ndarray:
    """Per-sample KKT violation for the soft-margin dual (0 = satisfied)."""
    f = K @ (alpha * t) + b
    tf = t * f
    res = np.empty_like(alpha)
    at_zero = alpha <= _SHRINK
    at_c = alpha >= C - _SHRINK
    middle = ~at_zero & ~at_c
    res[at_zero] = np.maximum(0.0, 1.0 - tf[at_zero])
    res[at_c] = np.maximum(0.0, tf[at_c] - 1.0)
    res[middle] = np.abs(tf[middle] - 1.0)
    return res


def smo_solve(
    cache: _KernelCache,
    t: np.ndarray,
    C: float,
    tol: float,
    max_rounds: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, bool]:
    """Platt-style SMO. Returns (alpha, b, converged)."""
    n = len(t)
    alpha = np.zeros(n)
    b = 0.0
    errors = -t.astype(np.float64)  # f = 0 everywhere at the start

    def take_step(i1: int, i2: int) -> bool:
        nonlocal b, errors
        if i1 == i2:
            return False
        a1, a2 = alpha[i1], alpha[i2]
        t1, t2 = t[i1], t[i2]
        e1, e2 = errors[i1], errors[i2]
        s = t1 * t2
        if t1 != t2:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if H - L < _SHRINK:
            return False
        row1, row2 = cache.row(i1), cache.row(i2)
        k11, k22, k12 = row1[i1], row2[i2], row1[i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0.0:
            a2_new = a2 + t2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, L), H)
        else:
            # flat or concave curvature: the 1-D dual restricted to the
            # constraint segment is maximized at an endpoint
            slope = t2 * (e1 - e2)
            gain_l = slope * (L - a2) - 0.5 * eta * (L - a2) ** 2
            gain_h = slope * (H - a2) - 0.5 * eta * (H - a2) ** 2
            if gain_l > gain_h + _SHRINK:
                a2_new = L
            elif gain_h > gain_l + _SHRINK:
                a2_new = H
            else:
                return False
        if abs(a2_new - a2) < _SHRINK * (a2_new + a2 + _SHRINK):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        a1_new = min(max(a1_new, 0.0), C)  # guards float drift only

        d1, d2 = t1 * (a1_new - a1), t2 * (a2_new - a2)
        b1 = b - e1 - d1 * k11 - d2 * k12
        b2 = b - e2 - d1 * k12 - d2 * k22
        if _SHRINK < a1_new < C - _SHRINK:
            b_new = b1
        elif _SHRINK < a2_new < C - _SHRINK:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0
        errors += d1 * row1 + d2 * row2 + (b_new - b)
        alpha[i1], alpha[i2] = a1_new, a2_new
        b = b_new
        return True

    def examine(i2: int) -> bool:
        t2, a2, e2 = t[i2], alpha[i2], errors[i2]
        r2 = e2 * t2  # equals t*f - 1
        if not ((r2 < -tol and a2 < C - _SHRINK) or (r2 > tol and a2 > _SHRINK)):
            return False
        non_bound = np.flatnonzero((alpha > _SHRINK) & (alpha < C - _SHRINK))
        if len(non_bound) > 1:
            i1 = int(non_bound[np.argmax(np.abs(errors[non_bound] - e2))])
            if take_step(i1, i2):
                return True
        if len(non_bound):
            start = rng.integers(len(non_bound))
            for i1 in np.roll(non_bound, -start):
                if take_step(int(i1), i2):
                    return True
        start = rng.integers(n)
        for i1 in np.roll(np.arange(n), -start):
            if take_step(int(i1), i2):
                return True
        return False

    examine_all = True
    converged = False
    for _ in range(max_rounds):
        changed = 0
        if examine_all:
            candidates = range(n)
        else:
            candidates = np.flatnonzero((alpha > _SHRINK) & (alpha < C - _SHRINK))
        for i2 in candidates:
            changed += examine(int(i2))
        if examine_all:
            if changed == 0:
                converged = True
                break
            examine_all = False
        elif changed == 0:
            examine_all = True

    # Final threshold. When every multiplier sits at a bound the running
    # estimate is only bracketed, not pinned, so recompute it from alpha:
    # average over the non-bound vectors, else center it in the interval
    # the bound constraints leave feasible.
    at = alpha * t
    f0 = np.zeros(n)
    for j in np.flatnonzero(alpha > _SHRINK):
        f0 += at[j] * cache.row(j)
    shifts = t - f0
    non_bound = (alpha > _SHRINK) & (alpha < C - _SHRINK)
    if non_bound.any():
        b = float(shifts[non_bound].mean())
    else:
        needs_ge = ((t > 0) & (alpha <= _SHRINK)) | ((t < 0) & (alpha >= C - _SHRINK))
        lower = shifts[needs_ge].max() if needs_ge.any() else None
        upper = shifts[~needs_ge].min() if not needs_ge.all() else None
        if lower is None:
            b = float(upper)
        elif upper is None:
            b = float(lower)
        else:
            b = float((lower + upper) / 2.0)
    return alpha, b, converged


@dataclass
class SvmParams:
    machines: list[dict]  # per machine: support_vectors, dual_coef, intercept
    kernel: str
    gamma: float
    degree: int
    coef0: float
    n_classes: int

    def decision_values(self, X) -> np.ndarray:
        X = np.asarray(X.todense()) if hasattr(X, "todense") else np.asarray(X, dtype=np.float64)
        columns = []
        for machine in self.machines:
            sv = np.asarray(machine["support_vectors"], dtype=np.float64)
            coef = np.asarray(machine["dual_coef"], dtype=np.float64)
            if sv.size == 0:
                columns.append(np.full(X.shape[0], machine["intercept"]))
                continue
            K = kernel_matrix(sv, X, self.kernel, self.gamma, self.degree, self.coef0)
            columns.append(coef @ K + machine["intercept"])
        return np.column_stack(columns)

    def scores(self, X) -> np.ndarray:
        values = self.decision_values(X)
        if self.n_classes == 2:
            return np.column_stack([-values[:, 0], values[:, 0]])
        return values

    def proba(self, X) -> np.ndarray:
        # softmax over decision values: monotone in the margins, rows sum to 1
        return softmax(self.scores(X))

    def to_payload(self) -> dict:
        return {
            "machines": [
                {
                    "support_vectors": np.asarray(m["support_vectors"]).tolist(),
                    "dual_coef": np.asarray(m["dual_coef"]).tolist(),
                    "intercept": float(m["intercept"]),
                }
                for m in self.machines
            ],
            "kernel": self.kernel,
            "gamma": self.gamma,
            "degree": self.degree,
            "coef0": self.coef0,
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SvmParams":
        return cls(
            machines=payload["machines"],
            kernel=payload["kernel"],
            gamma=float(payload["gamma"]),
            degree=int(payload["degree"]),
            coef0=float(payload["coef0"]),
            n_classes=int(payload["n_classes"]),
        )


def train_svm(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_dense(X)
    classes = infer_classes(y)
    if len(classes) < 2:
        raise ModelError("need at least two classes")
    y_idx = encode_labels(y, classes)

    C = float(cfg.get("C", 1.0))
    if C <= 0.0:
        raise ModelError(f"C must be positive, got {C}")
    kernel = str(cfg.get("kernel", "rbf"))
    if kernel not in KERNELS:
        raise ModelError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
    gamma = cfg.get("gamma")
    gamma = default_gamma(X) if gamma is None else float(gamma)
    degree = int(cfg.get("degree", 3))
    coef0 = float(cfg.get("coef0", 0.0))
    tol = float(cfg.get("tol", 1e-3))
    max_rounds = int(cfg.get("max_rounds", 1000))

    rng = np.random.default_rng(cfg.seed)
    cache = _KernelCache(X, kernel, gamma, degree, coef0)

    if len(classes) == 2:
        targets = [np.where(y_idx == 1, 1.0, -1.0)]
    else:
        targets = [np.where(y_idx == k, 1.0, -1.0) for k in range(len(classes))]

    machines = []
    all_converged = True
    for t in targets:
        alpha, b, ok = smo_solve(cache, t, C, tol, max_rounds, rng)
        all_converged = all_converged and ok
        support = np.flatnonzero(alpha > _SHRINK)
        machines.append(
            {
                "support_vectors": X[support],
                "dual_coef": alpha[support] * t[support],
                "intercept": b,
            }
        )

    return TrainedModel(
        kind="svm",
        classes=classes,
        feature_dim=X.shape[1],
        params=SvmParams(
            machines=machines,
            kernel=kernel,
            gamma=gamma,
            degree=degree,
            coef0=coef0,
            n_classes=len(classes),
        ),
        converged=all_converged,
    )
