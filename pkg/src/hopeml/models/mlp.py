"""Two-hidden-layer feedforward net trained with mini-batch Adam.

Softmax output over mean cross-entropy. Early stopping (default on)
holds out a validation fraction and restores the best weights seen;
with early stopping off, training-loss improvement is monitored
instead. The loss/gradient pair is exposed over a flat parameter
vector so finite-difference checks can call it directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopeml.models import (
    DivergenceError,
    ModelError,
    TrainConfig,
    TrainedModel,
    as_dense,
    encode_labels,
    infer_classes,
    softmax,
)

ACTIVATIONS = ("relu", "logistic", "tanh")


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "logistic":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "tanh":
        return np.tanh(z)
    raise ModelError(f"unknown activation {kind!r}; choose from {ACTIVATIONS}")


def _activate_grad(a: np.ndarray, kind: str) -> np.ndarray:
    # derivative expressed through the activation value itself
    if kind == "relu":
        return (a > 0.0).astype(a.dtype)
    if kind == "logistic":
        return a * (1.0 - a)
    return 1.0 - a * a  # tanh


def layer_sizes(n_features: int, hidden: tuple[int, ...], n_classes: int) -> list[tuple[int, int]]:
    dims = [n_features, *hidden, n_classes]
    return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]


def init_params(sizes: list[tuple[int, int]], rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases, packed flat."""
    parts = []
    for fan_in, fan_out in sizes:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        parts.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def unpack(theta: np.ndarray, sizes: list[tuple[int, int]]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in sizes:
        weights.append(theta[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        biases.append(theta[pos : pos + fan_out])
        pos += fan_out
    if pos != theta.size:
        raise ModelError(f"parameter vector has {theta.size} entries, layout needs {pos}")
    return weights, biases


def _forward(X: np.ndarray, weights, biases, activation: str):
    activations = [X]
    for i in range(len(weights) - 1):
        activations.append(_activate(activations[-1] @ weights[i] + biases[i], activation))
    logits = activations[-1] @ weights[-1] + biases[-1]
    return activations, logits


def loss_and_grad(theta: np.ndarray, sizes, X: np.ndarray, y_idx: np.ndarray, activation: str):
    """Mean cross-entropy and its gradient over the flat parameter vector."""
    weights, biases = unpack(theta, sizes)
    n = X.shape[0]
    activations, logits = _forward(X, weights, biases, activation)

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), y_idx]))

    proba = softmax(logits)
    delta = proba
    delta[np.arange(n), y_idx] -= 1.0
    delta /= n

    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * _activate_grad(activations[i], activation)

    flat = []
    for gw, gb in zip(grads_w, grads_b):
        flat.append(gw.ravel())
        flat.append(gb)
    return loss, np.concatenate(flat)


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X.todense()) if hasattr(X, "todense") else np.asarray(X, dtype=np.float64)
        _, logits = _forward(X, self.weights, self.biases, self.activation)
        return logits

    def proba(self, X) -> np.ndarray:
        return softmax(self.scores(X))

    def to_payload(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "activation": self.activation,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "MlpParams":
        return cls(
            weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
            activation=payload["activation"],
        )


def train_mlp(X, y, cfg: TrainConfig) -> TrainedModel:
    X = as_dense(X)
    classes = infer_classes(y)
    if len(classes) < 2:
        raise ModelError("need at least two classes")
    y_idx = encode_labels(y, classes)

    activation = str(cfg.get("activation", "relu"))
    if activation not in ACTIVATIONS:
        raise ModelError(f"unknown activation {activation!r}; choose from {ACTIVATIONS}")
    learning_rate = float(cfg.get("learning_rate", 0.001))
    epochs = int(cfg.get("epochs", 1000))
    hidden = tuple(int(h) for h in cfg.get("hidden_layer_sizes", (150, 150)))
    early_stopping = bool(cfg.get("early_stopping", True))
    batch_size = int(cfg.get("batch_size", 32))
    patience = int(cfg.get("patience", 10))
    validation_fraction = float(cfg.get("validation_fraction", 0.1))

    n, d = X.shape
    rng = np.random.default_rng(cfg.seed)
    sizes = layer_sizes(d, hidden, len(classes))
    theta = init_params(sizes, rng)

    if early_stopping:
        n_val = max(1, int(round(validation_fraction * n)))
        if n_val >= n:
            raise ModelError("not enough samples to hold out a validation split; disable early_stopping")
        order = rng.permutation(n)
        val_idx, fit_idx = order[:n_val], order[n_val:]
    else:
        fit_idx = np.arange(n)
        val_idx = np.array([], dtype=np.int64)
    X_fit, y_fit = X[fit_idx], y_idx[fit_idx]
    X_val, y_val = X[val_idx], y_idx[val_idx]

    # Adam state
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    tol = 1e-4
    best_metric = -np.inf  # val accuracy, or -train loss
    best_theta = theta.copy()
    stall = 0
    n_fit = len(fit_idx)

    epochs_run = 0
    for epoch in range(epochs):
        epochs_run = epoch + 1
        perm = rng.permutation(n_fit)
        epoch_loss = 0.0
        for start in range(0, n_fit, batch_size):
            batch = perm[start : start + batch_size]
            loss, grad = loss_and_grad(theta, sizes, X_fit[batch], y_fit[batch], activation)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            epoch_loss += loss * len(batch)
            step += 1
            m = beta1 * m + (1.0 - beta1) * grad
            v = beta2 * v + (1.0 - beta2) * grad * grad
            m_hat = m / (1.0 - beta1**step)
            v_hat = v / (1.0 - beta2**step)
            theta = theta - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        epoch_loss /= n_fit

        if early_stopping:
            weights, biases = unpack(theta, sizes)
            _, logits = _forward(X_val, weights, biases, activation)
            metric = float(np.mean(np.argmax(logits, axis=1) == y_val))
        else:
            metric = -epoch_loss
        if metric > best_metric + tol:
            best_metric = metric
            best_theta = theta.copy()
            stall = 0
        else:
            stall += 1
            if stall >= patience:
                break

    weights, biases = unpack(best_theta if early_stopping else theta, sizes)
    model = TrainedModel(
        kind="mlp",
        classes=classes,
        feature_dim=d,
        params=MlpParams(weights=weights, biases=biases, activation=activation),
    )
    # diagnostic, not serialized: lets callers see how far training ran
    object.__setattr__(model, "epochs_run", epochs_run)
    return model
