"""Eight classical learners behind one train/predict contract.

Every learner trains from (X, y, TrainConfig) into a TrainedModel whose
parameter payload is JSON-serializable, so a fitted model round-trips
through a versioned document. Training is single-threaded and fully
deterministic given the config seed; prediction is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from hopeml.corpus import ClassLabel

MODEL_KINDS = ("logreg", "perceptron", "mlp", "gnb", "svm", "random_forest", "adaboost", "gbt")

FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


# Hyperparameter keys each kind accepts. Values are validated against the
# grid domains in hopeml.tuning; unknown keys are hard errors here.
HYPERPARAM_KEYS = {
    "logreg": {"penalty", "C", "solver", "epochs", "tol"},
    "perceptron": {"penalty", "alpha", "eta0", "epochs"},
    "mlp": {
        "activation",
        "learning_rate",
        "epochs",
        "hidden_layer_sizes",
        "early_stopping",
        "batch_size",
        "patience",
        "validation_fraction",
    },
    "gnb": {"var_smoothing"},
    "svm": {"C", "kernel", "gamma", "degree", "coef0", "tol", "max_rounds"},
    "random_forest": {"n_estimators", "max_depth", "min_samples_split", "bootstrap", "max_features"},
    "adaboost": {"n_estimators", "learning_rate"},
    "gbt": {"max_depth", "n_estimators", "learning_rate", "reg_lambda"},
}


@dataclass
class TrainConfig:
    kind: str
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    off_grid: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        unknown = set(self.hyperparameters) - HYPERPARAM_KEYS[self.kind]
        if unknown:
            raise ModelError(f"hyperparameters {sorted(unknown)} are not legal for kind {self.kind!r}")

    def get(self, key: str, default=None):
        return self.hyperparameters.get(key, default)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters), "seed": self.seed}


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    classes: tuple
    feature_dim: int
    params: Any
    converged: bool = True

    def predict(self, X):
        return predict(self, X)

    def predict_proba(self, X):
        return predict_proba(self, X)


def as_matrix(X) -> np.ndarray | sp.csr_matrix:
    """Accept a FeatureMatrix, ndarray, or scipy sparse matrix."""
    if hasattr(X, "data") and hasattr(X, "row_ids"):  # FeatureMatrix
        return X.data
    if sp.issparse(X):
        return X.tocsr()
    return np.asarray(X, dtype=np.float64)


def as_dense(X) -> np.ndarray:
    m = as_matrix(X)
    if sp.issparse(m):
        return np.asarray(m.todense(), dtype=np.float64)
    return np.asarray(m, dtype=np.float64)


def infer_classes(y) -> tuple:
    """Ordered class list: canonical order for ClassLabel, sorted otherwise."""
    seen = set(y)
    if not seen:
        raise ModelError("empty label list")
    if all(isinstance(label, ClassLabel) for label in seen):
        return tuple(c for c in ClassLabel if c in seen)
    return tuple(sorted(seen, key=lambda c: (str(type(c)), c)))


def encode_labels(y, classes) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([index[label] for label in y], dtype=np.int64)
    except KeyError as exc:
        raise ModelError(f"label {exc.args[0]!r} not in class list") from None


def check_dim(model: TrainedModel, X) -> None:
    m = as_matrix(X)
    if m.shape[1] != model.feature_dim:
        raise ModelError(f"input has {m.shape[1]} features, model expects {model.feature_dim}")


def train(X, y, cfg: TrainConfig) -> TrainedModel:
    """Train the configured learner. Dispatches on cfg.kind."""
    from hopeml.models import adaboost, gbt, gnb, logreg, mlp, perceptron, random_forest, svm

    trainers = {
        "logreg": logreg.train_logreg,
        "perceptron": perceptron.train_perceptron,
        "mlp": mlp.train_mlp,
        "gnb": gnb.train_gnb,
        "svm": svm.train_svm,
        "random_forest": random_forest.train_random_forest,
        "adaboost": adaboost.train_adaboost,
        "gbt": gbt.train_gbt,
    }
    return trainers[cfg.kind](X, y, cfg)


def predict(model: TrainedModel, X) -> list:
    """Argmax class per row; ties break to the lowest class index."""
    proba = predict_proba(model, X)
    return [model.classes[i] for i in np.argmax(proba, axis=1)]


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    """Per-class probabilities, rows non-negative and summing to 1."""
    check_dim(model, X)
    proba = model.params.proba(as_matrix(X))
    return np.asarray(proba, dtype=np.float64)


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _encode_class(c):
    return c.value if isinstance(c, ClassLabel) else c


def _decode_class(c):
    if isinstance(c, str):
        try:
            return ClassLabel(c)
        except ValueError:
            return c
    return c


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "classes": [_encode_class(c) for c in model.classes],
        "feature_dim": model.feature_dim,
        "converged": model.converged,
        "parameters": model.params.to_payload(),
    }


def model_from_dict(data: dict) -> TrainedModel:
    from hopeml.models import adaboost, gbt, gnb, logreg, mlp, perceptron, random_forest, svm

    version = data.get("format_version")
    if not isinstance(version, int) or version > FORMAT_VERSION:
        raise ModelError(f"unsupported model format_version {version!r} (this build reads <= {FORMAT_VERSION})")
    loaders = {
        "logreg": logreg.LogregParams.from_payload,
        "perceptron": perceptron.PerceptronParams.from_payload,
        "mlp": mlp.MlpParams.from_payload,
        "gnb": gnb.GnbParams.from_payload,
        "svm": svm.SvmParams.from_payload,
        "random_forest": random_forest.ForestParams.from_payload,
        "adaboost": adaboost.AdaboostParams.from_payload,
        "gbt": gbt.GbtParams.from_payload,
    }
    kind = data["kind"]
    if kind not in loaders:
        raise ModelError(f"unknown model kind {kind!r}")
    return TrainedModel(
        kind=kind,
        classes=tuple(_decode_class(c) for c in data["classes"]),
        feature_dim=int(data["feature_dim"]),
        params=loaders[kind](data["parameters"]),
        converged=bool(data.get("converged", True)),
    )


def serialize_model(model: TrainedModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(model))


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
