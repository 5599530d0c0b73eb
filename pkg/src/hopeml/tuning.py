"""Grid enumeration and deterministic grid search over the dev split.

Configs come from the Cartesian product of the axis value lists, axes
taken in sorted-name order. Each trial trains with seed = base_seed +
trial_index, so results do not depend on worker count or completion
order. Failed trials are recorded with their error and excluded from
selection; the search fails only when every trial fails.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from hopeml.metrics import EvalReport, evaluate, report_from_dict
from hopeml.models import HYPERPARAM_KEYS, ModelError, TrainConfig, infer_classes, predict, train

SELECTION_METRICS = ("macro_f1", "weighted_f1")


class TuningError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    kind: str
    axes: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in HYPERPARAM_KEYS:
            raise TuningError(f"unknown model kind {self.kind!r}")
        for name, values in self.axes.items():
            if name not in HYPERPARAM_KEYS[self.kind]:
                raise TuningError(f"axis {name!r} is not legal for kind {self.kind!r}")
            if not values:
                raise TuningError(f"axis {name!r} has no candidate values")


# Grid-search spaces, one per learner. AdaBoost runs defaults only.
DEFAULT_GRIDS: dict[str, GridSpec] = {
    "logreg": GridSpec(
        "logreg",
        {
            "penalty": ["l1", "l2"],
            "C": [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
            "solver": ["lbfgs", "proximal"],
            "epochs": [100],
        },
    ),
    "adaboost": GridSpec("adaboost", {}),
    "mlp": GridSpec(
        "mlp",
        {
            "activation": ["relu", "logistic", "tanh"],
            "early_stopping": [True],
            "learning_rate": [0.0001, 0.001, 0.01],
            "epochs": [1000, 5000],
            "hidden_layer_sizes": [(150, 150)],
        },
    ),
    "perceptron": GridSpec(
        "perceptron",
        {
            "penalty": ["l2", "l1", None],
            "alpha": [0.0001, 0.001, 0.01, 0.1, 1.0],
            "eta0": [0.0001, 0.001, 0.01, 0.1, 1.0],
            "epochs": [100, 1000, 10000],
        },
    ),
    "gnb": GridSpec("gnb", {"var_smoothing": list(np.logspace(0, -9, num=100))}),
    "random_forest": GridSpec(
        "random_forest",
        {
            "n_estimators": [100, 125, 150],
            "max_depth": [5, 10, 15, 20],
            "min_samples_split": [2, 5, 10],
            "bootstrap": [True],
        },
    ),
    "svm": GridSpec("svm", {"C": [1.0, 0.5], "kernel": ["linear", "poly", "rbf", "sigmoid"]}),
    "gbt": GridSpec("gbt", {"max_depth": [1, 2], "n_estimators": [100, 200, 300]}),
}


def _feasible(kind: str, combo: dict) -> bool:
    if kind == "logreg" and combo.get("penalty") == "l1" and combo.get("solver") == "lbfgs":
        return False
    return True


def enumerate_grid(spec: GridSpec) -> list[TrainConfig]:
    """All feasible configs, deterministic order. Seeds are assigned later."""
    names = sorted(spec.axes)
    configs = []
    for combo_values in itertools.product(*(spec.axes[n] for n in names)):
        combo = dict(zip(names, combo_values))
        if _feasible(spec.kind, combo):
            configs.append(TrainConfig(kind=spec.kind, hyperparameters=combo))
    if not configs:
        raise TuningError(f"every combination in the {spec.kind!r} grid is infeasible")
    return configs


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    config: TrainConfig
    dev_report: EvalReport | None
    train_seconds: float
    error: str | None = None

    def metric(self, name: str) -> float:
        if self.dev_report is None:
            raise TuningError(f"trial {self.trial_index} failed: {self.error}")
        return self.dev_report.metric(name)

    def to_dict(self, with_timing: bool = True) -> dict:
        payload = {
            "trial_index": self.trial_index,
            "config": _jsonable_config(self.config),
        }
        if self.dev_report is not None:
            payload["dev_report"] = self.dev_report.to_dict()
        if self.error is not None:
            payload["error"] = self.error
        if with_timing:
            payload["train_seconds"] = self.train_seconds
        return payload


def _jsonable_config(cfg: TrainConfig) -> dict:
    hp = {}
    for key, value in cfg.hyperparameters.items():
        if isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, np.generic):
            value = value.item()
        hp[key] = value
    return {"kind": cfg.kind, "hyperparameters": hp, "seed": cfg.seed}


def _run_trial(args) -> dict:
    trial_index, cfg, X_train, y_train, X_dev, y_dev, classes = args
    started = time.perf_counter()
    try:
        model = train(X_train, y_train, cfg)
        report = evaluate(list(y_dev), predict(model, X_dev), classes)
        return {
            "trial_index": trial_index,
            "report": report.to_dict(),
            "seconds": time.perf_counter() - started,
        }
    except (ModelError, ValueError, ArithmeticError, RuntimeError) as exc:
        return {
            "trial_index": trial_index,
            "error": f"{type(exc).__name__}: {exc}",
            "seconds": time.perf_counter() - started,
        }


def run_grid_search(
    spec: GridSpec,
    X_train,
    y_train,
    X_dev,
    y_dev,
    selection_metric: str = "macro_f1",
    base_seed: int = 0,
    workers: int = 1,
) -> tuple[TrialResult, list[TrialResult]]:
    if selection_metric not in SELECTION_METRICS:
        raise TuningError(f"selection metric must be one of {SELECTION_METRICS}, got {selection_metric!r}")
    if len(list(y_dev)) == 0:
        raise TuningError("dev set is empty")

    configs = enumerate_grid(spec)
    classes = infer_classes(list(y_train) + list(y_dev))
    jobs = []
    for trial_index, cfg in enumerate(configs):
        seeded = TrainConfig(
            kind=cfg.kind,
            hyperparameters=dict(cfg.hyperparameters),
            seed=base_seed + trial_index,
        )
        configs[trial_index] = seeded
        jobs.append((trial_index, seeded, X_train, y_train, X_dev, y_dev, classes))

    if workers <= 1:
        raw = [_run_trial(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (workers * 4) or 1)))

    raw.sort(key=lambda r: r["trial_index"])
    results = []
    for entry in raw:
        idx = entry["trial_index"]
        if "error" in entry:
            results.append(
                TrialResult(trial_index=idx, config=configs[idx], dev_report=None, train_seconds=entry["seconds"], error=entry["error"])
            )
        else:
            results.append(
                TrialResult(
                    trial_index=idx,
                    config=configs[idx],
                    dev_report=report_from_dict(entry["report"]),
                    train_seconds=entry["seconds"],
                )
            )

    survivors = [r for r in results if r.dev_report is not None]
    if not survivors:
        raise TuningError("every grid trial failed; first error: " + str(results[0].error))
    best = max(survivors, key=lambda r: (r.metric(selection_metric), -r.trial_index))
    return best, results


def write_search_artifacts(best: TrialResult, results: list[TrialResult], out_dir) -> None:
    """trials.jsonl (with timings) plus best.json (timing-free, reproducible)."""
    import pathlib

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.jsonl", "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result.to_dict(with_timing=True), sort_keys=True) + "\n")
    with open(out / "best.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(best.to_dict(with_timing=False), sort_keys=True) + "\n")
