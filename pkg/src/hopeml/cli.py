"""Experiment harness and command-line entry points.

Wires corpus -> features -> optional augmentation -> grid search ->
metrics from a JSON config, persists every artifact needed to reuse the
fitted pipeline (model, featurizer state, trial log, reports), and
exposes batch prediction plus a small threaded HTTP endpoint.

Leak rules enforced here: the featurizer and PCA are fitted on the
ORIGINAL train split only; augmented copies are transformed with those
fitted artifacts and never enter dev or test.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import pathlib
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from hopeml.augment import OPERATORS, AugmentConfig, AugmentError, balance_classes
from hopeml.corpus import (
    TASK_MODES,
    ClassLabel,
    CorpusError,
    class_counts,
    load_corpus,
    parse_label_map,
    task_classes,
    write_corpus,
)
from hopeml.features import (
    FeatureError,
    FeatureMatrix,
    load_embedding_table,
    load_precomputed_vectors,
    pca_fit,
    pca_model_from_dict,
    pca_transform,
    pool_corpus,
    pool_document,
    tfidf_fit,
    tfidf_rows,
    tfidf_transform,
    vocabulary_from_dict,
)
from hopeml.metrics import MetricsError, evaluate, format_report
from hopeml.models import MODEL_KINDS, ModelError, load_model, predict, predict_proba, save_model, train
from hopeml.textproc import tokenize
from hopeml.tuning import DEFAULT_GRIDS, SELECTION_METRICS, GridSpec, TuningError, run_grid_search, write_search_artifacts

FEATURIZERS = ("tfidf", "glove", "fasttext", "w2v", "better", "faster")
WORD_VECTOR_FEATURIZERS = ("glove", "fasttext", "w2v")
PRECOMPUTED_FEATURIZERS = ("better", "faster")

SPLITS = ("train", "dev", "test")

FEATURIZER_FORMAT_VERSION = 1


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task_mode: str
    data: dict[str, str]
    featurizer: str
    model: str
    out_dir: str
    pca: dict | None = None
    grid: dict | None = None
    selection_metric: str | None = None
    augmentation: dict | None = None
    embedding_path: str | None = None
    vectors: dict[str, str] | None = None
    label_map: dict[str, str] | None = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.task_mode not in TASK_MODES:
            raise ExperimentError(f"task_mode must be one of {TASK_MODES}, got {self.task_mode!r}")
        missing = [s for s in SPLITS if s not in self.data]
        if missing:
            raise ExperimentError(f"data paths missing for splits: {missing}")
        if self.featurizer not in FEATURIZERS:
            raise ExperimentError(f"featurizer must be one of {FEATURIZERS}, got {self.featurizer!r}")
        if self.model not in MODEL_KINDS:
            raise ExperimentError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.featurizer in WORD_VECTOR_FEATURIZERS and not self.embedding_path:
            raise ExperimentError(f"featurizer {self.featurizer!r} needs embedding_path")
        if self.featurizer in PRECOMPUTED_FEATURIZERS:
            missing = [s for s in SPLITS if not (self.vectors or {}).get(s)]
            if missing:
                raise ExperimentError(f"featurizer {self.featurizer!r} needs vectors paths for splits: {missing}")
            if self.augmentation:
                raise ExperimentError(
                    "augmentation cannot be combined with precomputed-vector featurizers: "
                    "new training copies would have no vectors (re-export an augmented corpus instead)"
                )
        if self.pca is not None:
            mode = self.pca.get("mode")
            if mode not in ("off", "fraction", "k"):
                raise ExperimentError(f"pca mode must be off, fraction, or k, got {mode!r}")
            if mode == "fraction":
                value = self.pca.get("value")
                if not isinstance(value, (int, float)) or not 0.0 < float(value) <= 1.0:
                    raise ExperimentError(f"pca fraction must lie in (0, 1], got {value!r}")
            if mode == "k":
                value = self.pca.get("value")
                if not isinstance(value, int) or value < 1:
                    raise ExperimentError(f"pca k must be a positive integer, got {value!r}")
        if self.selection_metric is not None and self.selection_metric not in SELECTION_METRICS:
            raise ExperimentError(f"selection_metric must be one of {SELECTION_METRICS}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ExperimentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def resolved_metric(self) -> str:
        if self.selection_metric:
            return self.selection_metric
        # the three-way task reports weighted F1, the two-way task macro F1
        return "weighted_f1" if self.task_mode == "three_way" else "macro_f1"

    def pca_enabled(self) -> bool:
        return self.pca is not None and self.pca.get("mode") != "off"

    def experiment_name(self) -> str:
        return f"{self.featurizer}-{'pca' if self.pca_enabled() else 'no-pca'}"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@contextmanager
def _stage(name: str):
    """Re-raise any failure with the pipeline stage prepended."""
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(f"{name}: {exc}") from exc


def _augment_config(raw: dict, default_seed: int) -> AugmentConfig:
    try:
        targets = {ClassLabel(k): int(v) for k, v in raw["target_counts"].items()}
    except (KeyError, ValueError) as exc:
        raise ExperimentError(f"augmentation target_counts invalid: {exc}")
    return AugmentConfig(
        target_counts=targets,
        ops_enabled=tuple(raw.get("ops_enabled", OPERATORS)),
        alpha=float(raw.get("alpha", 0.1)),
        seed=int(raw.get("seed", default_seed)),
    )


def run_experiment(cfg: ExperimentConfig, fit_log: list | None = None):
    """Run the full pipeline; returns (test EvalReport, best TrialResult).

    ``fit_log``, when given, records every (stage, split) whose rows were
    used to FIT an artifact, so leak tests can assert train-only fitting.
    """
    out = pathlib.Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def log_fit(stage: str, split: str):
        if fit_log is not None:
            fit_log.append((stage, split))

    with _stage("load"):
        label_map = parse_label_map(cfg.label_map) if cfg.label_map else None
        corpora = {
            split: load_corpus(cfg.data[split], label_map, cfg.task_mode, split=split) for split in SPLITS
        }

    featurizer_state: dict = {
        "format_version": FEATURIZER_FORMAT_VERSION,
        "featurizer": cfg.featurizer,
        "task_mode": cfg.task_mode,
        "pca": None,
    }
    with _stage("featurize"):
        if cfg.featurizer == "tfidf":
            vocab = tfidf_fit(corpora["train"])
            log_fit("tfidf_fit", corpora["train"].split)
            featurizer_state["vocabulary"] = vocab.to_dict()

            def featurize(corpus):
                return tfidf_transform(vocab, corpus)

        elif cfg.featurizer in WORD_VECTOR_FEATURIZERS:
            table = load_embedding_table(cfg.embedding_path, source_name=cfg.featurizer)
            featurizer_state["embedding_path"] = str(cfg.embedding_path)
            featurizer_state["dim"] = table.dim

            def featurize(corpus):
                return pool_corpus(table, corpus)

        else:
            featurizer_state["vectors"] = {s: str(p) for s, p in cfg.vectors.items()}

            def featurize(corpus):
                return load_precomputed_vectors(cfg.vectors[corpus.split], corpus)

    train_corpus = corpora["train"]
    if cfg.augmentation:
        with _stage("augment"):
            train_corpus = balance_classes(train_corpus, _augment_config(cfg.augmentation, cfg.seed))

    with _stage("transform"):
        # the fit matrix holds the original train rows only; augmented
        # copies are transformed with artifacts fitted on it, never fit on
        X_fit = featurize(corpora["train"])
        X = {
            "train": featurize(train_corpus) if train_corpus is not corpora["train"] else X_fit,
            "dev": featurize(corpora["dev"]),
            "test": featurize(corpora["test"]),
        }

    if cfg.pca_enabled():
        with _stage("pca"):
            value = cfg.pca.get("value", 0.95)
            k = float(value) if cfg.pca["mode"] == "fraction" else int(value)
            pca_model = pca_fit(X_fit, k)
            log_fit("pca_fit", corpora["train"].split)
            featurizer_state["pca"] = pca_model.to_dict()
            X = {split: pca_transform(pca_model, m) for split, m in X.items()}

    with _stage("tune"):
        axes = cfg.grid if cfg.grid is not None else DEFAULT_GRIDS[cfg.model].axes
        spec = GridSpec(cfg.model, dict(axes))
        best, trials = run_grid_search(
            spec,
            X["train"],
            train_corpus.labels(),
            X["dev"],
            corpora["dev"].labels(),
            selection_metric=cfg.resolved_metric(),
            base_seed=cfg.seed,
            workers=cfg.workers,
        )
        write_search_artifacts(best, trials, out)

    with _stage("train"):
        model = train(X["train"], train_corpus.labels(), best.config)
        save_model(model, out / "model.json")
        with open(out / "featurizer.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(featurizer_state, sort_keys=True))

    with _stage("evaluate"):
        report = evaluate(corpora["test"].labels(), predict(model, X["test"]), task_classes(cfg.task_mode))
        with open(out / "test_report.json", "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        with open(out / "test_report.txt", "w", encoding="utf-8") as fh:
            fh.write(format_report(report) + "\n")
        with open(out / "config.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(cfg.to_dict(), sort_keys=True))

    return report, best


# ---------------------------------------------------------------------------
# Prediction on new text


def _load_pipeline(model_path):
    """Model plus featurizer state from a run directory (or model.json path)."""
    path = pathlib.Path(model_path)
    if path.is_dir():
        model_file, state_file = path / "model.json", path / "featurizer.json"
    else:
        model_file, state_file = path, path.parent / "featurizer.json"
    if not model_file.exists():
        raise ExperimentError(f"model file not found: {model_file}")
    if not state_file.exists():
        raise ExperimentError(f"featurizer state not found next to the model: {state_file}")
    model = load_model(model_file)
    with open(state_file, encoding="utf-8") as fh:
        state = json.load(fh)
    version = state.get("format_version")
    if not isinstance(version, int) or version > FEATURIZER_FORMAT_VERSION:
        raise ExperimentError(f"unsupported featurizer format_version {version!r}")

    expected_dim = None
    if state.get("pca"):
        expected_dim = len(state["pca"]["components"])
    elif state["featurizer"] == "tfidf":
        expected_dim = len(state["vocabulary"]["index"])
    elif state["featurizer"] in WORD_VECTOR_FEATURIZERS:
        expected_dim = int(state["dim"])
    if expected_dim is not None and expected_dim != model.feature_dim:
        raise ExperimentError(
            f"model/featurizer mismatch: featurizer produces {expected_dim} columns, model expects {model.feature_dim}"
        )
    return model, state


def _texts_matrix(state: dict, texts: list[str]) -> FeatureMatrix:
    kind = state["featurizer"]
    if kind == "tfidf":
        rows = tfidf_rows(vocabulary_from_dict(state["vocabulary"]), texts)
    elif kind in WORD_VECTOR_FEATURIZERS:
        table = load_embedding_table(state["embedding_path"], expected_dim=int(state["dim"]), source_name=kind)
        rows = np.stack([pool_document(table, tokenize(t)) for t in texts])
    else:
        raise ExperimentError(
            f"featurizer {kind!r} holds precomputed vectors and cannot encode new text; "
            "export vectors for the new corpus and run an experiment instead"
        )
    if state.get("pca"):
        pca_model = pca_model_from_dict(state["pca"])
        dense = np.asarray(rows.todense()) if hasattr(rows, "todense") else rows
        rows = (dense - pca_model.mean) @ pca_model.components.T
    return FeatureMatrix(data=rows, row_ids=np.arange(len(texts)))


def predict_cli(model_path, in_stream, out_stream, err_stream, with_proba: bool = False) -> int:
    model, state = _load_pipeline(model_path)
    started = time.perf_counter()
    lines = [line.rstrip("\n") for line in in_stream]
    if not lines:
        print("processed 0 lines", file=err_stream)
        return 0
    X = _texts_matrix(state, lines)
    labels = predict(model, X)
    proba = predict_proba(model, X) if with_proba else None
    for i, label in enumerate(labels):
        if with_proba:
            scores = json.dumps([round(float(p), 6) for p in proba[i]])
            print(f"{label.value}\t{scores}", file=out_stream)
        else:
            print(label.value, file=out_stream)
    elapsed = time.perf_counter() - started
    rate = len(lines) / elapsed if elapsed > 0 else float("inf")
    print(f"processed {len(lines)} lines in {elapsed:.3f}s ({rate:.1f} lines/s)", file=err_stream)
    return 0


# ---------------------------------------------------------------------------
# HTTP serving


class _PredictionServer(ThreadingHTTPServer):
    # default backlog of 5 drops connections under concurrent bursts
    request_queue_size = 128


def make_server(model_path, host: str = "127.0.0.1", port: int = 8000, max_batch: int = 1000) -> ThreadingHTTPServer:
    """Build (but do not start) the threaded prediction server."""
    model, state = _load_pipeline(model_path)

    class Handler(BaseHTTPRequestHandler):
        def _send(self, code: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok"})
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def do_POST(self):
            if self.path != "/predict":
                self._send(404, {"error": f"no route {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                self._send(400, {"error": "body must be valid JSON"})
                return
            texts = payload.get("texts") if isinstance(payload, dict) else None
            if not isinstance(texts, list) or any(not isinstance(t, str) for t in texts):
                self._send(400, {"error": 'body must be {"texts": [string, ...]}'})
                return
            if len(texts) > max_batch:
                self._send(413, {"error": f"batch of {len(texts)} exceeds cap {max_batch}"})
                return
            if not texts:
                self._send(200, {"labels": [], "scores": []})
                return
            try:
                X = _texts_matrix(state, texts)
                labels = predict(model, X)
                scores = predict_proba(model, X)
            except (ExperimentError, FeatureError, ModelError) as exc:
                self._send(400, {"error": str(exc)})
                return
            self._send(200, {"labels": [l.value for l in labels], "scores": scores.tolist()})

        def log_message(self, fmt, *args):  # keep stdout/stderr quiet under tests
            pass

    return _PredictionServer((host, port), Handler)


def serve(model_path, host: str = "127.0.0.1", port: int = 8000, max_batch: int = 1000) -> int:
    server = make_server(model_path, host, port, max_batch)
    actual_host, actual_port = server.server_address[:2]
    print(f"serving on http://{actual_host}:{actual_port} (POST /predict, GET /health)", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _parse_target(raw: str):
    label_value, sep, count = raw.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"target must look like label=COUNT, got {raw!r}")
    try:
        label = ClassLabel(label_value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown label {label_value!r}; use one of {[c.value for c in ClassLabel]}")
    try:
        n = int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"target count must be an integer, got {count!r}")
    return label, n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopeml", description="Text-classification experiment toolkit.")
    parser.add_argument("--config", help="experiment config JSON (used by `run`)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory or file, by subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="per-class document counts of a TSV corpus")
    p_stats.add_argument("--data", required=True)
    p_stats.add_argument("--task", choices=TASK_MODES, default="three_way")

    p_aug = sub.add_parser("augment", help="oversample classes to target counts and write a new TSV")
    p_aug.add_argument("--data", required=True)
    p_aug.add_argument("--target", type=_parse_target, action="append", required=True, metavar="LABEL=N")
    p_aug.add_argument("--ops", nargs="+", choices=list(OPERATORS), default=list(OPERATORS))
    p_aug.add_argument("--alpha", type=float, default=0.1)
    p_aug.add_argument("--task", choices=TASK_MODES, default="three_way")

    sub.add_parser("run", help="run the experiment described by --config")

    p_pred = sub.add_parser("predict", help="label text lines with a trained run directory")
    p_pred.add_argument("--model", required=True, help="run directory (or model.json path)")
    p_pred.add_argument("--input", default=None, help="text file, one input per line (default: stdin)")
    p_pred.add_argument("--proba", action="store_true", help="append the probability vector per line")

    p_serve = sub.add_parser("serve", help="HTTP prediction endpoint over a trained run directory")
    p_serve.add_argument("--model", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--max-batch", type=int, default=1000)

    return parser


def _cmd_stats(args) -> int:
    corpus = load_corpus(args.data, task_mode=args.task, split="stats")
    for label, count in class_counts(corpus).items():
        print(f"{label.value}\t{count}")
    print(f"total\t{len(corpus)}")
    return 0


def _cmd_augment(args) -> int:
    if not args.out:
        raise ExperimentError("augment needs --out for the augmented TSV")
    corpus = load_corpus(args.data, task_mode=args.task, split="train")
    cfg = AugmentConfig(
        target_counts=dict(args.target),
        ops_enabled=tuple(args.ops),
        alpha=args.alpha,
        seed=args.seed if args.seed is not None else 0,
    )
    augmented = balance_classes(corpus, cfg)
    write_corpus(augmented, args.out)
    for label, count in class_counts(augmented).items():
        print(f"{label.value}\t{count}")
    print(f"total\t{len(augmented)}")
    return 0


def _cmd_run(args) -> int:
    if not args.config:
        raise ExperimentError("run needs --config pointing at an experiment JSON")
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    report, best = run_experiment(cfg)
    print(f"experiment {cfg.experiment_name()} model {cfg.model}")
    print(f"best trial {best.trial_index}: {json.dumps(best.to_dict(with_timing=False)['config']['hyperparameters'], sort_keys=True)}")
    print(f"dev {cfg.resolved_metric()} {best.metric(cfg.resolved_metric()):.4f}")
    print(f"test macro_f1 {report.macro_f1:.4f}")
    print(f"test weighted_f1 {report.weighted_f1:.4f}")
    print(f"report {pathlib.Path(cfg.out_dir) / 'test_report.json'}")
    return 0


def _cmd_predict(args) -> int:
    if args.input is None:
        return predict_cli(args.model, sys.stdin, sys.stdout, sys.stderr, with_proba=args.proba)
    with open(args.input, encoding="utf-8") as fh:
        return predict_cli(args.model, fh, sys.stdout, sys.stderr, with_proba=args.proba)


def _cmd_serve(args) -> int:
    return serve(args.model, host=args.host, port=args.port, max_batch=args.max_batch)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "stats": _cmd_stats,
        "augment": _cmd_augment,
        "run": _cmd_run,
        "predict": _cmd_predict,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (
        ExperimentError,
        CorpusError,
        FeatureError,
        AugmentError,
        ModelError,
        TuningError,
        MetricsError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
