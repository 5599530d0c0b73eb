"""End-to-end experiment runs: isolation, artifacts, determinism, prediction."""

import io
import json
import pathlib

import numpy as np
import pytest

from hopeml.cli import ExperimentConfig, ExperimentError, predict_cli, run_experiment
from hopeml.models import load_model
from conftest import HOPE_WORDS, DULL_WORDS


def _cfg(tsv_splits, tmp_path, name="run", **over):
    data = dict(
        task_mode="two_way",
        data=dict(tsv_splits),
        featurizer="tfidf",
        model="logreg",
        out_dir=str(tmp_path / name),
        grid={"C": [1.0], "epochs": [200]},
    )
    data.update(over)
    return ExperimentConfig.from_dict(data)


ARTIFACTS = (
    "model.json",
    "featurizer.json",
    "trials.jsonl",
    "best.json",
    "test_report.json",
    "test_report.txt",
    "config.json",
)


def test_run_experiment_end_to_end(tsv_splits, tmp_path):
    cfg = _cfg(tsv_splits, tmp_path)
    assert cfg.experiment_name() == "tfidf-no-pca"
    report, best = run_experiment(cfg)
    assert report.macro_f1 >= 0.9
    assert best.trial_index == 0
    out = pathlib.Path(cfg.out_dir)
    for artifact in ARTIFACTS:
        assert (out / artifact).exists(), artifact
    stored = json.loads((out / "test_report.json").read_text())
    assert stored == report.to_dict()


def test_fit_time_inputs_are_train_only(tsv_splits, tmp_path):
    cfg = _cfg(tsv_splits, tmp_path, pca={"mode": "fraction", "value": 0.95})
    assert cfg.experiment_name() == "tfidf-pca"
    fit_log = []
    run_experiment(cfg, fit_log=fit_log)
    assert ("tfidf_fit", "train") in fit_log
    assert ("pca_fit", "train") in fit_log
    assert all(split == "train" for _, split in fit_log)


def test_pca_fraction_reduces_the_feature_dimension(tsv_splits, tmp_path):
    plain = _cfg(tsv_splits, tmp_path, name="plain")
    run_experiment(plain)
    full_dim = load_model(pathlib.Path(plain.out_dir) / "model.json").feature_dim

    reduced = _cfg(tsv_splits, tmp_path, name="reduced", pca={"mode": "fraction", "value": 0.95})
    run_experiment(reduced)
    pca_dim = load_model(pathlib.Path(reduced.out_dir) / "model.json").feature_dim
    assert pca_dim < full_dim


def test_pca_k_mode_pins_the_dimension(tsv_splits, tmp_path):
    cfg = _cfg(tsv_splits, tmp_path, pca={"mode": "k", "value": 3})
    run_experiment(cfg)
    assert load_model(pathlib.Path(cfg.out_dir) / "model.json").feature_dim == 3


def test_identical_configs_produce_byte_identical_artifacts(tsv_splits, tmp_path):
    first = _cfg(tsv_splits, tmp_path, name="first")
    second = _cfg(tsv_splits, tmp_path, name="second")
    run_experiment(first)
    run_experiment(second)
    for name in ("test_report.json", "model.json", "best.json", "featurizer.json"):
        a = (pathlib.Path(first.out_dir) / name).read_bytes()
        b = (pathlib.Path(second.out_dir) / name).read_bytes()
        assert a == b, name


def test_augmentation_keeps_fitted_artifacts_and_eval_splits_untouched(tsv_splits, tmp_path):
    plain = _cfg(tsv_splits, tmp_path, name="plain", pca={"mode": "fraction", "value": 0.95})
    augmented = _cfg(
        tsv_splits,
        tmp_path,
        name="augmented",
        pca={"mode": "fraction", "value": 0.95},
        augmentation={"target_counts": {"hope_speech": 150}, "alpha": 0.1},
    )
    report_plain, _ = run_experiment(plain)
    report_aug, _ = run_experiment(augmented)

    # vocabulary, idf, and PCA basis must come from the original train rows,
    # so the fitted featurizer state is identical with augmentation on
    a = (pathlib.Path(plain.out_dir) / "featurizer.json").read_bytes()
    b = (pathlib.Path(augmented.out_dir) / "featurizer.json").read_bytes()
    assert a == b

    # the test split stays the untouched 30/30 corpus
    for report in (report_plain, report_aug):
        supports = [scores.support for scores in report.per_class.values()]
        assert supports == [30, 30]


def test_augmentation_with_precomputed_vectors_is_rejected(tsv_splits, tmp_path):
    with pytest.raises(ExperimentError, match="augmentation cannot be combined"):
        _cfg(
            tsv_splits,
            tmp_path,
            featurizer="better",
            vectors={s: "x.tsv" for s in ("train", "dev", "test")},
            augmentation={"target_counts": {"hope_speech": 150}},
        )


def test_precomputed_vector_featurizer_runs(tsv_splits, tmp_path):
    rng = np.random.default_rng(0)
    sizes = {"train": 200, "dev": 60, "test": 60}
    vector_paths = {}
    for split, n in sizes.items():
        # class-informative 4-dim vectors: even ids are hope rows by corpus construction
        path = tmp_path / f"{split}_vec.tsv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{n} 4\n")
            for i in range(n):
                center = 1.0 if i % 2 == 0 else -1.0
                vec = rng.normal(center, 0.2, size=4)
                fh.write(f"{i} " + " ".join(f"{v:.6f}" for v in vec) + "\n")
        vector_paths[split] = str(path)

    cfg = _cfg(tsv_splits, tmp_path, featurizer="faster", vectors=vector_paths)
    report, _ = run_experiment(cfg)
    assert report.macro_f1 >= 0.9
    assert load_model(pathlib.Path(cfg.out_dir) / "model.json").feature_dim == 4


def test_word_vector_featurizer_runs(tsv_splits, tmp_path):
    rng = np.random.default_rng(1)
    table_path = tmp_path / "toy_vectors.txt"
    with open(table_path, "w", encoding="utf-8") as fh:
        for word in HOPE_WORDS:
            fh.write(word + " " + " ".join(f"{v:.5f}" for v in rng.normal(1.0, 0.1, 5)) + "\n")
        for word in DULL_WORDS:
            fh.write(word + " " + " ".join(f"{v:.5f}" for v in rng.normal(-1.0, 0.1, 5)) + "\n")

    cfg = _cfg(tsv_splits, tmp_path, featurizer="glove", embedding_path=str(table_path))
    report, _ = run_experiment(cfg)
    assert report.macro_f1 >= 0.9
    assert load_model(pathlib.Path(cfg.out_dir) / "model.json").feature_dim == 5


def test_config_validation():
    base = dict(
        task_mode="two_way",
        data={"train": "a", "dev": "b", "test": "c"},
        featurizer="tfidf",
        model="logreg",
        out_dir="out",
    )
    with pytest.raises(ExperimentError, match="unknown config keys"):
        ExperimentConfig.from_dict(dict(base, depth=3))
    with pytest.raises(ExperimentError, match="missing for splits"):
        ExperimentConfig.from_dict(dict(base, data={"train": "a"}))
    with pytest.raises(ExperimentError, match="pca mode"):
        ExperimentConfig.from_dict(dict(base, pca={"mode": "auto"}))
    with pytest.raises(ExperimentError, match="pca fraction"):
        ExperimentConfig.from_dict(dict(base, pca={"mode": "fraction", "value": 1.5}))
    with pytest.raises(ExperimentError, match="embedding_path"):
        ExperimentConfig.from_dict(dict(base, featurizer="w2v"))
    with pytest.raises(ExperimentError, match="selection_metric"):
        ExperimentConfig.from_dict(dict(base, selection_metric="accuracy"))


def test_selection_metric_defaults_follow_the_task():
    data = {"train": "a", "dev": "b", "test": "c"}
    two = ExperimentConfig("two_way", data, "tfidf", "logreg", "out")
    three = ExperimentConfig("three_way", data, "tfidf", "logreg", "out")
    assert two.resolved_metric() == "macro_f1"
    assert three.resolved_metric() == "weighted_f1"
    pinned = ExperimentConfig("three_way", data, "tfidf", "logreg", "out", selection_metric="macro_f1")
    assert pinned.resolved_metric() == "macro_f1"


def test_errors_carry_the_stage_name(tsv_splits, tmp_path):
    broken = dict(tsv_splits, train=str(tmp_path / "missing.tsv"))
    cfg = _cfg(broken, tmp_path)
    with pytest.raises(ExperimentError, match="^load:"):
        run_experiment(cfg)


def test_predict_cli_labels_lines(tsv_splits, tmp_path):
    cfg = _cfg(tsv_splits, tmp_path)
    run_experiment(cfg)

    out, err = io.StringIO(), io.StringIO()
    code = predict_cli(cfg.out_dir, io.StringIO("bright future together\ngray noise static\n"), out, err)
    assert code == 0
    lines = out.getvalue().splitlines()
    assert lines == ["hope_speech", "non_hope_speech"]
    assert "processed 2 lines" in err.getvalue()


def test_predict_cli_proba_flag_appends_distributions(tsv_splits, tmp_path):
    cfg = _cfg(tsv_splits, tmp_path)
    run_experiment(cfg)

    out, err = io.StringIO(), io.StringIO()
    predict_cli(cfg.out_dir, io.StringIO("bright dream\n"), out, err, with_proba=True)
    label, scores = out.getvalue().strip().split("\t")
    assert label == "hope_speech"
    parsed = json.loads(scores)
    assert len(parsed) == 2
    assert sum(parsed) == pytest.approx(1.0, abs=1e-5)


def test_predict_cli_empty_input_is_success(tsv_splits, tmp_path):
    cfg = _cfg(tsv_splits, tmp_path)
    run_experiment(cfg)

    out, err = io.StringIO(), io.StringIO()
    code = predict_cli(cfg.out_dir, io.StringIO(""), out, err)
    assert code == 0
    assert out.getvalue() == ""
    assert "processed 0 lines" in err.getvalue()


def test_predict_cli_rejects_mismatched_featurizer_state(tsv_splits, tmp_path):
    cfg = _cfg(tsv_splits, tmp_path)
    run_experiment(cfg)
    state_path = pathlib.Path(cfg.out_dir) / "featurizer.json"
    state = json.loads(state_path.read_text())
    first_token = sorted(state["vocabulary"]["index"])[0]
    del state["vocabulary"]["index"][first_token]
    state_path.write_text(json.dumps(state))

    with pytest.raises(ExperimentError, match="mismatch"):
        predict_cli(cfg.out_dir, io.StringIO("bright\n"), io.StringIO(), io.StringIO())


def test_precomputed_pipeline_cannot_encode_new_text(tsv_splits, tmp_path):
    rng = np.random.default_rng(3)
    sizes = {"train": 200, "dev": 60, "test": 60}
    vector_paths = {}
    for split, n in sizes.items():
        path = tmp_path / f"{split}_v.tsv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{n} 3\n")
            for i in range(n):
                center = 1.0 if i % 2 == 0 else -1.0
                fh.write(f"{i} " + " ".join(f"{v:.5f}" for v in rng.normal(center, 0.2, 3)) + "\n")
        vector_paths[split] = str(path)
    cfg = _cfg(tsv_splits, tmp_path, featurizer="faster", vectors=vector_paths)
    run_experiment(cfg)

    with pytest.raises(ExperimentError, match="cannot encode new text"):
        predict_cli(cfg.out_dir, io.StringIO("anything\n"), io.StringIO(), io.StringIO())
