"""Shared builders for synthetic corpora and matrices."""

import numpy as np
import pytest

from hopeml.corpus import ClassLabel, Document, LabeledCorpus

HOPE_WORDS = ["bright", "future", "together", "support", "dream", "rise", "heal", "strong"]
DULL_WORDS = ["gray", "noise", "static", "blank", "drift", "flat", "dull", "fog"]
OTHER_WORDS = ["zed", "qux", "vex", "jolt", "murk", "pall", "glum", "void"]


def synthetic_corpus(n, seed=0, split="train", task_mode="two_way", three_way=False):
    """Separable bag-of-words corpus: each class draws from its own pool."""
    rng = np.random.default_rng(seed)
    pools = [
        (HOPE_WORDS, ClassLabel.HOPE_SPEECH),
        (DULL_WORDS, ClassLabel.NON_HOPE_SPEECH),
    ]
    if three_way:
        pools.append((OTHER_WORDS, ClassLabel.NON_ENGLISH))
        task_mode = "three_way"
    docs = []
    for i in range(n):
        pool, label = pools[i % len(pools)]
        words = rng.choice(pool, size=int(rng.integers(4, 9)))
        docs.append(Document(id=i, text=" ".join(words), label=label))
    return LabeledCorpus(split=split, documents=tuple(docs), task_mode=task_mode)


def write_tsv(path, corpus, label_names=None):
    names = label_names or {
        ClassLabel.HOPE_SPEECH: "Hope_speech",
        ClassLabel.NON_HOPE_SPEECH: "Non_hope_speech",
        ClassLabel.NON_ENGLISH: "Non_English",
    }
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(f"{doc.text}\t{names[doc.label]}\n")
    return path


def blobs(n_per_class, centers, spread=0.3, seed=0):
    """Gaussian blobs: returns (X, string labels)."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for label, center in centers.items():
        X.append(rng.normal(loc=center, scale=spread, size=(n_per_class, len(center))))
        y.extend([label] * n_per_class)
    return np.vstack(X), y


@pytest.fixture
def tsv_splits(tmp_path):
    """Train/dev/test TSVs of a separable two-way corpus."""
    paths = {}
    for split, n, seed in (("train", 200, 0), ("dev", 60, 1), ("test", 60, 2)):
        corpus = synthetic_corpus(n, seed=seed, split=split)
        paths[split] = str(write_tsv(tmp_path / f"{split}.tsv", corpus))
    return paths
