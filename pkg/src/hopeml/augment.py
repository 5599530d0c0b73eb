"""Lexical augmentation: random word swap, deletion, and insertion.

The insertion operator samples the inserted word from the sentence itself,
so no lexical resource is needed. balance_classes appends augmented copies
round-robin over a class's originals until a target count is met; originals
are never reordered or modified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopeml.corpus import ClassLabel, Document, LabeledCorpus
from hopeml.textproc import tokenize

OPERATORS = ("deletion", "insertion", "swap")


class AugmentError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    target_counts: dict[ClassLabel, int]
    ops_enabled: tuple[str, ...] = OPERATORS
    alpha: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise AugmentError(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.ops_enabled:
            raise AugmentError("ops_enabled must not be empty")
        unknown = [op for op in self.ops_enabled if op not in OPERATORS]
        if unknown:
            raise AugmentError(f"unknown operators {unknown}; choose from {OPERATORS}")
        if ClassLabel.NON_ENGLISH in self.target_counts:
            raise AugmentError("the non-English class is never augmented")


def random_swap(tokens, n_ops: int, rng) -> list[str]:
    """Exchange two distinct uniformly chosen positions, n_ops times.

    Token multiset and length are preserved. Inputs shorter than 2 tokens
    come back unchanged.
    """
    tokens = list(tokens)
    n = len(tokens)
    if n < 2:
        return tokens
    for _ in range(n_ops):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n - 1))
        if j >= i:
            j += 1
        tokens[i], tokens[j] = tokens[j], tokens[i]
    return tokens


def random_deletion(tokens, p: float, rng) -> list[str]:
    """Drop each token independently with probability p.

    If every token would be dropped, one uniformly chosen token is kept, so
    non-empty input never becomes empty.
    """
    if not 0 <= p < 1:
        raise AugmentError(f"deletion probability must be in [0, 1), got {p}")
    tokens = list(tokens)
    if not tokens:
        return tokens
    if p == 0:
        return tokens
    draws = rng.random(len(tokens))
    kept = [t for t, r in zip(tokens, draws) if r >= p]
    if not kept:
        return [tokens[int(rng.integers(0, len(tokens)))]]
    return kept


def random_insertion(tokens, n_ops: int, rng) -> list[str]:
    """Insert a copy of a uniformly chosen current token at a uniform position.

    Repeats n_ops times, growing the sequence by one each time; the output
    vocabulary is a subset of the input's. Empty input comes back unchanged.
    """
    tokens = list(tokens)
    if not tokens:
        return tokens
    for _ in range(n_ops):
        word = tokens[int(rng.integers(0, len(tokens)))]
        pos = int(rng.integers(0, len(tokens) + 1))
        tokens.insert(pos, word)
    return tokens


def _apply_operator(op: str, tokens: list[str], alpha: float, rng) -> list[str]:
    if op == "deletion":
        return random_deletion(tokens, alpha, rng)
    n_ops = max(1, round(alpha * len(tokens)))
    if op == "swap":
        return random_swap(tokens, n_ops, rng)
    return random_insertion(tokens, n_ops, rng)


def balance_classes(corpus: LabeledCorpus, cfg: AugmentConfig) -> LabeledCorpus:
    """Append augmented copies until each targeted class hits its count.

    Copies cycle round-robin over that class's originals in corpus order;
    each copy applies one uniformly chosen enabled operator. The output is
    a pure function of (corpus, cfg): the rng stream is consumed in a fixed
    class-by-class, copy-by-copy order.
    """
    if len(corpus) == 0:
        raise AugmentError("cannot balance an empty corpus")
    rng = np.random.default_rng(cfg.seed)
    ops = sorted(cfg.ops_enabled)

    current = {label: 0 for label in corpus.classes}
    for doc in corpus:
        current[doc.label] += 1
    for label, target in cfg.target_counts.items():
        if target < current.get(label, 0):
            raise AugmentError(
                f"target {target} for {label.value} is below its current count {current.get(label, 0)}"
            )

    new_docs = list(corpus.documents)
    next_id = len(new_docs)
    for label in corpus.classes:
        target = cfg.target_counts.get(label)
        if target is None:
            continue
        originals = [d for d in corpus if d.label is label]
        deficit = target - len(originals)
        if deficit > 0 and not originals:
            raise AugmentError(f"no original documents of class {label.value} to augment")
        for i in range(deficit):
            src = originals[i % len(originals)]
            op = ops[int(rng.integers(0, len(ops)))]
            tokens = tokenize(src.text)
            if tokens:
                text = " ".join(_apply_operator(op, tokens, cfg.alpha, rng))
            else:
                text = src.text  # nothing to perturb once normalized
            new_docs.append(Document(id=next_id, text=text, label=label, raw_label=src.raw_label))
            next_id += 1
    return LabeledCorpus(split=corpus.split, documents=tuple(new_docs), task_mode=corpus.task_mode)
