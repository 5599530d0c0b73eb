"""Tab-separated corpus ingestion with class labels and split tags.

A corpus file holds one record per line, ``text<TAB>label``. Raw label
strings are never hardcoded; callers supply a label_map binding them to
the three canonical classes. Lines are split on the LAST tab so texts
containing literal tabs survive (labels never contain tabs).
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass


class ClassLabel(str, enum.Enum):
    HOPE_SPEECH = "hope_speech"
    NON_HOPE_SPEECH = "non_hope_speech"
    NON_ENGLISH = "non_english"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


# Common raw spellings seen in distributions of this kind of dataset.
# Overridable from experiment configs; the canonical values always map too.
DEFAULT_LABEL_MAP = {
    "Hope_speech": ClassLabel.HOPE_SPEECH,
    "Non_hope_speech": ClassLabel.NON_HOPE_SPEECH,
    "Non_English": ClassLabel.NON_ENGLISH,
    "not-English": ClassLabel.NON_ENGLISH,
    "hope_speech": ClassLabel.HOPE_SPEECH,
    "non_hope_speech": ClassLabel.NON_HOPE_SPEECH,
    "non_english": ClassLabel.NON_ENGLISH,
}

TASK_MODES = ("two_way", "three_way")


class CorpusError(ValueError):
    """Raised for malformed corpus files or illegal label configurations."""


@dataclass(frozen=True)
class Document:
    id: int
    text: str
    label: ClassLabel
    raw_label: str = ""

    def __post_init__(self):
        if self.id < 0:
            raise CorpusError(f"document id must be non-negative, got {self.id}")
        if not self.text.strip():
            raise CorpusError(f"document {self.id} has empty text")


@dataclass(frozen=True)
class LabeledCorpus:
    """Ordered documents for one split. Immutable and safely shareable."""

    split: str
    documents: tuple[Document, ...]
    task_mode: str = "three_way"

    def __post_init__(self):
        if self.task_mode not in TASK_MODES:
            raise CorpusError(f"unknown task_mode {self.task_mode!r}")
        if self.task_mode == "two_way":
            bad = [d.id for d in self.documents if d.label is ClassLabel.NON_ENGLISH]
            if bad:
                raise CorpusError(f"two_way corpus contains non-English documents: ids {bad[:5]}")
        for i, doc in enumerate(self.documents):
            if doc.id != i:
                raise CorpusError(f"document ids must be contiguous from 0; position {i} has id {doc.id}")

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def classes(self) -> tuple[ClassLabel, ...]:
        """Labels legal for this corpus's task mode, in canonical order."""
        return task_classes(self.task_mode)

    def texts(self) -> list[str]:
        return [d.text for d in self.documents]

    def labels(self) -> list[ClassLabel]:
        return [d.label for d in self.documents]


def task_classes(task_mode: str) -> tuple[ClassLabel, ...]:
    if task_mode == "two_way":
        return (ClassLabel.HOPE_SPEECH, ClassLabel.NON_HOPE_SPEECH)
    if task_mode == "three_way":
        return (ClassLabel.HOPE_SPEECH, ClassLabel.NON_HOPE_SPEECH, ClassLabel.NON_ENGLISH)
    raise CorpusError(f"unknown task_mode {task_mode!r}")


def parse_label_map(raw: dict[str, str]) -> dict[str, ClassLabel]:
    """Turn a config-level {raw string: class value} map into enum form."""
    out = {}
    for key, value in raw.items():
        try:
            out[key] = ClassLabel(value)
        except ValueError:
            raise CorpusError(f"label_map value {value!r} is not one of {[c.value for c in ClassLabel]}")
    return out


def load_corpus(
    path,
    label_map: dict[str, ClassLabel] | None = None,
    task_mode: str = "three_way",
    split: str = "train",
    header: str | None = None,
) -> LabeledCorpus:
    """Read a ``text<TAB>label`` file into a LabeledCorpus.

    File order is preserved and ids are assigned 0..N-1 after any task-mode
    filtering. ``task_mode="two_way"`` drops non-English rows at load time.
    An optional header line is skipped when it matches ``header`` exactly.
    Raises CorpusError listing line numbers for malformed or unmapped rows.
    """
    if task_mode not in TASK_MODES:
        raise CorpusError(f"unknown task_mode {task_mode!r}")
    label_map = DEFAULT_LABEL_MAP if label_map is None else label_map

    malformed: list[int] = []
    unmapped: list[tuple[int, str]] = []
    records: list[tuple[str, ClassLabel, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if lineno == 1 and header is not None and line == header:
                continue
            if not line:
                continue
            text, tab, raw_label = line.rpartition("\t")
            if not tab or not text.strip():
                malformed.append(lineno)
                continue
            raw_label = raw_label.strip()
            label = label_map.get(raw_label)
            if label is None:
                unmapped.append((lineno, raw_label))
                continue
            records.append((text, label, raw_label))

    if malformed:
        raise CorpusError(f"malformed lines (need non-empty `text<TAB>label`): {malformed[:20]}")
    if unmapped:
        lines = ", ".join(f"{n} ({lbl!r})" for n, lbl in unmapped[:20])
        raise CorpusError(f"unmapped labels at lines: {lines}")

    if task_mode == "two_way":
        records = [r for r in records if r[1] is not ClassLabel.NON_ENGLISH]
    if not records:
        raise CorpusError(f"empty corpus: {path}")

    docs = tuple(
        Document(id=i, text=text, label=label, raw_label=raw)
        for i, (text, label, raw) in enumerate(records)
    )
    return LabeledCorpus(split=split, documents=docs, task_mode=task_mode)


def write_corpus(corpus: LabeledCorpus, path, label_names: dict[ClassLabel, str] | None = None) -> None:
    """Write the corpus back to TSV, preserving document order.

    Raw labels captured at load time are reused; ``label_names`` overrides
    them (and supplies names for synthetic documents without one).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            if label_names and doc.label in label_names:
                raw = label_names[doc.label]
            else:
                raw = doc.raw_label or doc.label.value
            fh.write(f"{doc.text}\t{raw}\n")


def class_counts(corpus: LabeledCorpus) -> dict[ClassLabel, int]:
    """Per-class document counts; every task-mode class appears, zeros included."""
    counts = Counter(d.label for d in corpus)
    return {label: counts.get(label, 0) for label in corpus.classes}
