"""Batch export of sentence-encoder vectors in the classifier's file format.

The output is a plain-text vector file: an ``N D`` header line, then one
``row_id v1 .. vD`` line per document in corpus order, so a downstream
consumer can join vectors to TSV rows by position. A JSON manifest with a
content checksum is written next to every export.
"""

import dataclasses
import hashlib
import json
import pathlib

import numpy as np


class ExportError(ValueError):
    """Raised for unreadable corpora, encoder failures, or bad vectors."""


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    key: str
    name: str
    dim: int


# Fixed key -> published-model bindings. "better" trades speed for quality.
MODEL_SPECS = {
    "better": ModelSpec(key="better", name="all-mpnet-base-v2", dim=768),
    "faster": ModelSpec(key="faster", name="all-MiniLM-L6-v2", dim=384),
}

TASKS = ("two_way", "three_way")

# Raw label spellings the consumer's loader accepts; rows outside this set
# would shift its row numbering, so they are errors here too.
KNOWN_LABELS = {
    "Hope_speech": "hope_speech",
    "Non_hope_speech": "non_hope_speech",
    "Non_English": "non_english",
    "not-English": "non_english",
    "hope_speech": "hope_speech",
    "non_hope_speech": "non_hope_speech",
    "non_english": "non_english",
}


@dataclasses.dataclass(frozen=True)
class ExportManifest:
    model_key: str
    model_name: str
    corpus_path: str
    n_docs: int
    dim: int
    checksum: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def read_texts(path, task: str = "three_way") -> list[str]:
    """Texts of a ``text<TAB>label`` file, ordered and filtered like the
    consumer's corpus loader: lines split on the last tab, blank lines
    skipped, and non-English rows dropped first in two-way mode."""
    if task not in TASKS:
        raise ExportError(f"task must be one of {TASKS}, got {task!r}")
    malformed: list[int] = []
    unmapped: list[int] = []
    rows: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            text, tab, raw_label = line.rpartition("\t")
            if not tab or not text.strip():
                malformed.append(lineno)
                continue
            label = KNOWN_LABELS.get(raw_label.strip())
            if label is None:
                unmapped.append(lineno)
                continue
            rows.append((text, label))
    if malformed:
        raise ExportError(f"malformed lines (need non-empty `text<TAB>label`): {malformed[:20]}")
    if unmapped:
        raise ExportError(f"unknown labels at lines: {unmapped[:20]}")
    if task == "two_way":
        rows = [r for r in rows if r[1] != "non_english"]
    if not rows:
        raise ExportError(f"empty corpus: {path}")
    return [text for text, _ in rows]


def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


class SentenceTransformerEncoder:
    """Thin wrapper over the published checkpoint a ModelSpec names."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ExportError(
                f"encoder backend unavailable ({exc}); install the `encoders` extra"
            ) from exc
        try:
            self._model = SentenceTransformer(spec.name)
        except Exception as exc:
            raise ExportError(f"could not load encoder {spec.name!r}: {exc}") from exc

    def encode(self, texts: list[str]) -> np.ndarray:
        # the model truncates at its own max sequence length
        return np.asarray(self._model.encode(texts, batch_size=len(texts)), dtype=np.float64)


class HashEncoder:
    """Deterministic offline encoder: summed token-hash projections.

    Stands in for a real model in tests and dry runs; the projection for a
    token depends only on (seed, token), so identical inputs always encode
    to identical vectors, across processes.
    """

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def encode(self, texts: list[str]) -> np.ndarray:
        rows = np.empty((len(texts), self.dim))
        for i, text in enumerate(texts):
            acc = np.zeros(self.dim)
            for token in text.split():
                digest = hashlib.blake2b(f"{self.seed}:{token}".encode(), digest_size=8).digest()
                token_rng = np.random.default_rng(int.from_bytes(digest, "big"))
                acc += token_rng.standard_normal(self.dim)
            norm = np.linalg.norm(acc)
            rows[i] = acc / norm if norm > 0 else acc
        return rows


def default_encoder(spec: ModelSpec):
    return SentenceTransformerEncoder(spec)


def export_vectors(
    corpus_path,
    model_key: str,
    out_path,
    *,
    encoder=None,
    task: str = "three_way",
    normalized: bool = False,
    batch_size: int = 64,
) -> ExportManifest:
    """Encode every corpus row and write vectors plus a manifest.

    Vector components are written with 8 significant digits, below encoder
    noise but above what downstream consumers resolve. The manifest lands at
    ``<out_path>.manifest.json``.
    """
    spec = MODEL_SPECS.get(model_key)
    if spec is None:
        raise ExportError(f"model must be one of {sorted(MODEL_SPECS)}, got {model_key!r}")
    if batch_size < 1:
        raise ExportError(f"batch_size must be positive, got {batch_size}")
    if encoder is None:
        encoder = default_encoder(spec)

    texts = read_texts(corpus_path, task=task)
    if normalized:
        texts = [normalize_text(t) for t in texts]

    vectors = np.empty((len(texts), spec.dim))
    for start in range(0, len(texts), batch_size):
        batch = texts[start : start + batch_size]
        encoded = np.asarray(encoder.encode(batch), dtype=np.float64)
        if encoded.shape != (len(batch), spec.dim):
            raise ExportError(
                f"encoder returned shape {encoded.shape}, expected ({len(batch)}, {spec.dim})"
            )
        bad = np.flatnonzero(~np.isfinite(encoded).all(axis=1))
        if bad.size:
            raise ExportError(f"row {start + int(bad[0])}: encoder produced non-finite components")
        vectors[start : start + len(batch)] = encoded

    out_path = pathlib.Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(texts)} {spec.dim}\n")
        for i, row in enumerate(vectors):
            fh.write(f"{i} " + " ".join(format(v, ".8g") for v in row) + "\n")

    checksum = hashlib.sha256(out_path.read_bytes()).hexdigest()
    manifest = ExportManifest(
        model_key=spec.key,
        model_name=spec.name,
        corpus_path=str(corpus_path),
        n_docs=len(texts),
        dim=spec.dim,
        checksum=checksum,
    )
    manifest_path = out_path.with_name(out_path.name + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")
    return manifest
