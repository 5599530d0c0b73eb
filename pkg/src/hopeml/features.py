"""Featurization: TF-IDF, pooled word vectors, precomputed sentence vectors, PCA.

Fitted artifacts (Vocabulary, EmbeddingTable, PcaModel) are immutable after
construction; transforms are pure functions of artifact + corpus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from hopeml.corpus import LabeledCorpus
from hopeml.textproc import tokenize


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-per-document numeric matrix; sparse for TF-IDF, dense otherwise."""

    data: np.ndarray | sp.csr_matrix
    row_ids: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise FeatureError("feature data must be 2-dimensional")
        if self.data.shape[0] != len(self.row_ids):
            raise FeatureError("row_ids length must equal the number of rows")
        values = self.data.data if sp.issparse(self.data) else self.data
        if values.size and not np.isfinite(values).all():
            raise FeatureError("feature matrix contains NaN or infinity")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.data):
            return np.asarray(self.data.todense(), dtype=np.float64)
        return np.asarray(self.data, dtype=np.float64)


def matrix_from_rows(rows: np.ndarray, row_ids=None) -> FeatureMatrix:
    rows = np.asarray(rows, dtype=np.float64)
    if row_ids is None:
        row_ids = np.arange(rows.shape[0])
    return FeatureMatrix(data=rows, row_ids=np.asarray(row_ids))


# ---------------------------------------------------------------------------
# TF-IDF


@dataclass(frozen=True)
class Vocabulary:
    """Token -> column index map plus the document frequencies behind idf."""

    index: dict[str, int]
    document_frequency: dict[str, int]
    n_docs: int

    def __post_init__(self):
        if sorted(self.index.values()) != list(range(len(self.index))):
            raise FeatureError("vocabulary indices must be dense 0..V-1")
        for token, df in self.document_frequency.items():
            if not 1 <= df <= self.n_docs:
                raise FeatureError(f"document frequency of {token!r} out of range: {df}")

    def __len__(self) -> int:
        return len(self.index)

    def idf(self) -> np.ndarray:
        """Smoothed idf per column: ln((1+N)/(1+df)) + 1."""
        out = np.zeros(len(self.index))
        for token, col in self.index.items():
            out[col] = np.log((1 + self.n_docs) / (1 + self.document_frequency[token])) + 1.0
        return out

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "document_frequency": self.document_frequency,
            "n_docs": self.n_docs,
        }


def vocabulary_from_dict(data: dict) -> Vocabulary:
    return Vocabulary(
        index={t: int(i) for t, i in data["index"].items()},
        document_frequency={t: int(v) for t, v in data["document_frequency"].items()},
        n_docs=int(data["n_docs"]),
    )


def tfidf_fit(corpus: LabeledCorpus) -> Vocabulary:
    """Build a vocabulary over every token in the corpus with exact df counts.

    Column order is alphabetical, so the fitted artifact does not depend on
    anything but the set of documents.
    """
    if len(corpus) == 0:
        raise FeatureError("cannot fit TF-IDF on an empty corpus")
    df: dict[str, int] = {}
    for doc in corpus:
        for token in set(tokenize(doc.text)):
            df[token] = df.get(token, 0) + 1
    if not df:
        raise FeatureError("corpus has zero tokens after normalization")
    index = {token: i for i, token in enumerate(sorted(df))}
    return Vocabulary(index=index, document_frequency=df, n_docs=len(corpus))


def tfidf_rows(vocab: Vocabulary, texts) -> sp.csr_matrix:
    """Raw term count x smoothed idf, each row L2-normalized.

    Unseen tokens are ignored; a text with no in-vocabulary tokens
    becomes a zero row.
    """
    idf = vocab.idf()
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    n_texts = 0
    for text in texts:
        n_texts += 1
        counts: dict[int, int] = {}
        for token in tokenize(text):
            col = vocab.index.get(token)
            if col is not None:
                counts[col] = counts.get(col, 0) + 1
        row = sorted(counts)
        vec = np.array([counts[c] * idf[c] for c in row])
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        indices.extend(row)
        values.extend(vec)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(values), np.array(indices, dtype=np.int32), np.array(indptr, dtype=np.int32)),
        shape=(n_texts, len(vocab)),
    )


def tfidf_transform(vocab: Vocabulary, corpus: LabeledCorpus) -> FeatureMatrix:
    data = tfidf_rows(vocab, corpus.texts())
    return FeatureMatrix(data=data, row_ids=np.array([d.id for d in corpus]))


# ---------------------------------------------------------------------------
# Word-vector tables


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    source_name: str = ""

    def __post_init__(self):
        if self.dim <= 0:
            raise FeatureError("embedding dimension must be positive")
        for token, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise FeatureError(f"vector for {token!r} has length {vec.shape}, expected {self.dim}")

    def __len__(self) -> int:
        return len(self.vectors)


def load_embedding_table(path, expected_dim: int | None = None, source_name: str = "") -> EmbeddingTable:
    """Read word vectors in text format: optional `count dim` header, then
    `token v1 .. vD` per line. Duplicate tokens keep the first occurrence.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\r\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header line
                except ValueError:
                    pass
            token = parts[0]
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise FeatureError(f"{path}:{lineno}: non-numeric vector component")
            if dim is None:
                dim = vec.size
                if dim == 0:
                    raise FeatureError(f"{path}:{lineno}: vector line has no components")
            elif vec.size != dim:
                raise FeatureError(f"{path}:{lineno}: ragged row (got {vec.size} components, expected {dim})")
            if token not in vectors:
                vectors[token] = vec
    if dim is None:
        raise FeatureError(f"{path}: no vectors found")
    if expected_dim is not None and dim != expected_dim:
        raise FeatureError(f"{path}: dimension {dim} does not match expected {expected_dim}")
    return EmbeddingTable(dim=dim, vectors=vectors, source_name=source_name)


def pool_document(table: EmbeddingTable, tokens) -> np.ndarray:
    """Arithmetic mean of the vectors of in-table tokens.

    Out-of-vocabulary tokens are skipped; an empty or all-OOV document pools
    to the zero vector.
    """
    found = [table.vectors[t] for t in tokens if t in table.vectors]
    if not found:
        return np.zeros(table.dim)
    return np.mean(found, axis=0)


def pool_corpus(table: EmbeddingTable, corpus: LabeledCorpus) -> FeatureMatrix:
    rows = np.stack([pool_document(table, tokenize(d.text)) for d in corpus])
    return FeatureMatrix(data=rows, row_ids=np.array([d.id for d in corpus]))


# ---------------------------------------------------------------------------
# Precomputed sentence vectors


def load_precomputed_vectors(path, corpus: LabeledCorpus) -> FeatureMatrix:
    """Read an `N D` header plus `row_id v1 .. vD` lines and align rows to
    corpus order regardless of file line order.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FeatureError(f"{path}: expected header `N D`")
        try:
            n, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FeatureError(f"{path}: expected integer header `N D`")
        if n != len(corpus):
            raise FeatureError(f"{path}: header says {n} rows but corpus has {len(corpus)}")
        rows = np.full((n, dim), np.nan)
        seen = np.zeros(n, dtype=bool)
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            try:
                row_id = int(parts[0])
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise FeatureError(f"{path}:{lineno}: malformed vector line")
            if vec.size != dim:
                raise FeatureError(f"{path}:{lineno}: got {vec.size} components, expected {dim}")
            if not 0 <= row_id < n:
                raise FeatureError(f"{path}:{lineno}: row_id {row_id} out of range 0..{n - 1}")
            if seen[row_id]:
                raise FeatureError(f"{path}:{lineno}: duplicate row_id {row_id}")
            seen[row_id] = True
            rows[row_id] = vec
    if not seen.all():
        missing = np.flatnonzero(~seen)
        raise FeatureError(f"{path}: missing row_ids {missing[:10].tolist()}")
    return FeatureMatrix(data=rows, row_ids=np.arange(n))


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # K x D, row-orthonormal
    explained_variance: np.ndarray  # K, non-increasing

    def __post_init__(self):
        k = self.components.shape[0]
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(k), atol=1e-8):
            raise FeatureError("PCA components are not row-orthonormal")
        if np.any(np.diff(self.explained_variance) > 1e-12):
            raise FeatureError("explained_variance must be non-increasing")

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }


def pca_model_from_dict(data: dict) -> PcaModel:
    return PcaModel(
        mean=np.asarray(data["mean"], dtype=np.float64),
        components=np.asarray(data["components"], dtype=np.float64),
        explained_variance=np.asarray(data["explained_variance"], dtype=np.float64),
    )


def _fix_component_signs(components: np.ndarray) -> np.ndarray:
    # Flip each component so its largest-magnitude entry is positive.
    flipped = components.copy()
    for i in range(flipped.shape[0]):
        j = int(np.argmax(np.abs(flipped[i])))
        if flipped[i, j] < 0:
            flipped[i] = -flipped[i]
    return flipped


def pca_fit(X: FeatureMatrix, k: int | float) -> PcaModel:
    """Principal components of the sample covariance (divisor n-1).

    ``k`` is either an integer component count or a variance fraction in
    (0, 1]; a fraction keeps the smallest K whose cumulative explained
    variance ratio reaches it. Eigenvectors come from the covariance matrix
    when D <= n and from the Gram matrix otherwise, same contract either way.
    """
    dense = X.dense()
    n, d = dense.shape
    if n < 2:
        raise FeatureError("PCA needs at least 2 rows")
    max_k = min(n - 1, d)
    mean = dense.mean(axis=0)
    centered = dense - mean
    total_variance = float(np.sum(centered * centered) / (n - 1))

    if isinstance(k, bool) or not isinstance(k, (int, float, np.integer, np.floating)):
        raise FeatureError(f"k must be an integer count or fraction, got {k!r}")
    fractional = isinstance(k, (float, np.floating)) and 0.0 < float(k) < 1.0
    if not fractional:
        k_int = int(k)
        if isinstance(k, (float, np.floating)) and float(k) != 1.0 and k_int != k:
            raise FeatureError(f"fractional k must lie in (0, 1], got {k}")
        if k_int == 1 and isinstance(k, (float, np.floating)):
            # k=1.0 means "keep all the variance"
            fractional = True
            k = 1.0
        elif not 1 <= k_int <= max_k:
            raise FeatureError(f"k={k_int} out of range 1..{max_k}")
    if fractional and total_variance == 0.0:
        raise FeatureError("cannot pick a variance fraction of zero-variance data")

    if d <= n:
        cov = centered.T @ centered / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1][:max_k]
        eigvals = eigvals[order]
        components = eigvecs[:, order].T
    else:
        # Gram trick: eigenvectors of X Xt / (n-1) map to covariance
        # eigenvectors via Xt u / sqrt((n-1) lambda).
        gram = centered @ centered.T / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1][:max_k]
        eigvals = eigvals[order]
        keep = eigvals > 1e-12
        eigvals = np.where(keep, eigvals, 0.0)
        scale = np.sqrt(np.where(keep, eigvals, 1.0) * (n - 1))
        components = (centered.T @ eigvecs[:, order] / scale).T
        components[~keep] = 0.0
        norms = np.linalg.norm(components, axis=1)
        components[keep] /= norms[keep, None]

    eigvals = np.clip(eigvals, 0.0, None)

    if fractional:
        ratios = np.cumsum(eigvals) / total_variance
        k_int = int(np.searchsorted(ratios, float(k) - 1e-12) + 1)
        k_int = min(k_int, max_k)

    components = components[:k_int]
    eigvals = eigvals[:k_int]
    if components.shape[0] and np.any(np.linalg.norm(components, axis=1) < 0.5):
        raise FeatureError(f"rank of data too small for k={k_int} components")
    return PcaModel(
        mean=mean,
        components=_fix_component_signs(components),
        explained_variance=eigvals,
    )


def pca_transform(model: PcaModel, X: FeatureMatrix) -> FeatureMatrix:
    """Project rows onto the principal axes: (x - mean) @ components.T."""
    if X.n_cols != model.mean.shape[0]:
        raise FeatureError(f"input has {X.n_cols} columns, PCA model expects {model.mean.shape[0]}")
    projected = (X.dense() - model.mean) @ model.components.T
    return FeatureMatrix(data=projected, row_ids=X.row_ids.copy())


def pca_reconstruct(model: PcaModel, Z: FeatureMatrix) -> np.ndarray:
    """Inverse map from component space back to the original coordinates."""
    return model.mean + Z.dense() @ model.components
