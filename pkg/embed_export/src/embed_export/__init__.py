"""Sentence-encoder export tool writing row-aligned vector files."""

from .exporter import (
    ExportError,
    ExportManifest,
    HashEncoder,
    MODEL_SPECS,
    ModelSpec,
    export_vectors,
    normalize_text,
    read_texts,
)

__all__ = [
    "ExportError",
    "ExportManifest",
    "HashEncoder",
    "MODEL_SPECS",
    "ModelSpec",
    "export_vectors",
    "normalize_text",
    "read_texts",
]
