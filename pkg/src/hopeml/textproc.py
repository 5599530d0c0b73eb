"""Deterministic text normalization and whitespace tokenization.

Every featurizer and augmenter goes through these two functions, so the
rules live in exactly one place: lowercase, strip punctuation, collapse
whitespace, split on spaces.
"""

import string

# ASCII punctuation minus the angle brackets so placeholder tokens such as
# <user> survive normalization.
DEFAULT_STRIP_CHARS = "".join(c for c in string.punctuation if c not in "<>")

_STRIP_TABLE = str.maketrans("", "", DEFAULT_STRIP_CHARS)


def normalize(text: str, strip_chars: str | None = None) -> str:
    """Lowercase, remove punctuation, and collapse runs of whitespace.

    Non-ASCII characters pass through untouched (apart from lowercasing),
    so non-English rows survive a round trip.
    """
    table = _STRIP_TABLE if strip_chars is None else str.maketrans("", "", strip_chars)
    text = text.lower().translate(table)
    return " ".join(text.split())


def tokenize(text: str, strip_chars: str | None = None) -> list[str]:
    """Normalize then split on spaces. Empty input yields an empty list."""
    normalized = normalize(text, strip_chars)
    if not normalized:
        return []
    return normalized.split(" ")
