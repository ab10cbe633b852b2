"""Annotation corpus loading, tokenization, and word-embedding tables.

Annotations live in JSON-lines files, one object per line:
    {"video_id": ..., "duration_s": ..., "start_s": ..., "end_s": ..., "sentence": ...}

Embedding files are plain text: token, space, then the vector components.
"""

import hashlib
import importlib.resources
import json
import string
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError

_PUNCT = string.punctuation


def load_stopwords(path=None):
    """Return the fixed stop-word set (30 words shipped as package data)."""
    if path is None:
        text = (importlib.resources.files("vtground") / "data" / "stopwords.txt").read_text()
    else:
        with open(path) as f:
            text = f.read()
    return frozenset(w for w in text.split() if w)


def stopword_hash(stopwords):
    canon = "\n".join(sorted(stopwords)).encode()
    return hashlib.sha256(canon).hexdigest()


def tokenize(sentence, stopwords=None):
    """Lowercase, split on whitespace, strip surrounding punctuation, drop
    empty pieces and stop words."""
    if stopwords is None:
        stopwords = _DEFAULT_STOPWORDS
    out = []
    for piece in sentence.lower().split():
        piece = piece.strip(_PUNCT)
        if piece and piece not in stopwords:
            out.append(piece)
    return out


_DEFAULT_STOPWORDS = load_stopwords()


@dataclass
class Sample:
    video_id: str
    duration_s: float
    start_s: float
    end_s: float
    sentence: str


def load_annotations(path, stopwords=None):
    """Load a JSONL annotation file, validating span invariants.

    Samples whose sentence tokenizes to nothing are rejected (skipped with
    a warning); malformed spans raise DataError.
    """
    samples = []
    try:
        fh = open(path)
    except OSError as e:
        raise DataError(f"cannot open annotations file {path}: {e}") from e
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                s = Sample(str(obj["video_id"]), float(obj["duration_s"]),
                           float(obj["start_s"]), float(obj["end_s"]),
                           str(obj["sentence"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DataError(f"{path}:{lineno}: malformed annotation: {e}") from e
            if not (0.0 <= s.start_s < s.end_s <= s.duration_s):
                raise DataError(f"{path}:{lineno}: invalid span "
                                f"[{s.start_s}, {s.end_s}] for duration {s.duration_s}")
            if not tokenize(s.sentence, stopwords):
                warnings.warn(f"{path}:{lineno}: sentence tokenizes to nothing, skipped")
                continue
            samples.append(s)
    return samples


def save_annotations(path, samples):
    with open(path, "w") as f:
        for s in samples:
            f.write(json.dumps({"video_id": s.video_id, "duration_s": s.duration_s,
                                "start_s": s.start_s, "end_s": s.end_s,
                                "sentence": s.sentence}) + "\n")


class EmbeddingTable:
    """token -> fixed-dimension vector, with an all-zero out-of-vocabulary row."""

    def __init__(self, vectors, dim):
        self.vectors = vectors
        self.dim = dim
        self._oov = np.zeros(dim)

    def lookup(self, token):
        return self.vectors.get(token, self._oov)

    def __contains__(self, token):
        return token in self.vectors

    def matrix(self, tokens):
        """Stack lookups for a token list into a len(tokens) x dim array."""
        return np.stack([self.lookup(t) for t in tokens]) if tokens else \
            np.zeros((0, self.dim))


def load_embeddings(path, expected_dim=None):
    vectors = {}
    dim = expected_dim
    try:
        fh = open(path)
    except OSError as e:
        raise DataError(f"cannot open embedding file {path}: {e}") from e
    with fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            token, vals = parts[0], parts[1:]
            vec = np.array([float(v) for v in vals])
            if not np.all(np.isfinite(vec)):
                raise DataError(f"{path}:{lineno}: non-finite embedding for {token!r}")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} dims, got {vec.size}")
            vectors[token] = vec
    if dim is None:
        raise DataError(f"{path}: no embeddings found")
    return EmbeddingTable(vectors, dim)


def save_embeddings(path, table):
    with open(path, "w") as f:
        for token in sorted(table.vectors):
            vec = table.vectors[token]
            f.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")
