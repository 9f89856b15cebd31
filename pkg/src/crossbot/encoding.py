"""Deterministic text encoding via signed feature hashing.

The default encoder hashes lowercase word unigrams and character 3-grams
into a fixed number of buckets with a sign bit, then L2-normalizes.  Hashes
come from BLAKE2b so the mapping is stable across processes and platforms
(Python's builtin ``hash`` is salted per process and would not be).
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EncodingError
from .instruction import InstructionDoc, doc_text

DEFAULT_DIM = 4096

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@lru_cache(maxsize=1 << 20)
def _token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _tokens(text: str):
    low = text.lower()
    for word in _WORD_RE.findall(low):
        yield "w:" + word
    for i in range(len(low) - 2):
        yield "c:" + low[i : i + 3]


class HashingTextEncoder(BaseEstimator, TransformerMixin):
    """Stateless hashing encoder with unit-norm output rows.

    Parameters
    ----------
    n_features : int
        Number of hash buckets (output dimensionality).
    dtype : str
        Output dtype, "float32" or "float64".
    """

    def __init__(self, n_features: int = DEFAULT_DIM, dtype: str = "float64"):
        self.n_features = n_features
        self.dtype = dtype

    def fit(self, X=None, y=None):
        return self

    def encode(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EncodingError("cannot encode an empty document")
        vec = np.zeros(self.n_features, dtype=np.float64)
        hit = False
        for token in _tokens(text):
            h = _token_hash(token)
            sign = 1.0 if h & (1 << 63) else -1.0
            vec[(h & ((1 << 63) - 1)) % self.n_features] += sign
            hit = True
        if not hit:
            raise EncodingError("document produced no tokens")
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # signed collisions cancelled everything; fall back to unsigned
            for token in _tokens(text):
                h = _token_hash(token)
                vec[(h & ((1 << 63) - 1)) % self.n_features] += 1.0
            norm = np.linalg.norm(vec)
        return (vec / norm).astype(self.dtype)

    def transform(self, X: Sequence) -> np.ndarray:
        rows = []
        for item in X:
            text = doc_text(item) if isinstance(item, InstructionDoc) else str(item)
            rows.append(self.encode(text))
        if not rows:
            return np.zeros((0, self.n_features), dtype=self.dtype)
        return np.stack(rows)


def encode_corpus(docs: Sequence[InstructionDoc], encoder: Optional[HashingTextEncoder] = None):
    """Encode a corpus into (X, y, domains); missing domain labels become -1."""
    encoder = encoder or HashingTextEncoder()
    X = encoder.transform(docs)
    y = np.array([doc.label for doc in docs], dtype=np.int64)
    domains = np.array(
        [-1 if doc.domain_id is None else doc.domain_id for doc in docs], dtype=np.int64
    )
    return X, y, domains
