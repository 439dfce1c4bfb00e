"""Bag-of-words featurization of SQL statements.

Tokens are lowercase runs of ``[a-z0-9_.$]`` so dotted identifiers such as
``db.table`` stay whole. Numeric literals collapse to ``<num>`` and
single-quoted string literals to ``<str>``.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, EmptyVocabulary, MissingIdf

NUM = "<num>"
STR = "<str>"

_TOKEN_RE = re.compile(
    r"""
      (?P<str>'(?:[^']|'')*'?)        # string literal, '' escapes a quote
    | "(?P<dq>[^"]*)"?                # quoted identifier
    | `(?P<bq>[^`]*)`?                # backquoted identifier
    | (?P<run>[a-z0-9_.$]+)
    """,
    re.VERBOSE,
)
_NUMERIC_RE = re.compile(r"^(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?$")
_RUN_RE = re.compile(r"[a-z0-9_.$]+")


def _word(run: str):
    if _NUMERIC_RE.match(run):
        return NUM
    run = run.strip(".")
    return run or None


def tokenize(sql: str) -> list[str]:
    tokens = []
    for m in _TOKEN_RE.finditer(sql.lower()):
        kind = m.lastgroup
        if kind == "str":
            tokens.append(STR)
        elif kind == "run":
            w = _word(m.group("run"))
            if w:
                tokens.append(w)
        else:
            for run in _RUN_RE.findall(m.group(kind)):
                w = _word(run)
                if w:
                    tokens.append(w)
    return tokens


@dataclass
class Vocabulary:
    tokens: list[str]
    doc_freq: list[int]
    n_docs: int
    idf: list[float] | None = None
    token_to_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.token_to_index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    @property
    def dimension(self) -> int:
        return len(self.tokens)

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens), "doc_freq": list(self.doc_freq), "n_docs": self.n_docs, "idf": self.idf}

    @classmethod
    def from_dict(cls, d) -> "Vocabulary":
        return cls(list(d["tokens"]), [int(x) for x in d["doc_freq"]], int(d["n_docs"]), d.get("idf"))


@dataclass(frozen=True, eq=False)
class SparseVector:
    dimension: int
    indices: np.ndarray
    values: np.ndarray

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def __len__(self):
        return len(self.indices)

    def __eq__(self, other):
        return (
            isinstance(other, SparseVector)
            and self.dimension == other.dimension
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out

    @classmethod
    def from_entries(cls, dimension, entries) -> "SparseVector":
        entries = sorted(entries)
        idx = np.array([i for i, _ in entries], dtype=np.int64)
        val = np.array([v for _, v in entries], dtype=np.float64)
        if len(idx) and (idx[-1] >= dimension or np.any(np.diff(idx) <= 0)):
            raise ValueError("indices must be unique and below dimension")
        return cls(dimension, idx, val)


def build_vocabulary(corpus, min_df: int = 2, max_features: int = 50_000) -> Vocabulary:
    if not corpus:
        raise EmptyVocabulary("cannot build a vocabulary from an empty corpus")
    df = Counter()
    for doc in corpus:
        df.update(set(doc))
    kept = [t for t, c in df.items() if c >= min_df]
    if not kept:
        raise EmptyVocabulary(f"no token occurs in at least {min_df} documents")
    if len(kept) > max_features:
        kept = sorted(kept, key=lambda t: (-df[t], t))[:max_features]
    kept.sort()
    return Vocabulary(kept, [df[t] for t in kept], len(corpus))


def fit_idf(vocab: Vocabulary) -> Vocabulary:
    """Return a copy of ``vocab`` with smoothed idf weights.

    idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1
    """
    idf = [math.log((1 + vocab.n_docs) / (1 + df)) + 1.0 for df in vocab.doc_freq]
    return Vocabulary(list(vocab.tokens), list(vocab.doc_freq), vocab.n_docs, idf)


def _counts(tokens, vocab):
    index = vocab.token_to_index
    c = Counter(index[t] for t in tokens if t in index)
    idx = np.array(sorted(c), dtype=np.int64)
    val = np.array([c[i] for i in idx.tolist()], dtype=np.float64)
    return idx, val


def vectorize_count(tokens, vocab: Vocabulary) -> SparseVector:
    idx, val = _counts(tokens, vocab)
    return SparseVector(vocab.dimension, idx, val)


def vectorize_tfidf(tokens, vocab: Vocabulary) -> SparseVector:
    if vocab.idf is None:
        raise MissingIdf("vocabulary has no idf weights; call fit_idf first")
    idx, val = _counts(tokens, vocab)
    if len(idx):
        val = val * np.asarray(vocab.idf)[idx]
        norm = math.sqrt(float(np.dot(val, val)))
        if norm > 0:
            val = val / norm
    return SparseVector(vocab.dimension, idx, val)


VECTORIZERS = {"count": vectorize_count, "tfidf": vectorize_tfidf}


def vectorize(tokens, vocab: Vocabulary, kind: str) -> SparseVector:
    return VECTORIZERS[kind](tokens, vocab)


def to_csr(vectors, dimension=None) -> sp.csr_matrix:
    """Stack sparse vectors into a CSR matrix."""
    vectors = list(vectors)
    if dimension is None:
        if not vectors:
            raise ValueError("need a dimension for an empty batch")
        dimension = vectors[0].dimension
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        if v.dimension != dimension:
            raise DimensionMismatch(f"vector {i} has dimension {v.dimension}, expected {dimension}")
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dimension))


def featurize_queries(queries, vocab: Vocabulary, kind: str) -> sp.csr_matrix:
    fn = VECTORIZERS[kind]
    return to_csr((fn(tokenize(q), vocab) for q in queries), vocab.dimension)
