"""Test-time queries: posterior topics, mean vectors, neighbors, composition.

A trained model is immutable once loaded; the per-topic softmax normalizers
are computed once and cached, after which every query costs O(K * |context|).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .corpus import Vocabulary
from .embeddings import EmbeddingState
from .errors import DataError, UsageError

Mode = Literal["MMSG", "MMSGTM", "SG", "SGTM"]

MODES = ("MMSG", "MMSGTM", "SG", "SGTM")
VECTOR_MODES = ("MMSG", "SG")
TOPIC_MODES = ("MMSGTM", "SGTM")
DEGENERATE_MODES = ("SG", "SGTM")


class ZeroVectorError(DataError):
    """A query vector cancelled to (numerically) zero."""


@dataclass
class TokenQuery:
    """An input word occurrence together with its (possibly empty) context."""

    input: int
    context: list[int] = field(default_factory=list)


@dataclass
class TrainedModel:
    vocab: Vocabulary
    theta: np.ndarray
    mode: str
    phi: np.ndarray | None = None
    embeddings: EmbeddingState | None = None
    _log_z: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        d_vocab = len(self.vocab)
        if self.theta.shape[0] != d_vocab:
            raise ValueError("theta must have one row per dictionary word")
        k = self.theta.shape[1]
        if self.mode in VECTOR_MODES:
            if self.embeddings is None:
                raise ValueError(f"mode {self.mode} requires embeddings")
            if self.embeddings.n_topics != k or self.embeddings.n_words != d_vocab:
                raise ValueError("embedding shapes inconsistent with theta/vocabulary")
        if self.mode in TOPIC_MODES:
            if self.phi is None:
                raise ValueError(f"mode {self.mode} requires phi")
            if self.phi.shape != (k, d_vocab):
                raise ValueError("phi shape inconsistent with theta/vocabulary")
        if self.mode in DEGENERATE_MODES and k != d_vocab:
            raise ValueError(f"mode {self.mode} requires one topic per word (K = D)")

    @property
    def n_topics(self) -> int:
        return self.theta.shape[1]

    @property
    def dim(self) -> int:
        if self.embeddings is None:
            raise DataError(f"model mode {self.mode} carries no vectors")
        return self.embeddings.dim

    def log_z(self) -> np.ndarray:
        """Cached per-topic softmax log-normalizers (vector modes)."""
        if self._log_z is None:
            from .embeddings import log_partition

            if self.embeddings is None:
                raise DataError(f"model mode {self.mode} carries no vectors")
            self._log_z = log_partition(self.embeddings)
        return self._log_z

    def log_word_given_topics(self, word: int) -> np.ndarray:
        """log p(word | k) for all topics k."""
        if self.mode in TOPIC_MODES:
            with np.errstate(divide="ignore"):
                return np.log(self.phi[:, word])
        es = self.embeddings
        return es.topic_vecs @ es.out_vecs[word] + es.bias[word] - self.log_z()

    def topic_word_probs(self) -> np.ndarray:
        """Dense (K, D) matrix of p(v | k); materialized for bulk scoring."""
        if self.mode in TOPIC_MODES:
            return self.phi
        es = self.embeddings
        scores = es.topic_vecs @ es.out_vecs.T + es.bias[None, :]
        scores -= scores.max(axis=1, keepdims=True)
        np.exp(scores, out=scores)
        scores /= scores.sum(axis=1, keepdims=True)
        return scores


def posterior_topics(model: TrainedModel, q: TokenQuery) -> np.ndarray:
    """p(z = k | input word, context): theta row reweighted by the context words.

    Accumulated in log space; with an empty context this is exactly the
    theta row (the prior).
    """
    theta_row = model.theta[q.input]
    if not q.context:
        return theta_row.copy()
    with np.errstate(divide="ignore"):
        log_p = np.log(theta_row)
    for wc in q.context:
        log_p = log_p + model.log_word_given_topics(wc)
    m = log_p.max()
    if not np.isfinite(m):
        raise DataError("posterior over topics vanished for every topic")
    p = np.exp(log_p - m)
    return p / p.sum()


def word_prior_vector(model: TrainedModel, word: int) -> np.ndarray:
    """Theta-weighted convex combination of topic vectors for a word type."""
    es = _require_embeddings(model)
    if model.mode in DEGENERATE_MODES:
        return es.topic_vecs[word].copy()
    return model.theta[word] @ es.topic_vecs


def token_posterior_vector(model: TrainedModel, q: TokenQuery) -> np.ndarray:
    """Posterior-weighted combination of topic vectors for a word token."""
    es = _require_embeddings(model)
    return posterior_topics(model, q) @ es.topic_vecs


def document_vector(model: TrainedModel, tokens: Sequence[TokenQuery]) -> np.ndarray:
    """Sum of the tokens' posterior mean vectors, normalized to unit length."""
    if len(tokens) == 0:
        raise ZeroVectorError("cannot embed an empty document")
    es = _require_embeddings(model)
    total = np.zeros(es.dim)
    for q in tokens:
        total += token_posterior_vector(model, q)
    return unit(total)


def queries_for_document(token_ids: Sequence[int], window: int) -> list[TokenQuery]:
    """One query per token with its sliding-window context (may be empty)."""
    n = len(token_ids)
    out = []
    for i in range(n):
        lo, hi = max(0, i - window), min(n, i + window + 1)
        ctx = [token_ids[j] for j in range(lo, hi) if j != i]
        out.append(TokenQuery(input=token_ids[i], context=ctx))
    return out


def unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ZeroVectorError("vector has (numerically) zero norm")
    return v / norm


def all_word_prior_vectors(model: TrainedModel) -> np.ndarray:
    """Prior mean vectors for every dictionary word, (D, d)."""
    es = _require_embeddings(model)
    if model.mode in DEGENERATE_MODES:
        return es.topic_vecs
    return model.theta @ es.topic_vecs


def nearest(
    model: TrainedModel,
    query: np.ndarray,
    pool: str = "topics",
    n: int = 10,
    vectors: np.ndarray | None = None,
) -> list[tuple[int, float]]:
    """Top-n pool entries by cosine similarity, ties broken by id ascending.

    ``pool`` is "topics", "words", or "documents"; the documents pool needs
    an explicit ``vectors`` matrix (one row per document).
    """
    if pool == "topics":
        mat = _require_embeddings(model).topic_vecs
    elif pool == "words":
        mat = all_word_prior_vectors(model)
    elif pool == "documents":
        if vectors is None:
            raise UsageError("documents pool requires an explicit vector matrix")
        mat = vectors
    else:
        raise UsageError(f"unknown pool {pool!r}")
    qn = float(np.linalg.norm(query))
    if qn < 1e-12:
        raise ZeroVectorError("query vector has zero norm")
    norms = np.linalg.norm(mat, axis=1)
    safe = np.where(norms < 1e-12, 1.0, norms)
    sims = (mat @ query) / (safe * qn)
    sims[norms < 1e-12] = 0.0
    order = np.lexsort((np.arange(len(sims)), -sims))[:n]
    return [(int(i), float(sims[i])) for i in order]


def compose(
    model: TrainedModel,
    plus: Sequence[int],
    minus: Sequence[int] = (),
    plus_topics: Sequence[int] = (),
    minus_topics: Sequence[int] = (),
) -> np.ndarray:
    """Additive composition of prior mean word vectors, unit-normalized.

    Raw topic vectors may be mixed in; only the final sum is normalized.
    """
    es = _require_embeddings(model)
    total = np.zeros(es.dim)
    for w in plus:
        total += word_prior_vector(model, w)
    for w in minus:
        total -= word_prior_vector(model, w)
    for k in plus_topics:
        total += es.topic_vecs[k]
    for k in minus_topics:
        total -= es.topic_vecs[k]
    return unit(total)


def _require_embeddings(model: TrainedModel) -> EmbeddingState:
    if model.embeddings is None:
        raise DataError(
            f"operation needs vectors but mode {model.mode} is a pure topic model"
        )
    return model.embeddings
