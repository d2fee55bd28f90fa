"""Held-out context-word prediction: full-dictionary ranking and MRR.

Every held-out (target, input) pair gets a score for each dictionary word;
the target's reciprocal rank is averaged over pairs. Tied scores share the
average of the ranks they span, which keeps the frequency baseline
well-defined on count ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import HeldOutPair
from .errors import UsageError
from .inference import (
    TOPIC_MODES,
    TokenQuery,
    TrainedModel,
    all_word_prior_vectors,
    posterior_topics,
)

METHODS = ("frequency", "prior", "posterior", "context-add")


@dataclass
class RankingResult:
    method: str
    n_pairs: int
    mrr: float
    per_pair_ranks: list[float]


class CandidateScorer:
    """Scores every dictionary word for held-out pairs under one method.

    Precomputes whatever the method needs (topic-word probabilities, prior
    vectors) once, so per-pair scoring is cheap.
    """

    def __init__(self, model: TrainedModel, method: str, context_side: str = "input"):
        if method not in METHODS:
            raise UsageError(f"unknown method {method!r}; expected one of {METHODS}")
        if context_side not in ("input", "output"):
            raise UsageError("context_side must be 'input' or 'output'")
        self.model = model
        self.method = method
        self.context_side = context_side
        self._probs: np.ndarray | None = None
        self._priors: np.ndarray | None = None
        # Topic models have no vectors to add; their context-using variant
        # is posterior scoring.
        if method == "context-add" and model.mode in TOPIC_MODES:
            self.method = "posterior"

    def _topic_word_probs(self) -> np.ndarray:
        if self._probs is None:
            self._probs = self.model.topic_word_probs()
        return self._probs

    def _prior_vectors(self) -> np.ndarray:
        if self._priors is None:
            self._priors = all_word_prior_vectors(self.model)
        return self._priors

    def scores(self, pair: HeldOutPair) -> np.ndarray:
        model = self.model
        if self.method == "frequency":
            return model.vocab.counts.astype(np.float64)
        if self.method == "prior":
            return model.theta[pair.input] @ self._topic_word_probs()
        if self.method == "posterior":
            post = posterior_topics(model, TokenQuery(input=pair.input, context=list(pair.rest)))
            return post @ self._topic_word_probs()
        # context-add: dot every output vector against the summed query vectors.
        es = model.embeddings
        if self.context_side == "input":
            priors = self._prior_vectors()
            query = priors[pair.input] + priors[pair.rest].sum(axis=0)
        else:
            query = self._prior_vectors()[pair.input] + es.out_vecs[pair.rest].sum(axis=0)
        return es.out_vecs @ query


def score_candidates(
    model: TrainedModel, method: str, pair: HeldOutPair, context_side: str = "input"
) -> np.ndarray:
    """Length-D score vector for one pair; see CandidateScorer for bulk use."""
    return CandidateScorer(model, method, context_side=context_side).scores(pair)


def rank_of_target(scores: np.ndarray, target: int) -> float:
    """1 + number of strictly better candidates; ties share their average rank."""
    s = scores[target]
    greater = int(np.count_nonzero(scores > s))
    tied = int(np.count_nonzero(scores == s))
    return greater + (tied + 1) / 2.0


def evaluate_mrr(
    model: TrainedModel,
    method: str,
    pairs: Sequence[HeldOutPair],
    context_side: str = "input",
) -> RankingResult:
    """Mean reciprocal rank of the targets under the given scoring method."""
    scorer = CandidateScorer(model, method, context_side=context_side)
    ranks = [rank_of_target(scorer.scores(p), p.target) for p in pairs]
    mrr = float(np.mean([1.0 / r for r in ranks])) if ranks else 0.0
    return RankingResult(method=method, n_pairs=len(pairs), mrr=mrr, per_pair_ranks=ranks)


def export_document_features(
    model: TrainedModel, documents: Sequence[Sequence[int]], window: int = 5
) -> np.ndarray:
    """One unit-norm posterior-mean document vector per document, (n_docs, d)."""
    from .inference import document_vector, queries_for_document

    if len(documents) == 0:
        return np.zeros((0, model.dim))
    rows = [
        document_vector(model, queries_for_document(doc, window)) for doc in documents
    ]
    return np.vstack(rows)


def write_mrr_report(results: Sequence[RankingResult], path) -> None:
    """TSV report: method, n_pairs, mrr."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("method\tn_pairs\tmrr\n")
        for r in results:
            f.write(f"{r.method}\t{r.n_pairs}\t{r.mrr:.6f}\n")


def write_rank_dump(result: RankingResult, path) -> None:
    """Optional per-pair rank dump: pair index and rank."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("pair\trank\n")
        for i, r in enumerate(result.per_pair_ranks):
            f.write(f"{i}\t{r:g}\n")
