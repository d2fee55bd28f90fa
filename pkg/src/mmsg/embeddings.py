"""Noise-contrastive training of topic vectors, output word vectors and biases.

With topic assignments imputed, learning reduces to fitting the log-bilinear
model score(k, v) = out_vecs[v] . topic_vecs[k] + bias[v] to the (topic,
context word) pairs. NCE sidesteps the softmax partition function by logistic
discrimination of data pairs from noise words, using the unnormalized score
as the model log-likelihood.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Vocabulary

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingState:
    """Topic vectors (K, d), output word vectors (D, d) and biases (D,)."""

    topic_vecs: np.ndarray
    out_vecs: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.topic_vecs.ndim != 2 or self.out_vecs.ndim != 2:
            raise ValueError("vector tables must be 2-d")
        if self.topic_vecs.shape[1] != self.out_vecs.shape[1]:
            raise ValueError("topic and output vectors must share a dimension")
        if self.bias.shape != (self.out_vecs.shape[0],):
            raise ValueError("one bias per output word required")
        if not (
            np.all(np.isfinite(self.topic_vecs))
            and np.all(np.isfinite(self.out_vecs))
            and np.all(np.isfinite(self.bias))
        ):
            raise ValueError("embedding parameters must be finite")

    @property
    def n_topics(self) -> int:
        return self.topic_vecs.shape[0]

    @property
    def n_words(self) -> int:
        return self.out_vecs.shape[0]

    @property
    def dim(self) -> int:
        return self.topic_vecs.shape[1]

    @classmethod
    def initialize(
        cls, n_topics: int, dim: int, counts: np.ndarray, rng: np.random.Generator
    ) -> "EmbeddingState":
        """Small uniform topic vectors, zero output vectors, log-frequency biases.

        The bias start makes the unnormalized scores roughly self-normalized
        from the first step.
        """
        counts = np.asarray(counts, dtype=np.float64)
        bound = 0.5 / dim
        return cls(
            topic_vecs=rng.uniform(-bound, bound, size=(n_topics, dim)),
            out_vecs=np.zeros((len(counts), dim)),
            bias=np.log(counts / counts.sum()),
        )


@dataclass
class NoiseDistribution:
    """Full-support distribution over the dictionary used for noise draws."""

    probs: np.ndarray
    exponent: float
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if np.any(self.probs <= 0):
            raise ValueError("noise distribution must have full support")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("noise distribution must sum to 1")
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0
        self._log_probs = np.log(self.probs)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.searchsorted(self._cum, rng.random(size), side="right")


def build_noise(vocab: Vocabulary, exponent: float = 1.0) -> NoiseDistribution:
    """Unigram noise distribution, counts raised to ``exponent`` then normalized."""
    w = vocab.counts.astype(np.float64) ** exponent
    return NoiseDistribution(probs=w / w.sum(), exponent=exponent)


@dataclass
class TrainConfig:
    """Stochastic gradient settings for the NCE phase."""

    steps: int
    dim: int = 128
    k_noise: int = 5
    minibatch: int = 128
    learning_rate: float = 0.025
    final_learning_rate: float = 1e-4
    seed: int = 0
    log_every: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.k_noise < 1:
            raise ValueError("k_noise must be >= 1")
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def lr_at(self, step: int) -> float:
        if self.steps <= 1:
            return self.learning_rate
        frac = step / (self.steps - 1) if self.steps > 1 else 1.0
        frac = min(max(frac, 0.0), 1.0)
        return self.learning_rate + (self.final_learning_rate - self.learning_rate) * frac


def score(es: EmbeddingState, topic: int, word: int) -> float:
    """Unnormalized log-probability of ``word`` under ``topic``."""
    return float(es.out_vecs[word] @ es.topic_vecs[topic] + es.bias[word])


def topic_scores(es: EmbeddingState, topic: int) -> np.ndarray:
    """Scores of every dictionary word under one topic."""
    return es.out_vecs @ es.topic_vecs[topic] + es.bias


def log_partition(es: EmbeddingState) -> np.ndarray:
    """log sum_v exp(score(k, v)) for every topic; O(K * D)."""
    out = np.empty(es.n_topics)
    for k in range(es.n_topics):
        s = topic_scores(es, k)
        m = s.max()
        out[k] = m + np.log(np.exp(s - m).sum())
    return out


def context_word_logprob(es: EmbeddingState, topic: int, word: int) -> float:
    """Normalized log p(word | topic); evaluation/diagnostic path only."""
    s = topic_scores(es, topic)
    m = s.max()
    return float(s[word] - m - np.log(np.exp(s - m).sum()))


def cdll(
    es: EmbeddingState,
    theta: np.ndarray,
    instances: Sequence,
    z_hat: np.ndarray,
) -> float:
    """Complete-data log-likelihood of the imputed assignments and contexts.

    A zero theta entry at an assigned topic makes the result -inf; that is
    reported as-is and flagged in the log.
    """
    if len(instances) == 0:
        return 0.0
    log_z = log_partition(es)
    total = 0.0
    flagged = False
    for inst, k in zip(instances, z_hat):
        t = theta[inst.input, k]
        if t <= 0.0:
            if not flagged:
                logger.warning(
                    "theta[%d, %d] is zero at an assigned topic; CDLL is -inf",
                    inst.input,
                    int(k),
                )
                flagged = True
            return float("-inf")
        total += np.log(t)
        for wc in inst.context:
            total += score(es, int(k), wc) - log_z[int(k)]
    return float(total)


def nce_logit(es: EmbeddingState, noise: NoiseDistribution, topic: int, word: int) -> float:
    """Log-likelihood gap between the (unnormalized) model and the noise."""
    return score(es, topic, word) - float(np.log(noise.probs[word]))


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # log sigma(x) = -softplus(-x), stable on both tails.
    return -np.logaddexp(0.0, -x)


def nce_objective_and_grads(
    es: EmbeddingState,
    noise: NoiseDistribution,
    data_topics: np.ndarray,
    data_words: np.ndarray,
    noise_topics: np.ndarray,
    noise_words: np.ndarray,
):
    """Objective and gradients for fixed data pairs and fixed noise draws.

    Returns (J, (uniq_topics, g_topic), (uniq_words, g_out, g_bias)) where
    J = sum log sigma(G_data) + sum log(1 - sigma(G_noise)), G the logit gap.
    Gradients are reported only for rows the batch touches.
    """
    topics = np.concatenate([data_topics, noise_topics])
    words = np.concatenate([data_words, noise_words])
    tv = es.topic_vecs[topics]
    ov = es.out_vecs[words]
    g = np.einsum("ij,ij->i", tv, ov) + es.bias[words] - noise._log_probs[words]
    sig = 1.0 / (1.0 + np.exp(-g))

    n_data = len(data_topics)
    obj = float(_log_sigmoid(g[:n_data]).sum() + _log_sigmoid(-g[n_data:]).sum())

    coef = np.empty(len(g))
    coef[:n_data] = 1.0 - sig[:n_data]
    coef[n_data:] = -sig[n_data:]

    uniq_t, g_topic = _segment_sum(topics, coef[:, None] * ov)
    uniq_w, g_out = _segment_sum(words, coef[:, None] * tv)
    g_bias = np.bincount(
        np.searchsorted(uniq_w, words), weights=coef, minlength=len(uniq_w)
    )

    return obj, (uniq_t, g_topic), (uniq_w, g_out, g_bias)


def _segment_sum(keys: np.ndarray, values: np.ndarray):
    """Sum ``values`` rows grouped by key; returns (sorted unique keys, sums).

    reduceat wins when the batch hits few distinct keys (topics); its
    per-segment overhead loses to a scattered add when keys are mostly
    unique (words).
    """
    uniq, inv = np.unique(keys, return_inverse=True)
    if len(uniq) * 4 <= len(keys):
        order = np.argsort(inv, kind="stable")
        starts = np.searchsorted(inv[order], np.arange(len(uniq)))
        return uniq, np.add.reduceat(values[order], starts, axis=0)
    out = np.zeros((len(uniq), values.shape[1]))
    np.add.at(out, inv, values)
    return uniq, out


def nce_step(
    es: EmbeddingState,
    batch_topics: np.ndarray,
    batch_words: np.ndarray,
    noise: NoiseDistribution,
    cfg: TrainConfig,
    rng: np.random.Generator,
    lr: float | None = None,
) -> tuple[float, bool]:
    """One ascent step on a minibatch of (topic, context word) pairs.

    Draws cfg.k_noise noise words per data pair (keeping the pair's topic),
    then applies the batch gradient in place. Returns (objective, applied);
    a non-finite objective or gradient skips the update.
    """
    if lr is None:
        lr = cfg.learning_rate
    n = len(batch_topics)
    noise_words = noise.sample(rng, n * cfg.k_noise)
    noise_topics = np.repeat(batch_topics, cfg.k_noise)
    obj, (uniq_t, g_topic), (uniq_w, g_out, g_bias) = nce_objective_and_grads(
        es, noise, batch_topics, batch_words, noise_topics, noise_words
    )
    if not (
        np.isfinite(obj)
        and np.all(np.isfinite(g_topic))
        and np.all(np.isfinite(g_out))
        and np.all(np.isfinite(g_bias))
    ):
        return obj, False
    if lr != 0.0:
        es.topic_vecs[uniq_t] += lr * g_topic
        es.out_vecs[uniq_w] += lr * g_out
        es.bias[uniq_w] += lr * g_bias
    return obj, True


def training_pairs(instances: Sequence, z_hat) -> tuple[np.ndarray, np.ndarray]:
    """Flatten instances into parallel (topic, context word) arrays."""
    topics = np.fromiter(
        (int(k) for inst, k in zip(instances, z_hat) for _ in inst.context),
        dtype=np.int64,
    )
    words = np.fromiter(
        (w for inst in instances for w in inst.context), dtype=np.int64
    )
    return topics, words


def train_embeddings(
    instances: Sequence,
    z_hat,
    vocab: Vocabulary,
    cfg: TrainConfig,
    n_topics: int,
    noise: NoiseDistribution | None = None,
    log_path=None,
) -> EmbeddingState:
    """Stream shuffled minibatches of (z_i, w_c) pairs for cfg.steps steps.

    Single worker runs are bit-reproducible for a fixed seed. With
    cfg.workers > 1 the step budget is split across threads that update the
    shared parameters without locking; lost updates are tolerated and
    reproducibility is not.
    """
    rng = np.random.default_rng(cfg.seed)
    if noise is None:
        noise = build_noise(vocab)
    es = EmbeddingState.initialize(n_topics, cfg.dim, vocab.counts, rng)
    if cfg.steps == 0:
        return es
    topics, words = training_pairs(instances, z_hat)
    if len(topics) == 0:
        raise ValueError("no training pairs; all contexts empty")
    if cfg.workers > 1:
        _train_parallel(es, topics, words, noise, cfg)
        return es

    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        if log_file:
            log_file.write("step\tobjective\tlearning_rate\n")
        order = rng.permutation(len(topics))
        cursor = 0
        window_obj = 0.0
        window_pairs = 0
        skipped = 0
        for step in range(cfg.steps):
            if cursor >= len(order):
                order = rng.permutation(len(topics))
                cursor = 0
            idx = order[cursor : cursor + cfg.minibatch]
            cursor += cfg.minibatch
            lr = cfg.lr_at(step)
            obj, applied = nce_step(es, topics[idx], words[idx], noise, cfg, rng, lr=lr)
            if not applied:
                skipped += 1
            window_obj += obj
            window_pairs += len(idx)
            if log_file and (step + 1) % cfg.log_every == 0:
                log_file.write(f"{step + 1}\t{window_obj / window_pairs:.6f}\t{lr:.6g}\n")
                window_obj = 0.0
                window_pairs = 0
        if skipped:
            logger.warning("skipped %d non-finite NCE steps", skipped)
    finally:
        if log_file:
            log_file.close()
    return es


def _train_parallel(es, topics, words, noise, cfg):
    """Lock-free threaded ascent; objective-level robustness only."""
    import threading

    def worker(worker_id: int, steps: int):
        wrng = np.random.default_rng((cfg.seed, worker_id))
        order = wrng.permutation(len(topics))
        cursor = 0
        for step in range(steps):
            if cursor >= len(order):
                order = wrng.permutation(len(topics))
                cursor = 0
            idx = order[cursor : cursor + cfg.minibatch]
            cursor += cfg.minibatch
            nce_step(es, topics[idx], words[idx], noise, cfg, wrng, lr=cfg.lr_at(step * cfg.workers))

    per_worker = cfg.steps // cfg.workers
    threads = [
        threading.Thread(target=worker, args=(i, per_worker), daemon=True)
        for i in range(cfg.workers)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
