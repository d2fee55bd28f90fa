"""Independent reference computations the test suite checks the package against.

Everything in here is deliberately written from first principles (lgamma
forms, naive loops, exhaustive enumeration) and must not import the modules
whose behavior it verifies, beyond plain data containers.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def polya_sequential_conditional(
    n_word_topic, n_topic_out, n_topic, alpha, beta, input_word, context
):
    """Collapsed conditional over topics via the sequential urn product.

    For each topic k: (n_word_topic[w, k] + alpha[k]) times, for the c-th
    context word (1-based), (count so far of that word under k + beta) /
    (total under k + sum(beta) + c - 1), where "so far" includes earlier
    draws within this context.
    """
    n_topics = len(alpha)
    beta_sum = float(np.sum(beta))
    out = np.zeros(n_topics)
    for k in range(n_topics):
        value = float(n_word_topic[input_word, k]) + float(alpha[k])
        drawn: dict[int, int] = {}
        for c, w in enumerate(context):
            num = float(n_topic_out[k, w]) + float(beta[w]) + drawn.get(w, 0)
            den = float(n_topic[k]) + beta_sum + c
            value *= num / den
            drawn[w] = drawn.get(w, 0) + 1
        out[k] = value
    return out / out.sum()


def dcm_log_prob(counts_in_context: dict[int, int], base: np.ndarray) -> float:
    """Log probability of a context multiset under a Dirichlet-compound
    multinomial with parameter vector ``base`` (ordered sequence probability).

    Gamma form: lgamma(A) - lgamma(A + C) + sum_v [lgamma(a_v + m_v) - lgamma(a_v)].
    """
    a_sum = float(np.sum(base))
    c_total = sum(counts_in_context.values())
    value = math.lgamma(a_sum) - math.lgamma(a_sum + c_total)
    for v, m in counts_in_context.items():
        value += math.lgamma(float(base[v]) + m) - math.lgamma(float(base[v]))
    return value


def dirichlet_multinomial_conditional(
    n_word_topic, n_topic_out, n_topic, alpha, beta, input_word, context
):
    """Collapsed conditional over topics by marginalizing the word
    distribution in closed form (independent of draw order)."""
    n_topics = len(alpha)
    multiset: dict[int, int] = {}
    for w in context:
        multiset[w] = multiset.get(w, 0) + 1
    log_p = np.zeros(n_topics)
    for k in range(n_topics):
        base = np.asarray(n_topic_out[k], dtype=np.float64) + np.asarray(beta, dtype=np.float64)
        log_p[k] = math.log(float(n_word_topic[input_word, k]) + float(alpha[k]))
        log_p[k] += dcm_log_prob(multiset, base)
    log_p -= log_p.max()
    p = np.exp(log_p)
    return p / p.sum()


def joint_log_prob(inputs, contexts, z, n_words, n_topics, alpha, beta) -> float:
    """Collapsed log p(z, context words | inputs, alpha, beta) up to a constant.

    Product of one Dirichlet-multinomial over topic choices per input word
    and one over context words per topic.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    per_word: dict[int, dict[int, int]] = {}
    per_topic: dict[int, dict[int, int]] = {}
    for w, ctx, k in zip(inputs, contexts, z):
        per_word.setdefault(w, {}).setdefault(k, 0)
        per_word[w][k] += 1
        bucket = per_topic.setdefault(k, {})
        for wc in ctx:
            bucket[wc] = bucket.get(wc, 0) + 1
    total = 0.0
    for w, topic_counts in per_word.items():
        total += dcm_log_prob(topic_counts, alpha)
    for k, word_counts in per_topic.items():
        total += dcm_log_prob(word_counts, beta)
    return total


def exact_assignment_marginals(inputs, contexts, n_words, n_topics, alpha, beta):
    """Enumerate all K^N joint assignments; per-instance marginals, (N, K)."""
    n = len(inputs)
    log_probs = []
    states = list(itertools.product(range(n_topics), repeat=n))
    for z in states:
        log_probs.append(joint_log_prob(inputs, contexts, z, n_words, n_topics, alpha, beta))
    log_probs = np.array(log_probs)
    p = np.exp(log_probs - log_probs.max())
    p /= p.sum()
    marginals = np.zeros((n, n_topics))
    for prob, z in zip(p, states):
        for i, k in enumerate(z):
            marginals[i, k] += prob
    return marginals


def naive_dot_score(out_vec, topic_vec, bias) -> float:
    total = 0.0
    for a, b in zip(out_vec, topic_vec):
        total += float(a) * float(b)
    return total + float(bias)


def naive_softmax_logprobs(scores) -> np.ndarray:
    exps = [math.exp(float(s)) for s in scores]
    total = sum(exps)
    return np.array([math.log(e / total) for e in exps])


def naive_cdll(theta, topic_vecs, out_vecs, bias, instances, z_hat) -> float:
    """Term-by-term double loop over instances and context words."""
    total = 0.0
    for inst, k in zip(instances, z_hat):
        total += math.log(float(theta[inst.input, k]))
        scores = [naive_dot_score(out_vecs[v], topic_vecs[k], bias[v]) for v in range(len(bias))]
        logprobs = naive_softmax_logprobs(scores)
        for wc in inst.context:
            total += float(logprobs[wc])
    return total


def sliding_window_contexts(doc, window):
    """Independent re-implementation of per-document context extraction."""
    out = []
    for i in range(len(doc)):
        ctx = []
        for j in range(len(doc)):
            if j != i and abs(j - i) <= window:
                ctx.append(doc[j])
        if ctx:
            out.append((doc[i], ctx))
    return out


def rank_by_sorting(scores, target) -> float:
    """Average rank of `target` computed by sorting score/index pairs."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    positions = [pos + 1 for pos, i in enumerate(order) if scores[i] == scores[target]]
    return sum(positions) / len(positions)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))
