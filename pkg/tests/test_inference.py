import numpy as np
import pytest

from mmsg.corpus import Vocabulary
from mmsg.embeddings import EmbeddingState
from mmsg.errors import DataError
from mmsg.inference import (
    TokenQuery,
    TrainedModel,
    ZeroVectorError,
    all_word_prior_vectors,
    compose,
    document_vector,
    nearest,
    posterior_topics,
    queries_for_document,
    token_posterior_vector,
    word_prior_vector,
)

from oracles import naive_softmax_logprobs


def _vocab(n):
    return Vocabulary(tokens=[f"t{i}" for i in range(n)], counts=np.ones(n, dtype=np.int64))


def _mmsg_model(rng, n_words=3, n_topics=2, dim=4, theta=None):
    es = EmbeddingState(
        topic_vecs=rng.normal(size=(n_topics, dim)),
        out_vecs=rng.normal(size=(n_words, dim)),
        bias=rng.normal(size=n_words),
    )
    if theta is None:
        theta = rng.dirichlet(np.ones(n_topics), size=n_words)
    return TrainedModel(vocab=_vocab(n_words), theta=theta, mode="MMSG", embeddings=es)


def _mmsgtm_model(rng, n_words=3, n_topics=2, theta=None, phi=None):
    if theta is None:
        theta = rng.dirichlet(np.ones(n_topics), size=n_words)
    if phi is None:
        phi = rng.dirichlet(np.ones(n_words), size=n_topics)
    return TrainedModel(vocab=_vocab(n_words), theta=theta, mode="MMSGTM", phi=phi)


class TestTrainedModelValidation:
    def test_vector_mode_requires_embeddings(self, rng):
        with pytest.raises(ValueError, match="requires embeddings"):
            TrainedModel(vocab=_vocab(3), theta=rng.dirichlet(np.ones(2), size=3), mode="MMSG")

    def test_topic_mode_requires_phi(self, rng):
        with pytest.raises(ValueError, match="requires phi"):
            TrainedModel(vocab=_vocab(3), theta=rng.dirichlet(np.ones(2), size=3), mode="MMSGTM")

    def test_degenerate_mode_requires_square_theta(self, rng):
        es = EmbeddingState(
            topic_vecs=rng.normal(size=(2, 4)),
            out_vecs=rng.normal(size=(3, 4)),
            bias=np.zeros(3),
        )
        with pytest.raises(ValueError, match="K = D"):
            TrainedModel(
                vocab=_vocab(3), theta=rng.dirichlet(np.ones(2), size=3), mode="SG", embeddings=es
            )

    def test_unknown_mode(self, rng):
        with pytest.raises(ValueError, match="unknown mode"):
            TrainedModel(vocab=_vocab(2), theta=np.eye(2), mode="LDA")


class TestPosteriorTopics:
    def test_empty_context_is_prior(self, rng):
        model = _mmsg_model(rng)
        q = TokenQuery(input=1)
        assert np.allclose(posterior_topics(model, q), model.theta[1])

    def test_one_hot_theta_stays_point_mass(self, rng):
        theta = np.tile(np.array([[0.0, 1.0]]), (3, 1))
        model = _mmsg_model(rng, theta=theta)
        post = posterior_topics(model, TokenQuery(input=0, context=[1, 2]))
        assert np.allclose(post, [0.0, 1.0])

    def test_matches_direct_product(self, rng):
        model = _mmsg_model(rng, n_words=3, n_topics=2)
        q = TokenQuery(input=0, context=[1, 2])
        expected = model.theta[0].copy()
        for k in range(2):
            scores = [model.embeddings.topic_vecs[k] @ model.embeddings.out_vecs[v]
                      + model.embeddings.bias[v] for v in range(3)]
            logprobs = naive_softmax_logprobs(scores)
            for wc in q.context:
                expected[k] *= np.exp(logprobs[wc])
        expected /= expected.sum()
        assert np.allclose(posterior_topics(model, q), expected, rtol=1e-12)

    def test_topic_model_path_uses_phi(self, rng):
        model = _mmsgtm_model(rng)
        q = TokenQuery(input=2, context=[0, 0])
        expected = model.theta[2] * model.phi[:, 0] ** 2
        expected /= expected.sum()
        assert np.allclose(posterior_topics(model, q), expected, rtol=1e-12)

    def test_permutation_invariance(self, rng):
        model = _mmsg_model(rng, n_words=4)
        a = posterior_topics(model, TokenQuery(input=0, context=[1, 2, 3, 1]))
        b = posterior_topics(model, TokenQuery(input=0, context=[3, 1, 1, 2]))
        assert np.allclose(a, b, rtol=1e-12)

    def test_sums_to_one(self, rng):
        model = _mmsg_model(rng, n_words=5, n_topics=3)
        post = posterior_topics(model, TokenQuery(input=2, context=[0, 1, 4]))
        assert post.sum() == pytest.approx(1.0, abs=1e-9)

    def test_flat_likelihood_word_is_uninformative(self, rng):
        # A context word scored identically by every topic cannot move the posterior.
        n_words, n_topics, dim = 4, 3, 2
        es = EmbeddingState(
            topic_vecs=rng.normal(size=(n_topics, dim)),
            out_vecs=rng.normal(size=(n_words, dim)),
            bias=rng.normal(size=n_words),
        )
        es.topic_vecs[:] = es.topic_vecs[0]  # all topics identical => flat everywhere
        theta = rng.dirichlet(np.ones(n_topics), size=n_words)
        model = TrainedModel(vocab=_vocab(n_words), theta=theta, mode="MMSG", embeddings=es)
        base = posterior_topics(model, TokenQuery(input=0, context=[1]))
        extended = posterior_topics(model, TokenQuery(input=0, context=[1, 3]))
        assert np.allclose(base, extended, rtol=1e-10)


class TestVectors:
    def test_prior_one_hot_selects_topic_vector(self, rng):
        theta = np.tile(np.array([[1.0, 0.0]]), (3, 1))
        model = _mmsg_model(rng, theta=theta)
        assert np.allclose(word_prior_vector(model, 1), model.embeddings.topic_vecs[0])

    def test_prior_uniform_is_midpoint(self, rng):
        theta = np.full((3, 2), 0.5)
        model = _mmsg_model(rng, theta=theta)
        expected = model.embeddings.topic_vecs.mean(axis=0)
        assert np.allclose(word_prior_vector(model, 0), expected)

    def test_prior_within_convex_hull_box(self, rng):
        model = _mmsg_model(rng, n_words=6, n_topics=4, dim=5)
        lo = model.embeddings.topic_vecs.min(axis=0) - 1e-12
        hi = model.embeddings.topic_vecs.max(axis=0) + 1e-12
        for w in range(6):
            v = word_prior_vector(model, w)
            assert np.all(v >= lo) and np.all(v <= hi)

    def test_posterior_vector_empty_context_equals_prior(self, rng):
        model = _mmsg_model(rng)
        q = TokenQuery(input=2)
        assert np.allclose(token_posterior_vector(model, q), word_prior_vector(model, 2))

    def test_posterior_vector_weighted_sum(self, rng):
        model = _mmsg_model(rng)
        q = TokenQuery(input=0, context=[1])
        post = posterior_topics(model, q)
        expected = sum(post[k] * model.embeddings.topic_vecs[k] for k in range(2))
        assert np.allclose(token_posterior_vector(model, q), expected, rtol=1e-12)

    def test_topic_model_has_no_vectors(self, rng):
        model = _mmsgtm_model(rng)
        with pytest.raises(DataError):
            word_prior_vector(model, 0)


class TestDocumentVector:
    def test_single_token_document(self, rng):
        model = _mmsg_model(rng)
        q = TokenQuery(input=1)
        doc = document_vector(model, [q])
        expected = word_prior_vector(model, 1)
        assert np.allclose(doc, expected / np.linalg.norm(expected))

    def test_repeated_token_same_direction(self, rng):
        model = _mmsg_model(rng)
        q = TokenQuery(input=1)
        assert np.allclose(document_vector(model, [q]), document_vector(model, [q, q]))

    def test_matches_naive_sum(self, rng):
        model = _mmsg_model(rng, n_words=5)
        ids = [0, 3, 1, 4, 2]
        queries = queries_for_document(ids, window=2)
        total = np.zeros(model.dim)
        for q in queries:
            total += token_posterior_vector(model, q)
        assert np.allclose(document_vector(model, queries), total / np.linalg.norm(total))

    def test_unit_norm(self, rng):
        model = _mmsg_model(rng, n_words=5)
        queries = queries_for_document([0, 1, 2, 3], window=1)
        assert np.linalg.norm(document_vector(model, queries)) == pytest.approx(1.0)

    def test_empty_document_raises(self, rng):
        model = _mmsg_model(rng)
        with pytest.raises(ZeroVectorError):
            document_vector(model, [])

    def test_queries_include_empty_context_tokens(self):
        qs = queries_for_document([7], window=3)
        assert len(qs) == 1 and qs[0].context == []


class TestNearest:
    def test_topic_query_finds_itself(self, rng):
        model = _mmsg_model(rng, n_topics=3)
        hits = nearest(model, model.embeddings.topic_vecs[1], pool="topics", n=3)
        assert hits[0][0] == 1
        assert hits[0][1] == pytest.approx(1.0)

    def test_orthogonal_similarity_zero(self):
        es = EmbeddingState(
            topic_vecs=np.array([[1.0, 0.0], [0.0, 1.0]]),
            out_vecs=np.zeros((2, 2)),
            bias=np.zeros(2),
        )
        model = TrainedModel(vocab=_vocab(2), theta=np.eye(2), mode="SG", embeddings=es)
        hits = dict(nearest(model, np.array([1.0, 0.0]), pool="topics", n=2))
        assert hits[1] == pytest.approx(0.0, abs=1e-12)

    def test_ranking_matches_exhaustive_sort(self, rng):
        vectors = rng.normal(size=(50, 6))
        es = EmbeddingState(topic_vecs=vectors, out_vecs=np.zeros((50, 6)), bias=np.zeros(50))
        model = TrainedModel(vocab=_vocab(50), theta=np.eye(50), mode="SG", embeddings=es)
        query = rng.normal(size=6)
        hits = nearest(model, query, pool="topics", n=50)
        sims = vectors @ query / (np.linalg.norm(vectors, axis=1) * np.linalg.norm(query))
        expected = sorted(range(50), key=lambda i: (-sims[i], i))
        assert [h[0] for h in hits] == expected

    def test_tie_broken_by_id(self, rng):
        vecs = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
        es = EmbeddingState(topic_vecs=vecs, out_vecs=np.zeros((3, 2)), bias=np.zeros(3))
        model = TrainedModel(vocab=_vocab(3), theta=np.eye(3), mode="SG", embeddings=es)
        hits = nearest(model, np.array([1.0, 0.0]), pool="topics", n=2)
        assert [h[0] for h in hits] == [0, 1]  # same cosine, lower id first

    def test_documents_pool_requires_vectors(self, rng):
        model = _mmsg_model(rng)
        from mmsg.errors import UsageError

        with pytest.raises(UsageError):
            nearest(model, np.zeros(model.dim), pool="documents")


class TestCompose:
    def test_single_word_is_normalized_prior(self, rng):
        model = _mmsg_model(rng)
        v = word_prior_vector(model, 2)
        assert np.allclose(compose(model, [2]), v / np.linalg.norm(v))

    def test_cancellation_raises(self, rng):
        model = _mmsg_model(rng)
        with pytest.raises(ZeroVectorError):
            compose(model, [1], [1])

    def test_matches_arithmetic(self, rng):
        model = _mmsg_model(rng, n_words=4)
        v = word_prior_vector(model, 0) + word_prior_vector(model, 1) - word_prior_vector(model, 3)
        assert np.allclose(compose(model, [0, 1], [3]), v / np.linalg.norm(v), rtol=1e-12)


class TestDegenerateModeConsistency:
    def test_sg_prior_vector_is_own_topic_vector(self, rng):
        n = 4
        es = EmbeddingState(
            topic_vecs=rng.normal(size=(n, 3)),
            out_vecs=rng.normal(size=(n, 3)),
            bias=np.zeros(n),
        )
        model = TrainedModel(vocab=_vocab(n), theta=np.eye(n), mode="SG", embeddings=es)
        for w in range(n):
            assert np.allclose(word_prior_vector(model, w), es.topic_vecs[w])
        assert np.allclose(all_word_prior_vectors(model), es.topic_vecs)
