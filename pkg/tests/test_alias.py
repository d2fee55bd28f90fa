import numpy as np
import pytest
from scipy import stats

from mmsg.alias import build_alias


class TestBuildAlias:
    def test_singleton_always_zero(self, rng):
        table = build_alias([1.0])
        assert all(table.draw(rng) == 0 for _ in range(50))

    def test_two_outcomes_induced_mass(self):
        table = build_alias([1.0, 3.0])
        induced = table.induced_distribution()
        assert np.allclose(induced, [0.25, 0.75], atol=1e-15)

    def test_uniform_four(self):
        table = build_alias([2.0, 2.0, 2.0, 2.0])
        assert np.allclose(table.induced_distribution(), 0.25, atol=1e-15)

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            build_alias([0.0, 0.0])
        with pytest.raises(ValueError):
            build_alias([1.0, float("nan")])
        with pytest.raises(ValueError):
            build_alias([1.0, float("inf")])
        with pytest.raises(ValueError):
            build_alias([1.0, -0.5])
        with pytest.raises(ValueError):
            build_alias([])

    def test_exactness_random_vectors(self, rng):
        for _ in range(200):
            k = int(rng.integers(1, 65))
            w = rng.random(k) ** 2
            w[rng.integers(k)] += 1e-9  # ensure at least one positive entry
            table = build_alias(w)
            induced = table.induced_distribution()
            assert np.abs(induced - table.snapshot).max() <= 1e-12
            assert abs(table.snapshot.sum() - 1.0) <= 1e-12

    def test_snapshot_with_zero_entries(self, rng):
        w = np.array([0.0, 5.0, 0.0, 1.0])
        table = build_alias(w)
        assert np.abs(table.induced_distribution() - table.snapshot).max() <= 1e-12
        for _ in range(200):
            assert table.draw(rng) in (1, 3)


class TestDraw:
    def test_binomial_bound_on_two_outcomes(self):
        rng = np.random.default_rng(7)
        table = build_alias([1.0, 3.0])
        n = 10**6
        u = rng.random((n, 2))
        hits = sum(table.draw_using(a, b) for a, b in u)
        sigma = np.sqrt(0.75 * 0.25 / n)
        assert abs(hits / n - 0.75) < 3 * sigma

    def test_point_mass_snapshot(self, rng):
        table = build_alias([0.0, 0.0, 4.0])
        assert all(table.draw(rng) == 2 for _ in range(100))

    def test_chi_square_goodness_of_fit(self):
        rng = np.random.default_rng(99)
        table = build_alias([1.0, 2.0, 3.0, 4.0])
        n = 10**6
        u = rng.random((n, 2))
        counts = np.zeros(4)
        for a, b in u:
            counts[table.draw_using(a, b)] += 1
        _, p = stats.chisquare(counts, table.snapshot * n)
        assert p > 0.001

    def test_capacity_decrements(self, rng):
        table = build_alias([1.0, 1.0, 1.0])
        assert table.capacity == 3
        table.draw(rng)
        table.draw(rng)
        assert table.capacity == 1
        assert not table.exhausted
        table.draw(rng)
        assert table.exhausted


class TestProposalProb:
    def test_normalized_values(self):
        table = build_alias([1.0, 3.0])
        assert table.proposal_prob(1) == pytest.approx(0.75)

    def test_point_mass_other_index_zero(self):
        table = build_alias([0.0, 7.0])
        assert table.proposal_prob(0) == 0.0

    def test_sums_to_one(self, rng):
        table = build_alias(rng.random(50) + 1e-12)
        total = sum(table.proposal_prob(k) for k in range(50))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_snapshot_frozen_against_source_mutation(self, rng):
        # Staleness contract: the table keeps answering from the weights it
        # was built from even if the caller's live array changes afterwards.
        w = np.array([1.0, 3.0])
        table = build_alias(w)
        w[0] = 100.0
        assert table.proposal_prob(0) == pytest.approx(0.25)
        n = 20000
        hits = sum(table.draw(rng) for _ in range(n))
        assert abs(hits / n - 0.75) < 0.02
