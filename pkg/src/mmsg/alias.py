"""Walker alias tables: O(K) build, O(1) draws from a frozen discrete distribution.

The table snapshots the normalized distribution it was built from. Draws and
proposal probabilities both refer to that snapshot even after the live counts
it came from have moved on; the Metropolis-Hastings correction divides by the
probability that actually generated the draw, so the snapshot must never be
recomputed from fresher counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AliasTable:
    """Alias table over K outcomes plus the distribution it encodes.

    ``prob[s]`` is the threshold for keeping slot s, ``alias[s]`` the
    alternative outcome. ``capacity`` counts remaining cached draws; when it
    reaches zero the owner is expected to rebuild from live weights, which
    amortizes the O(K) build over K draws.
    """

    prob: np.ndarray
    alias: np.ndarray
    snapshot: np.ndarray
    capacity: int = field(default=0)

    def __post_init__(self):
        if self.capacity == 0:
            self.capacity = len(self.snapshot)

    @property
    def n_outcomes(self) -> int:
        return len(self.snapshot)

    @property
    def exhausted(self) -> bool:
        return self.capacity <= 0

    def draw(self, rng: np.random.Generator) -> int:
        """Sample one outcome distributed as the snapshot."""
        return self.draw_using(rng.random(), rng.random())

    def draw_using(self, u_slot: float, u_coin: float) -> int:
        """Sample from two externally supplied uniforms in [0, 1)."""
        self.capacity -= 1
        s = int(u_slot * len(self.prob))
        if u_coin < self.prob[s]:
            return s
        return int(self.alias[s])

    def proposal_prob(self, k: int) -> float:
        """Probability the table assigns to outcome k (the frozen snapshot)."""
        return float(self.snapshot[k])

    def induced_distribution(self) -> np.ndarray:
        """Walk every slot and accumulate the mass each outcome receives.

        Used by tests to confirm the table encodes the snapshot exactly.
        """
        k = len(self.prob)
        induced = self.prob.astype(np.float64).copy()
        np.add.at(induced, self.alias, 1.0 - self.prob)
        return induced / k


def build_alias(weights) -> AliasTable:
    """Build an alias table for the distribution weights / sum(weights).

    Raises ValueError on non-finite, negative, or all-zero weights.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d array")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise ValueError("at least one weight must be positive")

    k = w.size
    snapshot = w / total
    # Plain python lists in the construction loop; per-element numpy access
    # costs more than the whole build at the K this runs at.
    scaled = (snapshot * k).tolist()
    prob = [1.0] * k
    alias = list(range(k))
    small, large = [], []
    for i, p in enumerate(scaled):
        (small if p < 1.0 else large).append(i)
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        # Stable form of scaled[g] - (1 - scaled[s]): keeps total mass exact.
        pg = (scaled[g] + scaled[s]) - 1.0
        scaled[g] = pg
        if pg < 1.0:
            small.append(g)
        else:
            large.append(g)
    # Leftovers in either list have mass 1 up to round-off.
    return AliasTable(
        prob=np.asarray(prob), alias=np.asarray(alias), snapshot=snapshot, capacity=k
    )
