"""Collapsed count state and the annealed Metropolis-Hastings-Walker chain.

Topic assignments are imputed per training instance (one per corpus token).
Each sweep makes one cheap mixture-of-experts proposal per instance: pick a
context word uniformly, draw a candidate topic from that word's smoothed
topic distribution via an alias table, and correct with an annealed MH
accept/reject step. Everything per proposal is O(|context|), constant in the
number of topics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .alias import AliasTable, build_alias
from .corpus import ContextInstance

logger = logging.getLogger(__name__)


@dataclass
class Hyperparams:
    """Dirichlet concentrations plus the annealing schedule constants."""

    alpha: np.ndarray
    beta: np.ndarray
    t0: float = 1e-4
    kappa: float = 0.99
    lam: float = 10.0
    iters: int = 1000
    proposals_per_token: int = 1

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if np.any(self.alpha <= 0) or np.any(self.beta <= 0):
            raise ValueError("alpha and beta entries must be positive")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.proposals_per_token < 1:
            raise ValueError("proposals_per_token must be >= 1")

    @classmethod
    def create(
        cls,
        n_topics: int,
        n_words: int,
        alpha: float | None = None,
        beta: float = 0.01,
        **kwargs,
    ) -> "Hyperparams":
        """Symmetric priors; alpha defaults to 50/K."""
        a = 50.0 / n_topics if alpha is None else alpha
        return cls(alpha=np.full(n_topics, a), beta=np.full(n_words, beta), **kwargs)

    @property
    def n_topics(self) -> int:
        return len(self.alpha)

    @property
    def n_words(self) -> int:
        return len(self.beta)


@dataclass
class CountState:
    """Sufficient statistics of the collapsed sampler.

    n_word_topic[w, k]: instances with input word w assigned topic k.
    n_topic_out[k, v]: context-word tokens of word v under topic k.
    n_topic[k]: row sums of n_topic_out.
    """

    z: np.ndarray
    n_word_topic: np.ndarray
    n_topic_out: np.ndarray
    n_topic: np.ndarray
    n_topics: int

    @classmethod
    def from_assignments(
        cls, instances: Sequence[ContextInstance], z, n_words: int, n_topics: int
    ) -> "CountState":
        z = np.asarray(z, dtype=np.int32)
        if len(z) != len(instances):
            raise ValueError("one assignment per instance required")
        nwt = np.zeros((n_words, n_topics), dtype=np.int32)
        nto = np.zeros((n_topics, n_words), dtype=np.int32)
        inputs = np.fromiter((inst.input for inst in instances), dtype=np.int64, count=len(instances))
        np.add.at(nwt, (inputs, z), 1)
        for inst, k in zip(instances, z):
            row = nto[k]
            for wc in inst.context:
                row[wc] += 1
        nt = nto.sum(axis=1, dtype=np.int64)
        return cls(z=z, n_word_topic=nwt, n_topic_out=nto, n_topic=nt, n_topics=n_topics)

    def validate(self, instances: Sequence[ContextInstance] | None = None) -> None:
        """Cross-check the count invariants; test/debug helper."""
        if np.any(self.n_word_topic < 0) or np.any(self.n_topic_out < 0):
            raise AssertionError("negative counts")
        if not np.array_equal(self.n_topic, self.n_topic_out.sum(axis=1, dtype=np.int64)):
            raise AssertionError("n_topic out of sync with n_topic_out")
        if instances is not None:
            per_word = np.zeros(self.n_word_topic.shape[0], dtype=np.int64)
            total_ctx = 0
            for inst in instances:
                per_word[inst.input] += 1
                total_ctx += len(inst.context)
            if not np.array_equal(self.n_word_topic.sum(axis=1, dtype=np.int64), per_word):
                raise AssertionError("n_word_topic rows do not match instance counts")
            if int(self.n_topic.sum()) != total_ctx:
                raise AssertionError("n_topic total does not match context tokens")


@dataclass
class MembershipEstimate:
    """Row-stochastic topic proportions per word and word distributions per topic."""

    theta: np.ndarray
    phi: np.ndarray


def temperature(hp: Hyperparams, j: int) -> float:
    """Annealing temperature at sweep j >= 1: t0 + lam * kappa**j."""
    if j < 1:
        raise ValueError("iteration index starts at 1")
    return hp.t0 + hp.lam * hp.kappa**j


def _context_prior_occurrences(context: Sequence[int]) -> list[int]:
    """occ[c] = how many of context[:c] equal context[c]."""
    seen: dict[int, int] = {}
    occ = []
    for w in context:
        occ.append(seen.get(w, 0))
        seen[w] = seen.get(w, 0) + 1
    return occ


def gibbs_conditional(
    state: CountState, hp: Hyperparams, instance: ContextInstance
) -> np.ndarray:
    """Normalized collapsed conditional p(z_i = k | everything else).

    The instance's own counts must already be removed from ``state``. Each
    context word contributes a Polya-urn factor in which earlier occurrences
    of the same word within this context raise its pseudo-count, and the
    denominator grows by one per word drawn.
    """
    p = unnormalized_conditional(state, hp, instance)
    total = p.sum()
    if total <= 0 or not np.isfinite(total):
        raise ValueError("conditional vanished; check hyperparameters and counts")
    return p / total


def unnormalized_conditional(
    state: CountState, hp: Hyperparams, instance: ContextInstance
) -> np.ndarray:
    beta_sum = float(hp.beta.sum())
    p = state.n_word_topic[instance.input].astype(np.float64) + hp.alpha
    occ = _context_prior_occurrences(instance.context)
    denom_base = state.n_topic.astype(np.float64) + beta_sum
    for c, wc in enumerate(instance.context):
        p = p * (state.n_topic_out[:, wc] + hp.beta[wc] + occ[c]) / (denom_base + c)
    return p


def mh_accept_probability(
    p_new: float, p_old: float, q_new: float, q_old: float, temp: float
) -> float:
    """min(1, (p_new/p_old)^(1/T) * q_old/q_new), in log space.

    The p values may be unnormalized (common factors cancel). A non-finite
    log-ratio forces a rejection; callers track those as diagnostics.
    """
    if q_old <= 0.0:
        raise ValueError("current state has zero proposal probability; unreachable state")
    if p_new <= 0.0:
        return 0.0
    if p_old <= 0.0 or q_new <= 0.0 or temp <= 0.0:
        return 0.0
    log_ratio = (math.log(p_new) - math.log(p_old)) / temp + math.log(q_old) - math.log(q_new)
    if math.isnan(log_ratio):
        return 0.0
    return math.exp(min(log_ratio, 0.0))


def estimate_theta(state: CountState, hp: Hyperparams) -> np.ndarray:
    """Rao-Blackwellized per-word topic proportions from the final counts."""
    num = state.n_word_topic.astype(np.float64) + hp.alpha[None, :]
    return num / num.sum(axis=1, keepdims=True)


def estimate_phi(state: CountState, hp: Hyperparams) -> np.ndarray:
    """Smoothed per-topic word distributions from the final counts."""
    num = state.n_topic_out.astype(np.float64) + hp.beta[None, :]
    return num / num.sum(axis=1, keepdims=True)


def degenerate_assignments(
    instances: Sequence[ContextInstance], n_words: int
) -> CountState:
    """Naive-Bayes configuration: one topic per dictionary word, z_i = w_i.

    Feeds the skip-gram and skip-gram-topic-model baselines through the same
    downstream code paths as the mixed membership models.
    """
    z = np.fromiter((inst.input for inst in instances), dtype=np.int32, count=len(instances))
    return CountState.from_assignments(instances, z, n_words=n_words, n_topics=n_words)


class ProposalTables:
    """Per-word alias tables over topics, rebuilt from live counts when exhausted.

    q_w(k) is proportional to (n_topic_out[k, w] + beta[w]) / (n_topic[k] + sum(beta)).
    """

    def __init__(self, state: CountState, hp: Hyperparams):
        self._state = state
        self._beta = hp.beta
        self._beta_sum = float(hp.beta.sum())
        self._tables: dict[int, AliasTable] = {}
        self.rebuilds = 0

    def table_for(self, word: int) -> AliasTable:
        table = self._tables.get(word)
        if table is None or table.exhausted:
            weights = (
                self._state.n_topic_out[:, word] + self._beta[word]
            ) / (self._state.n_topic + self._beta_sum)
            table = build_alias(weights)
            self._tables[word] = table
            self.rebuilds += 1
        return table


def propose_topic(
    state: CountState,
    hp: Hyperparams,
    instance: ContextInstance,
    rng: np.random.Generator,
    tables: ProposalTables | None = None,
) -> tuple[int, int]:
    """Mixture-of-experts proposal: uniform context slot, then that word's table."""
    if not instance.context:
        raise ValueError("cannot propose for an empty context")
    if tables is None:
        tables = ProposalTables(state, hp)
    slot = int(rng.random() * len(instance.context))
    table = tables.table_for(instance.context[slot])
    return table.draw(rng), slot


@dataclass
class SweepStats:
    sweep: int
    temp: float
    proposals: int
    accepted: int
    forced_rejects: int
    cdll: float | None = None

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0


class MhwSampler:
    """Sequentially updates every instance's topic once per sweep.

    Counts are mutated in place, so a sampler instance is strictly
    single-threaded; run independent chains on separate copies instead.
    """

    def __init__(
        self,
        instances: Sequence[ContextInstance],
        hp: Hyperparams,
        seed: int,
        init_z: np.ndarray | None = None,
    ):
        if not instances:
            raise ValueError("need at least one training instance")
        self.instances = instances
        self.hp = hp
        self.n_topics = hp.n_topics
        self.n_words = hp.n_words
        self.rng = np.random.default_rng(seed)

        # Hot-loop copies: plain python ints/lists are markedly faster than
        # per-element numpy scalar access.
        self._inputs = [inst.input for inst in instances]
        self._contexts = [list(inst.context) for inst in instances]
        self._beta_plus_occ = []
        self._ctx_unique = []
        self._ctx_unique_counts = []
        beta = hp.beta
        for ctx in self._contexts:
            occ = _context_prior_occurrences(ctx)
            self._beta_plus_occ.append([float(beta[w]) + o for w, o in zip(ctx, occ)])
            uniq, cnt = np.unique(np.asarray(ctx, dtype=np.int64), return_counts=True)
            self._ctx_unique.append(uniq)
            self._ctx_unique_counts.append(cnt.astype(np.int32))
        self._alpha = hp.alpha.tolist()
        self._beta_sum = float(hp.beta.sum())

        if init_z is None:
            init_z = self.rng.integers(0, self.n_topics, size=len(instances), dtype=np.int32)
        self.state = CountState.from_assignments(
            instances, init_z, n_words=self.n_words, n_topics=self.n_topics
        )
        self.tables = ProposalTables(self.state, hp)
        self.forced_rejects = 0

        self._uniforms = np.empty(0)
        self._ucursor = 0

        # Flattened (instance, context word) pairs for the count-based
        # complete-data log-likelihood diagnostic.
        self._pair_instance = np.fromiter(
            (i for i, ctx in enumerate(self._contexts) for _ in ctx),
            dtype=np.int64,
        )
        self._pair_word = np.fromiter(
            (w for ctx in self._contexts for w in ctx), dtype=np.int64
        )
        self._inputs_arr = np.asarray(self._inputs, dtype=np.int64)

    def _uniform(self) -> float:
        if self._ucursor >= len(self._uniforms):
            self._uniforms = self.rng.random(1 << 16)
            self._ucursor = 0
        u = self._uniforms[self._ucursor]
        self._ucursor += 1
        return float(u)

    def _conditional_value(self, w: int, ctx: list[int], bpo: list[float], k: int) -> float:
        """Unnormalized collapsed conditional at a single topic, O(|context|)."""
        nto_k = self.state.n_topic_out[k]
        num = float(self.state.n_word_topic[w, k]) + self._alpha[k]
        base = float(self.state.n_topic[k]) + self._beta_sum
        for c, wc in enumerate(ctx):
            num *= (float(nto_k[wc]) + bpo[c]) / (base + c)
        return num

    def update_instance(self, i: int, temp: float) -> bool:
        """One MHW move for instance i at the given temperature."""
        state = self.state
        w = self._inputs[i]
        ctx = self._contexts[i]
        bpo = self._beta_plus_occ[i]
        uniq = self._ctx_unique[i]
        uniq_cnt = self._ctx_unique_counts[i]
        n_ctx = len(ctx)
        z_old = int(state.z[i])

        # Remove this instance's contribution (the not-i convention).
        # Fancy indexing is safe on the deduplicated context.
        state.n_word_topic[w, z_old] -= 1
        state.n_topic_out[z_old][uniq] -= uniq_cnt
        state.n_topic[z_old] -= n_ctx

        accepted = False
        z = z_old
        for _ in range(self.hp.proposals_per_token):
            slot = int(self._uniform() * n_ctx)
            table = self.tables.table_for(ctx[slot])
            z_new = table.draw_using(self._uniform(), self._uniform())
            u_accept = self._uniform()
            if z_new == z:
                accepted = True
                continue
            q_new = table.snapshot[z_new]
            q_old = table.snapshot[z]
            p_new = self._conditional_value(w, ctx, bpo, z_new)
            p_old = self._conditional_value(w, ctx, bpo, z)
            if p_old <= 0.0 or q_new <= 0.0:
                self.forced_rejects += 1
                continue
            a = mh_accept_probability(p_new, p_old, q_new, q_old, temp)
            if u_accept < a:
                z = z_new
                accepted = True

        state.z[i] = z
        state.n_word_topic[w, z] += 1
        state.n_topic_out[z][uniq] += uniq_cnt
        state.n_topic[z] += n_ctx
        return accepted

    def sweep(self, j: int, compute_cdll: bool = False) -> SweepStats:
        temp = temperature(self.hp, j)
        forced_before = self.forced_rejects
        accepted = 0
        n = len(self.instances)
        for i in range(n):
            if self.update_instance(i, temp):
                accepted += 1
        stats = SweepStats(
            sweep=j,
            temp=temp,
            proposals=n,
            accepted=accepted,
            forced_rejects=self.forced_rejects - forced_before,
        )
        if compute_cdll:
            stats.cdll = self.count_cdll()
        return stats

    def count_cdll(self) -> float:
        """Complete-data log-likelihood under the current count-based estimates.

        Uses the smoothed theta/phi implied by the live counts; a cheap
        monotonicity diagnostic for the annealed chain.
        """
        state, hp = self.state, self.hp
        z = state.z.astype(np.int64)
        nwt_rows = state.n_word_topic[self._inputs_arr, z].astype(np.float64)
        row_tot = state.n_word_topic.sum(axis=1, dtype=np.int64)[self._inputs_arr]
        alpha = hp.alpha
        theta_terms = np.log(nwt_rows + alpha[z]) - np.log(
            row_tot + float(alpha.sum())
        )
        z_pairs = z[self._pair_instance]
        nto_vals = state.n_topic_out[z_pairs, self._pair_word].astype(np.float64)
        phi_terms = np.log(nto_vals + hp.beta[self._pair_word]) - np.log(
            state.n_topic[z_pairs] + self._beta_sum
        )
        return float(theta_terms.sum() + phi_terms.sum())

    def run(self, log_path=None, cdll_every: int = 0) -> tuple[CountState, MembershipEstimate]:
        log_file = open(log_path, "w", encoding="utf-8") if log_path else None
        try:
            if log_file:
                log_file.write("sweep\ttemperature\tacceptance_rate\tcdll\n")
            for j in range(1, self.hp.iters + 1):
                want_cdll = bool(cdll_every) and (j % cdll_every == 0 or j == self.hp.iters)
                stats = self.sweep(j, compute_cdll=want_cdll)
                if log_file:
                    cdll = "" if stats.cdll is None else f"{stats.cdll:.6f}"
                    log_file.write(
                        f"{j}\t{stats.temp:.6g}\t{stats.acceptance_rate:.4f}\t{cdll}\n"
                    )
                logger.debug(
                    "sweep %d: T=%.4g acceptance=%.3f", j, stats.temp, stats.acceptance_rate
                )
        finally:
            if log_file:
                log_file.close()
        return self.state, MembershipEstimate(
            theta=estimate_theta(self.state, self.hp),
            phi=estimate_phi(self.state, self.hp),
        )


def run_chain(
    instances: Sequence[ContextInstance],
    hp: Hyperparams,
    seed: int,
    log_path=None,
    cdll_every: int = 0,
) -> tuple[CountState, MembershipEstimate]:
    """Run the annealed MHW chain for hp.iters sweeps; K and D come from hp."""
    sampler = MhwSampler(instances, hp, seed=seed)
    return sampler.run(log_path=log_path, cdll_every=cdll_every)


def save_checkpoint(path, state: CountState, hp: Hyperparams, rng_state: dict | None = None):
    """Versioned binary dump of assignments, counts, hyperparameters, RNG state."""
    import json

    np.savez_compressed(
        path,
        format_version=np.int64(1),
        z=state.z,
        n_word_topic=state.n_word_topic,
        n_topic_out=state.n_topic_out,
        n_topic=state.n_topic,
        alpha=hp.alpha,
        beta=hp.beta,
        schedule=np.array([hp.t0, hp.kappa, hp.lam], dtype=np.float64),
        iters=np.int64(hp.iters),
        proposals_per_token=np.int64(hp.proposals_per_token),
        rng_state=np.frombuffer(
            json.dumps(rng_state or {}).encode("utf-8"), dtype=np.uint8
        ),
    )


def load_checkpoint(path) -> tuple[CountState, Hyperparams, dict]:
    import json

    with np.load(path) as data:
        version = int(data["format_version"])
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        t0, kappa, lam = data["schedule"]
        hp = Hyperparams(
            alpha=data["alpha"],
            beta=data["beta"],
            t0=float(t0),
            kappa=float(kappa),
            lam=float(lam),
            iters=int(data["iters"]),
            proposals_per_token=int(data["proposals_per_token"]),
        )
        state = CountState(
            z=data["z"],
            n_word_topic=data["n_word_topic"],
            n_topic_out=data["n_topic_out"],
            n_topic=data["n_topic"],
            n_topics=len(data["alpha"]),
        )
        rng_state = json.loads(bytes(data["rng_state"]).decode("utf-8"))
    return state, hp, rng_state
