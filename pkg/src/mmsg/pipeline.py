"""End-to-end training orchestration shared by the CLI and the test suite.

Reads a corpus, builds the vocabulary and context instances, optionally holds
out evaluation pairs, imputes topic assignments (annealed MHW chain for the
mixed membership modes, the identity assignment for the degenerate ones) and
fits embeddings where the mode calls for them.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import topics as topics_mod
from .corpus import ContextInstance, HeldOutPair, Vocabulary
from .embeddings import TrainConfig, build_noise, train_embeddings
from .errors import UsageError
from .inference import DEGENERATE_MODES, MODES, TOPIC_MODES, VECTOR_MODES, TrainedModel
from .topics import Hyperparams, MembershipEstimate, MhwSampler, estimate_phi

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Everything a training run needs; defaults follow the reference setup
    (128-dimensional vectors, minibatches of 128, 1000 annealing sweeps)."""

    mode: str = "MMSG"
    topics: int = 100
    dim: int = 128
    window: int = 5
    min_count: int = 5
    lowercase: bool = True
    blank_line_docs: bool = True
    alpha: float | None = None  # None -> 50 / K
    beta: float = 0.01
    t0: float = 1e-4
    kappa: float = 0.99
    lam: float | None = None  # None -> 2 * window
    anneal_iters: int = 1000
    proposals_per_token: int = 1
    k_noise: int = 5
    minibatch: int = 128
    nce_steps: int = 1_000_000
    learning_rate: float = 0.025
    final_learning_rate: float = 1e-4
    noise_exponent: float = 1.0
    heldout_pairs: int = 0
    split_seed: int = 1
    chain_seed: int = 2
    nce_seed: int = 3
    threads: int = 1
    log_every: int = 1000
    cdll_every: int = 0

    def __post_init__(self):
        self.mode = self.mode.upper()
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        _positive = {
            "topics": self.topics,
            "dim": self.dim,
            "window": self.window,
            "min_count": self.min_count,
            "beta": self.beta,
            "t0": self.t0,
            "anneal_iters": self.anneal_iters,
            "k_noise": self.k_noise,
            "minibatch": self.minibatch,
            "learning_rate": self.learning_rate,
            "threads": self.threads,
            "proposals_per_token": self.proposals_per_token,
        }
        for name, value in _positive.items():
            if value <= 0:
                raise UsageError(f"{name} must be positive, got {value}")
        if self.alpha is not None and self.alpha <= 0:
            raise UsageError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.kappa < 1:
            raise UsageError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.lam is not None and self.lam < 0:
            raise UsageError(f"lam must be non-negative, got {self.lam}")
        if self.nce_steps < 0:
            raise UsageError(f"nce_steps must be >= 0, got {self.nce_steps}")
        if self.heldout_pairs < 0:
            raise UsageError(f"heldout_pairs must be >= 0, got {self.heldout_pairs}")

    @property
    def effective_lam(self) -> float:
        return 2.0 * self.window if self.lam is None else self.lam

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_BOOL_STRINGS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def load_config_file(path: str | Path) -> dict:
    """Flat key=value file; '#' starts a comment, blank lines ignored."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    out: dict = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _coerce(fields[key].type, value, f"{path}:{lineno}")
    return out


def _coerce(type_str: str, value: str, where: str):
    if value.lower() == "none":
        return None
    if "bool" in type_str:
        if value.lower() not in _BOOL_STRINGS:
            raise UsageError(f"{where}: expected a boolean, got {value!r}")
        return _BOOL_STRINGS[value.lower()]
    if "int" in type_str and "float" not in type_str:
        return int(value)
    if "float" in type_str:
        return float(value)
    return value


@dataclass
class TrainArtifacts:
    model: TrainedModel
    vocab: Vocabulary
    train_instances: list[ContextInstance]
    heldout: list[HeldOutPair]
    z_hat: np.ndarray
    estimate: MembershipEstimate | None
    chain_state: topics_mod.CountState | None
    chain_rng_state: dict | None = None


def prepare_corpus(
    cfg: RunConfig, corpus_path: str | Path
) -> tuple[Vocabulary, list[ContextInstance], list[HeldOutPair]]:
    vocab = corpus_mod.build_vocabulary(
        corpus_mod.iter_raw_documents(corpus_path, blank_line_docs=cfg.blank_line_docs),
        min_count=cfg.min_count,
        lowercase=cfg.lowercase,
    )
    docs = corpus_mod.load_encoded_documents(
        corpus_path, vocab, lowercase=cfg.lowercase, blank_line_docs=cfg.blank_line_docs
    )
    instances = corpus_mod.extract_contexts(docs, cfg.window)
    train, heldout = corpus_mod.split_heldout(
        instances, cfg.heldout_pairs, cfg.window, seed=cfg.split_seed
    )
    logger.info(
        "corpus: %d words, %d instances (%d held-out pairs)",
        len(vocab),
        len(train),
        len(heldout),
    )
    return vocab, train, heldout


def run_training(
    cfg: RunConfig, corpus_path: str | Path, log_dir: str | Path | None = None
) -> TrainArtifacts:
    vocab, train, heldout = prepare_corpus(cfg, corpus_path)
    return train_from_instances(cfg, vocab, train, heldout, log_dir=log_dir)


def train_from_instances(
    cfg: RunConfig,
    vocab: Vocabulary,
    train: list[ContextInstance],
    heldout: list[HeldOutPair] | None = None,
    log_dir: str | Path | None = None,
) -> TrainArtifacts:
    heldout = heldout or []
    log_dir = Path(log_dir) if log_dir is not None else None
    n_words = len(vocab)
    degenerate = cfg.mode in DEGENERATE_MODES
    n_topics = n_words if degenerate else cfg.topics

    estimate = None
    chain_state = None
    chain_rng_state = None
    if degenerate:
        # One observed "topic" per input word; theta is exactly one-hot.
        z_hat = np.fromiter((i.input for i in train), dtype=np.int32, count=len(train))
        theta = np.eye(n_words)
        phi = None
        if cfg.mode == "SGTM":
            hp = Hyperparams.create(n_topics, n_words, alpha=cfg.alpha, beta=cfg.beta)
            state = topics_mod.degenerate_assignments(train, n_words)
            phi = estimate_phi(state, hp)
    else:
        hp = Hyperparams.create(
            n_topics,
            n_words,
            alpha=cfg.alpha,
            beta=cfg.beta,
            t0=cfg.t0,
            kappa=cfg.kappa,
            lam=cfg.effective_lam,
            iters=cfg.anneal_iters,
            proposals_per_token=cfg.proposals_per_token,
        )
        sampler = MhwSampler(train, hp, seed=cfg.chain_seed)
        chain_log = log_dir / "chain_log.tsv" if log_dir else None
        chain_state, estimate = sampler.run(log_path=chain_log, cdll_every=cfg.cdll_every)
        chain_rng_state = sampler.rng.bit_generator.state
        z_hat = chain_state.z.copy()
        theta = estimate.theta
        phi = estimate.phi

    embeddings = None
    if cfg.mode in VECTOR_MODES:
        tc = TrainConfig(
            steps=cfg.nce_steps,
            dim=cfg.dim,
            k_noise=cfg.k_noise,
            minibatch=cfg.minibatch,
            learning_rate=cfg.learning_rate,
            final_learning_rate=cfg.final_learning_rate,
            seed=cfg.nce_seed,
            log_every=cfg.log_every,
            workers=cfg.threads,
        )
        noise = build_noise(vocab, exponent=cfg.noise_exponent)
        nce_log = log_dir / "nce_log.tsv" if log_dir else None
        embeddings = train_embeddings(
            train, z_hat, vocab, tc, n_topics=n_topics, noise=noise, log_path=nce_log
        )

    model = TrainedModel(
        vocab=vocab,
        theta=theta,
        mode=cfg.mode,
        phi=phi if cfg.mode in TOPIC_MODES else None,
        embeddings=embeddings,
    )
    return TrainArtifacts(
        model=model,
        vocab=vocab,
        train_instances=train,
        heldout=heldout,
        z_hat=z_hat,
        estimate=estimate,
        chain_state=chain_state,
        chain_rng_state=chain_rng_state,
    )
