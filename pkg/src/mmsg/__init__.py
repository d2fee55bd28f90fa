"""Mixed membership skip-gram embeddings and topic models for small corpora.

Train with an annealed Metropolis-Hastings-Walker collapsed Gibbs chain to
impute per-token topics, then fit log-bilinear embeddings with
noise-contrastive estimation; evaluate by ranking held-out context words.
"""

from .alias import AliasTable, build_alias
from .corpus import (
    ContextInstance,
    HeldOutPair,
    Vocabulary,
    build_vocabulary,
    extract_contexts,
    split_heldout,
    tokenize,
)
from .embeddings import (
    EmbeddingState,
    NoiseDistribution,
    TrainConfig,
    build_noise,
    cdll,
    context_word_logprob,
    nce_logit,
    nce_step,
    score,
    train_embeddings,
)
from .errors import DataError, MmsgError, UsageError
from .evaluation import (
    RankingResult,
    evaluate_mrr,
    export_document_features,
    rank_of_target,
    score_candidates,
)
from .inference import (
    TokenQuery,
    TrainedModel,
    compose,
    document_vector,
    nearest,
    posterior_topics,
    token_posterior_vector,
    word_prior_vector,
)
from .model_io import load_model, save_model
from .pipeline import RunConfig, run_training
from .topics import (
    CountState,
    Hyperparams,
    MembershipEstimate,
    MhwSampler,
    degenerate_assignments,
    estimate_phi,
    estimate_theta,
    gibbs_conditional,
    mh_accept_probability,
    propose_topic,
    run_chain,
    temperature,
)

__version__ = "0.1.0"
