"""mmsg command line: vocab, split, train, eval, topics, neighbors, export, docvec.

Exit codes: 0 success, 1 usage error, 2 data error. Set the MMSG_LOG
environment variable to debug, info, or warning to control stderr verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evaluation, inference, model_io, pipeline, topics as topics_mod
from .errors import DataError, UsageError
from .inference import TOPIC_MODES, TokenQuery

logger = logging.getLogger("mmsg")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract is exit 1.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _corpus_flags(p: argparse.ArgumentParser):
    p.add_argument("--min-count", type=int, default=5, help="drop tokens rarer than this")
    p.add_argument("--no-lowercase", dest="lowercase", action="store_false")
    p.add_argument(
        "--one-doc-per-file",
        dest="blank_line_docs",
        action="store_false",
        help="treat each file as a single document instead of splitting on blank lines",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmsg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build and save a vocabulary", parents=[])
    p.add_argument("corpus", help="text file or directory of text files")
    p.add_argument("-o", "--output", required=True)
    _corpus_flags(p)

    p = sub.add_parser("split", help="sample held-out (target, input) pairs")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--n-pairs", type=int, required=True)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    _corpus_flags(p)

    p = sub.add_parser("train", help="train a model and write a model directory")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True, help="model directory to create")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--force", action="store_true", help="replace an existing model directory")
    p.add_argument("--log-dir", help="directory for chain/NCE TSV logs")
    for f in dataclasses.fields(pipeline.RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            group = p.add_mutually_exclusive_group()
            group.add_argument(flag, dest=f.name, action="store_true", default=None)
            group.add_argument(
                flag.replace("--", "--no-", 1), dest=f.name, action="store_false", default=None
            )
        elif f.name == "mode":
            p.add_argument(flag, default=None, choices=["MMSG", "MMSGTM", "SG", "SGTM"])
        else:
            p.add_argument(flag, type=_field_parser(f.type), default=None)

    p = sub.add_parser("eval", help="rank held-out pairs and report MRR")
    p.add_argument("model")
    p.add_argument("--heldout", required=True, help="pairs file written by `split` or `train`")
    p.add_argument(
        "--methods",
        required=True,
        help="comma-separated: frequency,prior,posterior,context-add",
    )
    p.add_argument("-o", "--output", help="TSV report path (default: stdout)")
    p.add_argument("--rank-dump", help="per-pair rank TSV prefix")
    p.add_argument(
        "--context-side",
        choices=["input", "output"],
        default="input",
        help="which vectors context-add sums for the remaining context",
    )

    p = sub.add_parser("topics", help="list top words per topic")
    p.add_argument("model")
    p.add_argument("-n", "--top-words", type=int, default=10)
    p.add_argument("--word", help="show the top topics of this word instead of all topics")
    p.add_argument("--word-topics", type=int, default=3, help="topics to list for --word")

    p = sub.add_parser("neighbors", help="nearest neighbors of a composed query")
    p.add_argument("model")
    p.add_argument("query", help="e.g. 'learning' or '+speech -object +recognition'")
    p.add_argument("-n", "--top", type=int, default=10)
    p.add_argument("--pool", choices=["words", "topics"], default="words")

    p = sub.add_parser("export", help="export vectors in word2vec text format or TSV")
    p.add_argument("model")
    p.add_argument("--which", choices=["topics", "word_priors", "documents"], required=True)
    p.add_argument("--format", choices=["word2vec", "tsv"], default="word2vec")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--corpus", help="required for --which documents")
    p.add_argument("--window", type=int, default=5)
    _corpus_flags(p)

    p = sub.add_parser("docvec", help="export unit-norm document feature vectors as TSV")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--window", type=int, default=5)
    _corpus_flags(p)

    return parser


def _field_parser(type_str: str):
    if "int" in type_str and "float" not in type_str:
        return int
    if "float" in type_str:
        return float
    return str


def cmd_vocab(args) -> int:
    vocab = corpus_mod.build_vocabulary(
        corpus_mod.iter_raw_documents(args.corpus, blank_line_docs=args.blank_line_docs),
        min_count=args.min_count,
        lowercase=args.lowercase,
    )
    vocab.save(args.output)
    print(f"wrote {len(vocab)} tokens to {args.output}")
    return 0


def cmd_split(args) -> int:
    vocab = corpus_mod.build_vocabulary(
        corpus_mod.iter_raw_documents(args.corpus, blank_line_docs=args.blank_line_docs),
        min_count=args.min_count,
        lowercase=args.lowercase,
    )
    docs = corpus_mod.load_encoded_documents(
        args.corpus, vocab, lowercase=args.lowercase, blank_line_docs=args.blank_line_docs
    )
    instances = corpus_mod.extract_contexts(docs, args.window)
    _, pairs = corpus_mod.split_heldout(instances, args.n_pairs, args.window, seed=args.seed)
    corpus_mod.save_heldout(pairs, vocab, args.output)
    print(f"wrote {len(pairs)} held-out pairs to {args.output}")
    return 0


def cmd_train(args) -> int:
    overrides = {}
    if args.config:
        overrides.update(pipeline.load_config_file(args.config))
    for f in dataclasses.fields(pipeline.RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    cfg = pipeline.RunConfig(**overrides)

    out = Path(args.output)
    if out.exists() and any(out.iterdir()):
        if not args.force:
            raise UsageError(f"{out} already exists; pass --force to replace it")

    artifacts = pipeline.run_training(cfg, args.corpus, log_dir=args.log_dir)
    metadata = {
        "config": cfg.as_dict(),
        "seeds": {"split": cfg.split_seed, "chain": cfg.chain_seed, "nce": cfg.nce_seed},
    }
    model_io.save_model(artifacts.model, out, metadata=metadata)
    if artifacts.heldout:
        corpus_mod.save_heldout(artifacts.heldout, artifacts.vocab, out / "heldout.tsv")
    if artifacts.chain_state is not None:
        hp_used = topics_mod.Hyperparams.create(
            artifacts.model.n_topics,
            len(artifacts.vocab),
            alpha=cfg.alpha,
            beta=cfg.beta,
            t0=cfg.t0,
            kappa=cfg.kappa,
            lam=cfg.effective_lam,
            iters=cfg.anneal_iters,
            proposals_per_token=cfg.proposals_per_token,
        )
        topics_mod.save_checkpoint(
            out / "chain.npz",
            artifacts.chain_state,
            hp_used,
            rng_state=artifacts.chain_rng_state,
        )
    print(f"trained {cfg.mode} model -> {out}")
    return 0


def cmd_eval(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise UsageError("--methods must name at least one method")
    model = model_io.load_model(args.model)
    pairs = corpus_mod.load_heldout(args.heldout, model.vocab)
    results = []
    for method in methods:
        result = evaluation.evaluate_mrr(model, method, pairs, context_side=args.context_side)
        results.append(result)
        if args.rank_dump:
            evaluation.write_rank_dump(result, f"{args.rank_dump}.{method}.tsv")
    if args.output:
        evaluation.write_mrr_report(results, args.output)
    else:
        print("method\tn_pairs\tmrr")
        for r in results:
            print(f"{r.method}\t{r.n_pairs}\t{r.mrr:.6f}")
    return 0


def cmd_topics(args) -> int:
    model = model_io.load_model(args.model)
    probs = model.topic_word_probs()
    if args.word is not None:
        if args.word not in model.vocab:
            raise DataError(f"word {args.word!r} not in vocabulary")
        w = model.vocab.ids[args.word]
        row = model.theta[w]
        top_topics = np.argsort(-row)[: args.word_topics]
        for k in top_topics:
            words = _top_words(probs[k], model, args.top_words)
            print(f"topic {k} (theta={row[k]:.3f}): {words}")
    else:
        for k in range(model.n_topics):
            words = _top_words(probs[k], model, args.top_words)
            print(f"topic {k}: {words}")
    return 0


def _top_words(row: np.ndarray, model, n: int) -> str:
    # Zero-probability words are never listed, so a point-mass row prints one word.
    top = np.lexsort((np.arange(len(row)), -row))[:n]
    return " ".join(model.vocab.tokens[int(v)] for v in top if row[v] > 0.0)


def _parse_query(query: str, model) -> dict:
    """`+word -word topic:3` style expressions; bare terms are additions."""
    terms: dict = {"plus": [], "minus": [], "plus_topics": [], "minus_topics": []}
    for tok in query.split():
        sign, name = (tok[0], tok[1:]) if tok[0] in "+-" else ("+", tok)
        if not name:
            raise UsageError(f"dangling sign in query: {query!r}")
        if name.startswith("topic:"):
            try:
                k = int(name.split(":", 1)[1])
            except ValueError:
                raise UsageError(f"bad topic reference {name!r}") from None
            if not 0 <= k < model.n_topics:
                raise DataError(f"topic {k} out of range [0, {model.n_topics})")
            terms["plus_topics" if sign == "+" else "minus_topics"].append(k)
            continue
        if name not in model.vocab:
            raise DataError(f"word {name!r} not in vocabulary")
        terms["plus" if sign == "+" else "minus"].append(model.vocab.ids[name])
    if not any(terms.values()):
        raise UsageError("empty query")
    return terms


def cmd_neighbors(args) -> int:
    model = model_io.load_model(args.model)
    terms = _parse_query(args.query, model)
    query_vec = inference.compose(model, **terms)
    hits = inference.nearest(model, query_vec, pool=args.pool, n=args.top)
    for idx, sim in hits:
        name = model.vocab.tokens[idx] if args.pool == "words" else f"topic {idx}"
        print(f"{name}\t{sim:.4f}")
    return 0


def cmd_export(args) -> int:
    model = model_io.load_model(args.model)
    if args.which == "topics":
        if model.embeddings is None:
            raise DataError(f"mode {model.mode} carries no vectors to export")
        names = [f"topic{k}" for k in range(model.n_topics)]
        vectors = model.embeddings.topic_vecs
    elif args.which == "word_priors":
        names = list(model.vocab.tokens)
        vectors = inference.all_word_prior_vectors(model)
    else:
        if not args.corpus:
            raise UsageError("--which documents requires --corpus")
        docs = corpus_mod.load_encoded_documents(
            args.corpus, model.vocab, lowercase=args.lowercase, blank_line_docs=args.blank_line_docs
        )
        names = [f"doc{i}" for i in range(len(docs))]
        vectors = evaluation.export_document_features(model, docs, window=args.window)
    if args.format == "word2vec":
        model_io.write_word2vec(args.output, names, vectors)
    else:
        model_io.write_tsv_vectors(args.output, names, vectors)
    print(f"wrote {len(names)} vectors to {args.output}")
    return 0


def cmd_docvec(args) -> int:
    model = model_io.load_model(args.model)
    docs = corpus_mod.load_encoded_documents(
        args.corpus, model.vocab, lowercase=args.lowercase, blank_line_docs=args.blank_line_docs
    )
    vectors = evaluation.export_document_features(model, docs, window=args.window)
    names = [f"doc{i}" for i in range(len(docs))]
    model_io.write_tsv_vectors(args.output, names, vectors)
    print(f"wrote {len(names)} document vectors to {args.output}")
    return 0


_COMMANDS = {
    "vocab": cmd_vocab,
    "split": cmd_split,
    "train": cmd_train,
    "eval": cmd_eval,
    "topics": cmd_topics,
    "neighbors": cmd_neighbors,
    "export": cmd_export,
    "docvec": cmd_docvec,
}


def main(argv=None) -> int:
    level = os.environ.get("MMSG_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"mmsg: error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"mmsg: data error: {e}", file=sys.stderr)
        return 2
    except UnicodeDecodeError as e:
        print(f"mmsg: data error: input is not valid UTF-8 ({e})", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
