"""Corpus ingestion: tokenization, vocabulary, context windows, held-out splits.

A corpus is a sequence of documents. Each corpus token becomes one training
instance: the token is the input word and the surrounding window (truncated at
document boundaries) is its context. Held-out evaluation pairs are carved out
of full-width contexts only, so every held-out target had the same amount of
context available.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError


class EmptyVocabularyError(DataError):
    """No token survived the frequency threshold."""


class InsufficientPairsError(DataError):
    """Fewer eligible (instance, slot) pairs than requested held-out pairs."""


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split on Unicode whitespace and strip leading/trailing punctuation.

    Tokens that are empty after stripping (e.g. "--") are dropped.
    """
    out = []
    for chunk in text.split():
        start, end = 0, len(chunk)
        while start < end and _is_punct(chunk[start]):
            start += 1
        while end > start and _is_punct(chunk[end - 1]):
            end -= 1
        if start < end:
            tok = chunk[start:end]
            out.append(tok.lower() if lowercase else tok)
    return out


def iter_raw_documents(path: str | Path, blank_line_docs: bool = True) -> Iterator[str]:
    """Yield raw document strings from a UTF-8 file or directory of files.

    Files inside a directory are visited in sorted order. With
    ``blank_line_docs`` each file is further split on blank lines; otherwise
    one file is one document. Empty documents are skipped.
    """
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.is_file()) if path.is_dir() else [path]
    for f in files:
        text = f.read_text(encoding="utf-8")
        if blank_line_docs:
            parts = [p for p in _split_blank_lines(text)]
        else:
            parts = [text]
        for part in parts:
            if part.strip():
                yield part


def _split_blank_lines(text: str) -> Iterator[str]:
    buf: list[str] = []
    for line in text.splitlines():
        if line.strip():
            buf.append(line)
        elif buf:
            yield "\n".join(buf)
            buf = []
    if buf:
        yield "\n".join(buf)


@dataclass
class Vocabulary:
    """Bidirectional token/id map with corpus frequencies.

    Ids are dense in [0, D) and assigned in descending frequency order,
    ties broken lexicographically.
    """

    tokens: list[str]
    counts: np.ndarray
    ids: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if len(self.tokens) != len(self.counts):
            raise ValueError("tokens and counts must align")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        self.ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.ids

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to ids, dropping out-of-vocabulary tokens."""
        ids = self.ids
        return [ids[t] for t in tokens if t in ids]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path: str | Path) -> None:
        """One ``token<TAB>count`` line per token, line order = id order."""
        with open(path, "w", encoding="utf-8") as f:
            for tok, cnt in zip(self.tokens, self.counts):
                f.write(f"{tok}\t{int(cnt)}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        tokens, counts = [], []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, cnt = line.split("\t")
                tokens.append(tok)
                counts.append(int(cnt))
        return cls(tokens=tokens, counts=np.asarray(counts, dtype=np.int64))


def build_vocabulary(
    text_stream: Iterable[str], min_count: int = 1, lowercase: bool = True
) -> Vocabulary:
    """Count tokens across the stream and keep those with frequency >= min_count.

    Raises EmptyVocabularyError if nothing survives the threshold.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counter: Counter[str] = Counter()
    for text in text_stream:
        counter.update(tokenize(text, lowercase=lowercase))
    kept = [(t, c) for t, c in counter.items() if c >= min_count]
    if not kept:
        raise EmptyVocabularyError(
            f"no token has frequency >= {min_count}; corpus is empty after filtering"
        )
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    tokens = [t for t, _ in kept]
    counts = np.array([c for _, c in kept], dtype=np.int64)
    return Vocabulary(tokens=tokens, counts=counts)


@dataclass
class ContextInstance:
    """One training instance: an input word and the word ids around it."""

    input: int
    context: list[int]
    position: int


@dataclass
class HeldOutPair:
    """A (target context word, input word) evaluation pair.

    ``rest`` is the instance's original context minus the one target slot;
    repeats of the target may legitimately remain in it.
    """

    target: int
    input: int
    rest: list[int]


def extract_contexts(
    documents: Iterable[Sequence[int]], window: int
) -> list[ContextInstance]:
    """Slide a +/-window over each document, one instance per token.

    Contexts never cross document boundaries; tokens whose context would be
    empty (single-token documents) yield no instance. ``position`` is the
    token's offset in the concatenated in-vocabulary token stream.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    instances: list[ContextInstance] = []
    offset = 0
    for doc in documents:
        n = len(doc)
        for i in range(n):
            lo = max(0, i - window)
            hi = min(n, i + window + 1)
            ctx = [doc[j] for j in range(lo, hi) if j != i]
            if ctx:
                instances.append(ContextInstance(input=doc[i], context=ctx, position=offset + i))
        offset += n
    return instances


def expected_context_tokens(doc_lengths: Iterable[int], window: int) -> int:
    """Closed form for the total number of context tokens extract_contexts emits."""
    total = 0
    for n in doc_lengths:
        for i in range(n):
            total += min(window, i) + min(window, n - 1 - i)
    return total


def split_heldout(
    instances: Sequence[ContextInstance],
    n_pairs: int,
    window: int,
    seed: int,
) -> tuple[list[ContextInstance], list[HeldOutPair]]:
    """Sample n_pairs (instance, slot) pairs from full-width contexts.

    Only instances with |context| == 2*window are eligible. Sampling is
    without replacement over (instance, slot) pairs; each sampled slot's word
    becomes a held-out target and is deleted from the training copy of its
    instance. Deterministic given the seed.
    """
    if n_pairs < 0:
        raise ValueError("n_pairs must be >= 0")
    if n_pairs == 0:
        return list(instances), []
    full = 2 * window
    eligible = [i for i, inst in enumerate(instances) if len(inst.context) == full]
    total_slots = len(eligible) * full
    if n_pairs > total_slots:
        raise InsufficientPairsError(
            f"requested {n_pairs} held-out pairs but only {total_slots} eligible "
            f"(instance, slot) pairs exist ({len(eligible)} full-width contexts)"
        )
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(total_slots, size=n_pairs, replace=False))

    removed: dict[int, list[int]] = {}
    pairs: list[HeldOutPair] = []
    for flat in chosen.tolist():
        inst_idx = eligible[flat // full]
        slot = flat % full
        inst = instances[inst_idx]
        rest = inst.context[:slot] + inst.context[slot + 1 :]
        pairs.append(HeldOutPair(target=inst.context[slot], input=inst.input, rest=rest))
        removed.setdefault(inst_idx, []).append(slot)

    train: list[ContextInstance] = []
    for i, inst in enumerate(instances):
        slots = removed.get(i)
        if slots is None:
            train.append(inst)
            continue
        gone = set(slots)
        ctx = [w for s, w in enumerate(inst.context) if s not in gone]
        if ctx:
            train.append(ContextInstance(input=inst.input, context=ctx, position=inst.position))
    return train, pairs


def save_heldout(pairs: Sequence[HeldOutPair], vocab: Vocabulary, path: str | Path) -> None:
    """TSV: target, input, space-separated remaining context (as tokens)."""
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            rest = " ".join(vocab.tokens[w] for w in p.rest)
            f.write(f"{vocab.tokens[p.target]}\t{vocab.tokens[p.input]}\t{rest}\n")


def load_heldout(path: str | Path, vocab: Vocabulary) -> list[HeldOutPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            target, input_tok, rest = parts
            try:
                pairs.append(
                    HeldOutPair(
                        target=vocab.ids[target],
                        input=vocab.ids[input_tok],
                        rest=[vocab.ids[t] for t in rest.split()] if rest else [],
                    )
                )
            except KeyError as e:
                raise DataError(f"{path}:{lineno}: token {e} not in vocabulary") from e
    return pairs


def load_encoded_documents(
    path: str | Path,
    vocab: Vocabulary,
    lowercase: bool = True,
    blank_line_docs: bool = True,
) -> list[list[int]]:
    """Read, tokenize and encode a corpus; OOV tokens are removed."""
    docs = []
    for raw in iter_raw_documents(path, blank_line_docs=blank_line_docs):
        ids = vocab.encode(tokenize(raw, lowercase=lowercase))
        if ids:
            docs.append(ids)
    return docs
