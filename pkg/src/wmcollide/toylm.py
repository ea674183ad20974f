"""Corpus ingestion and an order-k n-gram language model.

The model is the generation engine for both the watermarker and the
paraphraser.  Text is lowercased and split into word and punctuation
tokens; the model stores raw n-gram counts for every context length up
to `order` and answers queries with additive smoothing, backing off to
the longest suffix of the context that was actually observed.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import BadConfigError, CorpusEmptyError, NumericalError

BOS_ID = 0
EOS_ID = 1
UNK_ID = 2

BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"

RESERVED_TOKENS = (BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)

MODEL_SCHEMA_VERSION = 1

DEFAULT_ORDER = 3
DEFAULT_ALPHA = 0.1
DEFAULT_MAX_VOCAB = 5000

# Words are runs of lowercase alphanumerics/apostrophes; any other
# non-space character becomes its own token.
_TOKEN_RE = re.compile(r"[a-z0-9']+|[^\sa-z0-9']")


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace/punctuation tokenization."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Dense bijective token-string <-> id mapping with reserved ids 0..2."""

    tokens: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    def __post_init__(self):
        if self.tokens[:3] != RESERVED_TOKENS:
            raise BadConfigError("vocabulary must start with reserved BOS/EOS/UNK")
        if len(self.index) != len(self.tokens):
            raise BadConfigError("token -> id mapping is not a bijection")

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Vocabulary":
        all_tokens = tuple(RESERVED_TOKENS) + tuple(tokens)
        return cls(tokens=all_tokens, index={t: i for i, t in enumerate(all_tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode(self, text: str) -> list[int]:
        return [self.id_of(t) for t in tokenize(text)]

    def decode(self, ids) -> str:
        return " ".join(self.tokens[i] if 0 <= i < self.size else UNK_TOKEN for i in ids)


class Role(str, Enum):
    RAW = "raw"
    WATERMARKED = "watermarked"
    UNWATERMARKED_GEN = "unwatermarked"
    PARAPHRASED_DUAL = "paraphrased_dual"
    PARAPHRASED_SINGLE = "paraphrased_single"


@dataclass
class TextSample:
    """A token sequence plus provenance of the schemes that produced it."""

    tokens: list[int]
    role: Role
    watermarker_id: str | None = None
    paraphraser_id: str | None = None
    sample_id: str | None = None
    seed: int | None = None
    # Per-step green/alignment flags recorded at generation time, for audit
    # only; never persisted.
    audit_green: list[bool] | None = None

    def __post_init__(self):
        if self.role is Role.PARAPHRASED_DUAL:
            if self.watermarker_id is None or self.paraphraser_id is None:
                raise BadConfigError("dual-watermark sample needs both scheme ids")
        if self.role is Role.WATERMARKED:
            if self.watermarker_id is None or self.paraphraser_id is not None:
                raise BadConfigError("watermarked sample carries exactly the watermarker id")


def ingest_corpus(path: str | Path, max_vocab: int) -> Vocabulary:
    """Build a vocabulary of the `max_vocab` most frequent corpus tokens.

    Reserved BOS/EOS/UNK tokens occupy ids 0..2 on top of the budget.
    Frequency ties break lexicographically, so the result is a pure
    function of the file bytes and `max_vocab`.
    """
    text = Path(path).read_text(encoding="utf-8")
    freqs = Counter(tokenize(text))
    if not freqs:
        raise CorpusEmptyError(f"no tokens in corpus file {path}")
    ranked = sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, _ in ranked[:max_vocab]]
    return Vocabulary.from_tokens(kept)


@dataclass
class TokenModel:
    """Additively smoothed n-gram model with longest-suffix backoff.

    `order` is the context length in tokens.  `counts[k]` maps a length-k
    context tuple to a token -> count dict; `totals[k]` caches the context
    totals.  A context of length k is consulted only if it was observed;
    otherwise the query backs off to its (k-1)-suffix, ending at the
    always-observed unigram.
    """

    order: int
    alpha: float
    vocab: Vocabulary
    counts: list[dict[tuple[int, ...], dict[int, int]]]
    totals: list[dict[tuple[int, ...], int]]

    def _context_ids(self, context) -> tuple[int, ...]:
        v = self.vocab.size
        return tuple(int(t) if 0 <= int(t) < v else UNK_ID for t in context)

    def probs(self, context) -> np.ndarray:
        """Next-token distribution P(. | context) as a dense vector."""
        ctx = self._context_ids(context)[-self.order:] if self.order else ()
        k = len(ctx)
        while k > 0 and ctx[len(ctx) - k:] not in self.totals[k]:
            k -= 1
        use = ctx[len(ctx) - k:] if k else ()
        total = self.totals[k][use]
        v = self.vocab.size
        denom = total + self.alpha * v
        out = np.full(v, self.alpha / denom)
        for tok, c in self.counts[k][use].items():
            out[tok] += c / denom
        return out

    def logits(self, context) -> np.ndarray:
        """log P(. | context); finite everywhere because alpha > 0."""
        return np.log(self.probs(context))


def train_lm(corpus: str | Path, vocab: Vocabulary, order: int, alpha: float) -> TokenModel:
    """Count every context window of length 0..order over the corpus.

    Each input line is padded with `order` BOS tokens and closed with EOS,
    so targets never include BOS and line breaks act as document breaks.
    """
    if order < 1:
        raise BadConfigError(f"order must be >= 1, got {order}")
    if not alpha > 0:
        raise BadConfigError(f"alpha must be > 0, got {alpha}")
    counts: list[dict] = [dict() for _ in range(order + 1)]
    totals: list[dict] = [dict() for _ in range(order + 1)]
    n_tokens = 0
    with open(corpus, encoding="utf-8") as fh:
        for line in fh:
            toks = tokenize(line)
            if not toks:
                continue
            ids = [BOS_ID] * order + [vocab.id_of(t) for t in toks] + [EOS_ID]
            n_tokens += len(toks)
            for i in range(order, len(ids)):
                target = ids[i]
                for k in range(order + 1):
                    ctx = tuple(ids[i - k:i])
                    bucket = counts[k].setdefault(ctx, {})
                    bucket[target] = bucket.get(target, 0) + 1
                    totals[k][ctx] = totals[k].get(ctx, 0) + 1
    if n_tokens == 0:
        raise CorpusEmptyError(f"no tokens in corpus file {corpus}")
    return TokenModel(order=order, alpha=alpha, vocab=vocab, counts=counts, totals=totals)


def sample_token(logits: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    """Draw one token id from softmax(logits / temperature)."""
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite logits")
    if not temperature > 0:
        raise BadConfigError(f"temperature must be > 0, got {temperature}")
    scaled = logits / temperature
    scaled = scaled - scaled.max()
    p = np.exp(scaled)
    p /= p.sum()
    return int(rng.choice(len(p), p=p))


def save_model(model: TokenModel, path: str | Path) -> None:
    """Write the model as versioned JSON; round-trips exactly."""
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "order": model.order,
        "alpha": model.alpha,
        "tokens": list(model.vocab.tokens[3:]),
        "counts": [
            {",".join(map(str, ctx)): bucket for ctx, bucket in counts_k.items()}
            for counts_k in model.counts
        ],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> TokenModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise BadConfigError(f"unsupported model schema version {version!r}")
    vocab = Vocabulary.from_tokens(payload["tokens"])
    counts: list[dict] = []
    totals: list[dict] = []
    for counts_k in payload["counts"]:
        level: dict[tuple[int, ...], dict[int, int]] = {}
        level_totals: dict[tuple[int, ...], int] = {}
        for ctx_key, bucket in counts_k.items():
            ctx = tuple(int(x) for x in ctx_key.split(",")) if ctx_key else ()
            level[ctx] = {int(t): int(c) for t, c in bucket.items()}
            level_totals[ctx] = sum(level[ctx].values())
        counts.append(level)
        totals.append(level_totals)
    return TokenModel(
        order=payload["order"], alpha=payload["alpha"], vocab=vocab,
        counts=counts, totals=totals,
    )
