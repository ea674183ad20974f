"""Watermarked generation, constrained-regeneration paraphrase, dataset build.

The pipeline mirrors a two-stage setting: an upstream generator embeds
one watermark while continuing a corpus prompt, and a downstream
paraphraser rewrites that text, optionally embedding a second watermark.

Paraphrasing is a token-retention surrogate for an LLM rewrite: a
deterministic subset of content positions is copied from the source and
every other position is resampled left-to-right from the language model
(plus the paraphraser's bias).  The two properties that matter for
collision dynamics survive: part of the upstream watermark is carried
over verbatim, and the downstream bias competes with the model's urge
to reproduce the source phrasing.

Language-model context and watermark context are decoupled on purpose:
the model conditions on prompt + emitted text, while masks and
embeddings are seeded from the emitted text alone, so a detector can
rescore any persisted sample without knowing its prompt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadConfigError, CorpusTooSmallError, TooShortError
from .hashing import mix, string_key
from .toylm import BOS_ID, EOS_ID, UNK_ID, Role, TextSample, TokenModel, sample_token
from .watermark import SchemeConfig, bias_logits, token_is_green

DATASET_SCHEMA_VERSION = 1

_RETAIN_SALT = string_key("retain")
_REGEN_SALT = string_key("regen")
_FRESH_SALT = string_key("fresh")

# A logit handicap that zeroes a token's sampling probability for all
# practical purposes while keeping the vector finite.
_SUPPRESS = 60.0


@dataclass
class GenerationJob:
    lm: TokenModel
    scheme: SchemeConfig | None
    prompt: list[int]
    seed: int
    max_new_tokens: int = 128
    temperature: float = 1.0

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise BadConfigError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")


@dataclass
class ParaphraseJob:
    lm: TokenModel
    source: TextSample
    scheme: SchemeConfig | None
    seed: int
    retention_rate: float = 0.5
    retention_block: int = 4
    copy_fidelity: float = 1.5
    fresh_rate: float = 0.0
    temperature: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.retention_rate <= 1.0:
            raise BadConfigError(f"retention_rate must be in [0,1], got {self.retention_rate}")
        if self.retention_block < 1:
            raise BadConfigError(f"retention_block must be >= 1, got {self.retention_block}")
        if self.copy_fidelity < 0.0:
            raise BadConfigError(f"copy_fidelity must be >= 0, got {self.copy_fidelity}")
        if not 0.0 <= self.fresh_rate <= 1.0:
            raise BadConfigError(f"fresh_rate must be in [0,1], got {self.fresh_rate}")


def generate(job: GenerationJob) -> TextSample:
    """Autoregressive sampling with an optional watermark bias.

    Halts at EOS or max_new_tokens.  Per-step green/alignment flags of
    the sampled tokens are recorded for audit when a scheme is present.
    """
    if not job.prompt:
        raise BadConfigError("prompt must be nonempty")
    lm = job.lm
    vocab_size = lm.vocab.size
    rng = np.random.default_rng(job.seed)
    prompt = [int(t) for t in job.prompt]
    emitted: list[int] = []
    flags: list[bool] = []
    for _ in range(job.max_new_tokens):
        logits = lm.logits(prompt + emitted)
        if job.scheme is not None:
            logits = bias_logits(logits, job.scheme, emitted)
        tok = sample_token(logits, job.temperature, rng)
        if job.scheme is not None:
            flags.append(token_is_green(job.scheme, emitted, tok, vocab_size))
        emitted.append(tok)
        if tok == EOS_ID:
            break
    if job.scheme is not None:
        return TextSample(
            tokens=emitted, role=Role.WATERMARKED,
            watermarker_id=job.scheme.scheme_id, seed=job.seed, audit_green=flags,
        )
    return TextSample(tokens=emitted, role=Role.UNWATERMARKED_GEN, seed=job.seed)


def retained_positions(
    source_tokens: list[int], retention_rate: float, seed: int, block: int = 4
) -> list[int]:
    """Deterministic choice of ceil(rate * eligible) content positions.

    Eligible positions hold content tokens (not BOS/EOS/UNK).  Positions
    are kept in runs of `block` consecutive eligible slots, mimicking how
    a rewrite copies whole phrases rather than isolated words.  The
    choice depends only on the seed, so watermarked and plain paraphrases
    of the same source can share it.
    """
    eligible = [i for i, t in enumerate(source_tokens) if t not in (BOS_ID, EOS_ID, UNK_ID)]
    n_keep = math.ceil(retention_rate * len(eligible))
    if n_keep == 0:
        return []
    rng = np.random.default_rng(mix(seed, _RETAIN_SALT))
    order = rng.permutation(len(eligible))
    kept: set[int] = set()
    for start in order:
        if len(kept) >= n_keep:
            break
        for j in range(start, min(start + block, len(eligible))):
            if len(kept) >= n_keep:
                break
            kept.add(j)
    return sorted(eligible[j] for j in kept)


def paraphrase(job: ParaphraseJob) -> TextSample:
    """Rewrite a sample by regenerating every non-retained content position.

    Retained positions (and reserved/UNK tokens) are copied verbatim.
    Every other position is resampled left-to-right from the model
    conditioned on the mixed prefix, with two extra logit terms: the
    paraphraser's watermark bias (when a scheme is present) and a
    copy-fidelity lump on the source token at that position.  The lump
    adds `copy_fidelity` units of unnormalized probability mass, so a
    plain rewrite tends to echo the source wording while a strong
    enough bias can override it; this soft preservation channel is what
    lets a downstream watermark erode an upstream one.  A `fresh_rate`
    fraction of positions gets no lump at all, modeling spans the
    rewriter phrases from scratch.  Output length equals source length.
    """
    src = [int(t) for t in job.source.tokens]
    n = len(src)
    if n < 8:
        raise TooShortError(f"paraphrase source needs >= 8 tokens, got {n}")
    lm = job.lm
    copy = [t in (BOS_ID, EOS_ID, UNK_ID) for t in src]
    for i in retained_positions(src, job.retention_rate, job.seed, job.retention_block):
        copy[i] = True
    # fresh spans are scheme-independent, so paired rewrites of one source
    # (plain, or with any paraphraser) disagree only through the bias;
    # they come in blocks so the echoed remainder keeps long runs
    fresh = np.zeros(n, dtype=bool)
    if job.fresh_rate > 0.0:
        quota = round(job.fresh_rate * n)
        fresh_rng = np.random.default_rng(mix(job.seed, _FRESH_SALT))
        for start in fresh_rng.permutation(n):
            if fresh.sum() >= quota:
                break
            fresh[start:start + job.retention_block] = True
    scheme_salt = string_key(job.scheme.scheme_id) if job.scheme is not None else 0
    rng = np.random.default_rng(mix(job.seed, _REGEN_SALT, scheme_salt))
    bos_pad = [BOS_ID] * lm.order
    out: list[int] = []
    for i in range(n):
        if copy[i]:
            out.append(src[i])
            continue
        logits = lm.logits(bos_pad + out)
        if job.copy_fidelity > 0.0 and not fresh[i] and src[i] not in (BOS_ID, EOS_ID):
            # logits are log-probabilities, so this adds copy_fidelity
            # units of raw mass: P(copy) ~ copy_fidelity / (1 + copy_fidelity)
            logits[src[i]] = np.logaddexp(logits[src[i]], math.log(job.copy_fidelity))
        if job.scheme is not None:
            logits = bias_logits(logits, job.scheme, out)
        # no sequence breaks inside a rewrite
        logits[BOS_ID] -= _SUPPRESS
        logits[EOS_ID] -= _SUPPRESS
        out.append(sample_token(logits, job.temperature, rng))
    dual = job.source.watermarker_id is not None and job.scheme is not None
    return TextSample(
        tokens=out,
        role=Role.PARAPHRASED_DUAL if dual else Role.PARAPHRASED_SINGLE,
        watermarker_id=job.source.watermarker_id,
        paraphraser_id=job.scheme.scheme_id if job.scheme is not None else None,
        seed=job.seed,
    )


def prompt_pool(corpus: str | Path, lm: TokenModel, min_tokens: int = 10) -> list[list[int]]:
    """Sentences from the corpus usable as generation prompts.

    Lines are split at sentence periods; every piece with at least
    `min_tokens` tokens becomes one prompt.
    """
    period = lm.vocab.id_of(".")
    pool: list[list[int]] = []
    with open(corpus, encoding="utf-8") as fh:
        for line in fh:
            ids = lm.vocab.encode(line)
            start = 0
            for j, t in enumerate(ids):
                if t == period:
                    piece = ids[start:j + 1]
                    if len(piece) >= min_tokens:
                        pool.append(piece)
                    start = j + 1
            piece = ids[start:]
            if len(piece) >= min_tokens:
                pool.append(piece)
    if len(pool) < 10:
        raise CorpusTooSmallError(
            f"only {len(pool)} prompts of >= {min_tokens} tokens in {corpus}"
        )
    return pool
