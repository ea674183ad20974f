"""The three logit-bias watermark schemes.

Two green-list schemes shift green-token logits by +delta:

* kgw: the green list is reseeded at every step from the previous token
  (and, in self-hash mode, the candidate token itself).
* prw: one fixed key-seeded green/red split reused at every step.

The third scheme (sir) is a deterministic surrogate for a trained
semantic watermark network: the last `chunk_length` tokens are embedded
as a keyed bag-of-tokens unit vector e, and every vocabulary token t
receives a bias of +/-delta according to sign(<e, r_t>), where r_t is a
fixed key-independent pseudorandom unit vector.  Identical context
chunks therefore produce identical bias vectors, and the bias is
balanced over the vocabulary.

All decisions derive from the SplitMix64 mixer in `hashing`; see that
module for the exact bit-level definition.  Mask/embedding tables are
memoized, so the returned arrays must be treated as read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import BadConfigError, NumericalError
from .hashing import EMPTY_CONTEXT_SENTINEL, mix, mix_array, splitmix64_array
from .toylm import UNK_ID

WEAK_DELTA = 2.0
STRONG_DELTA = 5.0
DEFAULT_GAMMA = 0.25
SIR_GAMMA = 0.5
SIR_CHUNK_LENGTH = 10
SIR_EMBED_DIM = 64

DEFAULT_WATERMARKER_KEY = 2024
DEFAULT_PARAPHRASER_KEY = 2023

# Salt for the key-independent per-token direction vectors of the sir scheme.
_SIR_TOKEN_SALT = 0x5152_7C0D_E5A1_B3F7


class SchemeKind(str, Enum):
    KGW = "kgw"
    PRW = "prw"
    SIR = "sir"


class Strength(str, Enum):
    WEAK = "weak"
    STRONG = "strong"


class SeedingMode(str, Enum):
    PREV_TOKEN = "prev_token"
    SELF_HASH = "self_hash"


@dataclass(frozen=True)
class SchemeConfig:
    """One watermark identity: scheme kind, key, and strength parameters.

    `seeding` only matters for kgw; `chunk_length` only for sir.
    """

    kind: SchemeKind
    key: int
    gamma: float
    delta: float
    strength_label: Strength
    seeding: SeedingMode = SeedingMode.SELF_HASH
    chunk_length: int = SIR_CHUNK_LENGTH

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise BadConfigError(f"gamma must be in (0,1), got {self.gamma}")
        if self.delta < 0.0:
            raise BadConfigError(f"delta must be >= 0, got {self.delta}")
        if self.chunk_length < 1:
            raise BadConfigError(f"chunk_length must be >= 1, got {self.chunk_length}")

    @property
    def scheme_id(self) -> str:
        return f"{self.kind.value}-{self.strength_label.value}-k{self.key}"


def make_scheme(
    kind: SchemeKind | str,
    strength: Strength | str,
    key: int,
    *,
    gamma: float | None = None,
    delta: float | None = None,
    seeding: SeedingMode | str = SeedingMode.SELF_HASH,
    chunk_length: int = SIR_CHUNK_LENGTH,
) -> SchemeConfig:
    """Build a SchemeConfig with the conventional defaults filled in.

    weak -> delta 2, strong -> delta 5; gamma 0.25 except 0.5 for sir.
    """
    kind = SchemeKind(kind)
    strength = Strength(strength)
    if delta is None:
        delta = WEAK_DELTA if strength is Strength.WEAK else STRONG_DELTA
    if gamma is None:
        gamma = SIR_GAMMA if kind is SchemeKind.SIR else DEFAULT_GAMMA
    return SchemeConfig(
        kind=kind, key=key, gamma=gamma, delta=delta,
        strength_label=strength, seeding=SeedingMode(seeding),
        chunk_length=chunk_length,
    )


def null_scheme(cfg: SchemeConfig) -> SchemeConfig:
    """Same identity with the logit shift turned off."""
    return replace(cfg, delta=0.0)


@dataclass
class GreenMask:
    """Boolean green/red vocabulary split with exactly round(gamma*|V|) greens."""

    bits: np.ndarray

    @property
    def green_count(self) -> int:
        return int(self.bits.sum())


def green_list_size(gamma: float, vocab_size: int) -> int:
    return round(gamma * vocab_size)


def _check_vocab_size(vocab_size: int) -> None:
    if vocab_size < 4:
        raise BadConfigError(f"vocab_size must be >= 4, got {vocab_size}")


def _prev_token_id(context, vocab_size: int) -> int:
    if len(context) == 0:
        return EMPTY_CONTEXT_SENTINEL
    t = int(context[-1])
    return t if 0 <= t < vocab_size else UNK_ID


@lru_cache(maxsize=8192)
def _kgw_bits(seeding: SeedingMode, key: int, gamma: float, prev: int, vocab_size: int) -> np.ndarray:
    ids = np.arange(vocab_size, dtype=np.uint64)
    if seeding is SeedingMode.PREV_TOKEN:
        # seed = H(key, prev); candidate score = H(seed, t)
        scores = mix_array(mix(key, prev), ids)
    else:
        # self-hash: candidate score = H(key, prev, t), the candidate's own
        # identity enters its green status
        scores = splitmix64_array(np.uint64(mix(key, prev)) ^ ids)
    g = green_list_size(gamma, vocab_size)
    bits = np.zeros(vocab_size, dtype=bool)
    bits[np.argpartition(scores, g)[:g]] = True
    bits.flags.writeable = False
    return bits


def green_mask_kgw(cfg: SchemeConfig, context, vocab_size: int) -> GreenMask:
    """Context-seeded green list: the gamma-fraction of tokens whose keyed
    hash ranks lowest for the current previous token."""
    if cfg.kind is not SchemeKind.KGW:
        raise BadConfigError(f"expected a kgw config, got {cfg.kind}")
    _check_vocab_size(vocab_size)
    prev = _prev_token_id(context, vocab_size)
    return GreenMask(bits=_kgw_bits(cfg.seeding, cfg.key, cfg.gamma, prev, vocab_size))


@lru_cache(maxsize=64)
def _prw_bits(key: int, gamma: float, vocab_size: int) -> np.ndarray:
    scores = mix_array(key, np.arange(vocab_size, dtype=np.uint64))
    g = green_list_size(gamma, vocab_size)
    bits = np.zeros(vocab_size, dtype=bool)
    bits[np.argpartition(scores, g)[:g]] = True
    bits.flags.writeable = False
    return bits


def green_mask_prw(cfg: SchemeConfig, vocab_size: int) -> GreenMask:
    """Fixed green/red split seeded by the key alone; identical at every step."""
    if cfg.kind is not SchemeKind.PRW:
        raise BadConfigError(f"expected a prw config, got {cfg.kind}")
    _check_vocab_size(vocab_size)
    return GreenMask(bits=_prw_bits(cfg.key, cfg.gamma, vocab_size))


def _hash_normals(seed: int, n_rows: int, n_cols: int) -> np.ndarray:
    """Deterministic standard-normal matrix via Box-Muller on hash uniforms."""
    ids = np.arange(n_rows * n_cols, dtype=np.uint64)
    u1 = (mix_array(mix(seed, 1), ids) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u2 = (mix_array(mix(seed, 2), ids) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    return z.reshape(n_rows, n_cols)


@lru_cache(maxsize=8)
def _sir_token_directions(vocab_size: int) -> np.ndarray:
    """Key-independent unit direction r_t per vocabulary token."""
    r = _hash_normals(_SIR_TOKEN_SALT, vocab_size, SIR_EMBED_DIM)
    r /= np.linalg.norm(r, axis=1, keepdims=True)
    r.flags.writeable = False
    return r


@lru_cache(maxsize=32)
def _sir_bag_table(key: int, vocab_size: int) -> np.ndarray:
    """Keyed per-token feature used to embed a context chunk.

    One extra row (index vocab_size) embeds the empty context.
    """
    phi = _hash_normals(mix(key, 3), vocab_size + 1, SIR_EMBED_DIM)
    phi.flags.writeable = False
    return phi


def _sir_chunk_ids(cfg: SchemeConfig, context, vocab_size: int) -> list[int]:
    """Token ids of the embedding chunk; the sentinel row stands in when empty."""
    chunk = [int(t) if 0 <= int(t) < vocab_size else UNK_ID
             for t in list(context)[-cfg.chunk_length:]]
    return chunk if chunk else [vocab_size]


def _sir_embedding(cfg: SchemeConfig, context, vocab_size: int) -> np.ndarray:
    """Unit embedding of the last chunk_length context tokens."""
    phi = _sir_bag_table(cfg.key, vocab_size)
    e = phi[_sir_chunk_ids(cfg, context, vocab_size)].sum(axis=0)
    return e / np.linalg.norm(e)


# Per-token dot products <r_t, phi_key(id)>, cached column by column.  The
# bias needs sign(R @ e) and e is a nonnegative multiple of sum(phi[chunk]),
# so summing cached columns gives the same signs without the matvec.
_SIR_COLUMNS: dict[tuple[int, int], dict[int, np.ndarray]] = {}
_SIR_COLUMN_CAP = 2600


def _sir_column(key: int, vocab_size: int, token_id: int) -> np.ndarray:
    cache = _SIR_COLUMNS.setdefault((key, vocab_size), {})
    col = cache.get(token_id)
    if col is None:
        if len(cache) >= _SIR_COLUMN_CAP:
            cache.clear()
        phi = _sir_bag_table(key, vocab_size)
        col = _sir_token_directions(vocab_size) @ phi[token_id]
        col.flags.writeable = False
        cache[token_id] = col
    return col


def sir_bias(cfg: SchemeConfig, context, vocab_size: int) -> np.ndarray:
    """Per-token +/-delta bias aligned with the context-chunk embedding."""
    if cfg.kind is not SchemeKind.SIR:
        raise BadConfigError(f"expected a sir config, got {cfg.kind}")
    _check_vocab_size(vocab_size)
    chunk = _sir_chunk_ids(cfg, context, vocab_size)
    dots = _sir_column(cfg.key, vocab_size, chunk[0]).copy()
    for t in chunk[1:]:
        dots += _sir_column(cfg.key, vocab_size, t)
    return cfg.delta * np.where(dots >= 0.0, 1.0, -1.0)


def sir_alignment(cfg: SchemeConfig, context, token_id: int, vocab_size: int) -> bool:
    """Whether one realized token aligns with the positive bias direction.

    Agrees with sign(sir_bias(cfg, context, vocab_size)[token_id]) but costs
    O(chunk + embed_dim) instead of a full vocabulary matvec.
    """
    _check_vocab_size(vocab_size)
    e = _sir_embedding(cfg, context, vocab_size)
    t = token_id if 0 <= token_id < vocab_size else UNK_ID
    return float(_sir_token_directions(vocab_size)[t] @ e) >= 0.0


def token_is_green(cfg: SchemeConfig, context, token_id: int, vocab_size: int) -> bool:
    """Green/alignment status of one realized token under any scheme."""
    if cfg.kind is SchemeKind.KGW:
        mask = green_mask_kgw(cfg, context, vocab_size)
        t = token_id if 0 <= token_id < vocab_size else UNK_ID
        return bool(mask.bits[t])
    if cfg.kind is SchemeKind.PRW:
        mask = green_mask_prw(cfg, vocab_size)
        t = token_id if 0 <= token_id < vocab_size else UNK_ID
        return bool(mask.bits[t])
    return sir_alignment(cfg, context, token_id, vocab_size)


def bias_logits(base: np.ndarray, cfg: SchemeConfig, context) -> np.ndarray:
    """Apply one scheme's logit shift to a base logit vector."""
    if not np.all(np.isfinite(base)):
        raise NumericalError("non-finite base logits")
    vocab_size = len(base)
    if cfg.kind is SchemeKind.SIR:
        return base + sir_bias(cfg, context, vocab_size)
    if cfg.kind is SchemeKind.KGW:
        mask = green_mask_kgw(cfg, context, vocab_size)
    else:
        mask = green_mask_prw(cfg, vocab_size)
    return base + cfg.delta * mask.bits


def null_rate(cfg: SchemeConfig) -> float:
    """Expected green/alignment rate on text the scheme never touched."""
    if cfg.kind is SchemeKind.SIR:
        # sign alignment is balanced by construction
        return 0.5
    return cfg.gamma
