"""Dataset assembly and line-delimited persistence.

A dataset is a flat list of samples plus a registry of every scheme that
touched them.  Sample ids are slash-separated paths whose first segment
names the slice:

    tw/<w>/<i>        watermarked generations (z-filtered)
    twprime/<w>/<i>   unwatermarked generations, one pool per watermarker
    tp/<w>/<p>/<i>    watermarked paraphrases of tw (dual watermark)
    tpprime/<w>/<i>   plain paraphrases of tw (upstream watermark only)

The JSONL file starts with a header record carrying the schema version,
the vocabulary size, and the scheme registry; each following line is one
sample record {sample_id, role, tokens, watermarker_id, paraphraser_id,
seed}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig
from .detect import score
from .hashing import mix, string_key
from .pipeline import GenerationJob, ParaphraseJob, generate, paraphrase, prompt_pool
from .toylm import Role, TextSample, TokenModel, ingest_corpus, train_lm
from .watermark import SchemeConfig, SchemeKind, SeedingMode, Strength

DATASET_SCHEMA_VERSION = 1


@dataclass
class Dataset:
    samples: list[TextSample] = field(default_factory=list)
    schemes: dict[str, SchemeConfig] = field(default_factory=dict)
    vocab_size: int = 0
    schema_version: int = DATASET_SCHEMA_VERSION

    def add_scheme(self, cfg: SchemeConfig | None) -> None:
        if cfg is not None:
            self.schemes[cfg.scheme_id] = cfg

    def extend(self, samples: list[TextSample]) -> None:
        self.samples.extend(samples)

    def in_slice(self, prefix: str) -> list[TextSample]:
        want = prefix if prefix.endswith("/") else prefix + "/"
        return [s for s in self.samples if s.sample_id and s.sample_id.startswith(want)]


def scheme_to_dict(cfg: SchemeConfig) -> dict:
    return {
        "kind": cfg.kind.value,
        "key": cfg.key,
        "gamma": cfg.gamma,
        "delta": cfg.delta,
        "strength": cfg.strength_label.value,
        "seeding": cfg.seeding.value,
        "chunk_length": cfg.chunk_length,
    }


def scheme_from_dict(d: dict) -> SchemeConfig:
    return SchemeConfig(
        kind=SchemeKind(d["kind"]),
        key=int(d["key"]),
        gamma=float(d["gamma"]),
        delta=float(d["delta"]),
        strength_label=Strength(d["strength"]),
        seeding=SeedingMode(d["seeding"]),
        chunk_length=int(d["chunk_length"]),
    )


def save_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "record": "header",
            "schema_version": ds.schema_version,
            "vocab_size": ds.vocab_size,
            "schemes": {sid: scheme_to_dict(cfg) for sid, cfg in ds.schemes.items()},
        }
        fh.write(json.dumps(header) + "\n")
        for s in ds.samples:
            rec = {
                "record": "sample",
                "sample_id": s.sample_id,
                "role": s.role.value,
                "tokens": s.tokens,
                "watermarker_id": s.watermarker_id,
                "paraphraser_id": s.paraphraser_id,
                "seed": s.seed,
            }
            fh.write(json.dumps(rec) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    ds = Dataset()
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("record") != "header":
            raise ValueError(f"{path}: missing dataset header record")
        if header.get("schema_version") != DATASET_SCHEMA_VERSION:
            raise ValueError(f"unsupported dataset schema {header.get('schema_version')!r}")
        ds.vocab_size = int(header["vocab_size"])
        ds.schemes = {sid: scheme_from_dict(d) for sid, d in header["schemes"].items()}
        for line in fh:
            rec = json.loads(line)
            ds.samples.append(
                TextSample(
                    tokens=[int(t) for t in rec["tokens"]],
                    role=Role(rec["role"]),
                    watermarker_id=rec["watermarker_id"],
                    paraphraser_id=rec["paraphraser_id"],
                    sample_id=rec["sample_id"],
                    seed=rec["seed"],
                )
            )
    return ds


def pick_prompt(pool: list[list[int]], seed: int) -> list[int]:
    return pool[mix(seed, string_key("prompt")) % len(pool)]


def generate_slice(
    lm: TokenModel,
    scheme: SchemeConfig | None,
    pool: list[list[int]],
    n: int,
    *,
    master_seed: int,
    salt: str,
    id_prefix: str,
    max_new_tokens: int,
    temperature: float,
    min_tokens: int,
    z_min: float | None = None,
    max_attempts_factor: int = 30,
) -> list[TextSample]:
    """Generate until n samples pass the length floor and optional z filter.

    Attempt seeds derive from (master_seed, salt, attempt), so the slice is
    reproducible and independent of any other slice.
    """
    vocab_size = lm.vocab.size
    out: list[TextSample] = []
    max_attempts = max(n * max_attempts_factor, 50)
    attempt = 0
    while len(out) < n:
        if attempt >= max_attempts:
            raise RuntimeError(
                f"slice {id_prefix}: only {len(out)}/{n} samples accepted after "
                f"{attempt} attempts (z_min={z_min})"
            )
        seed = mix(master_seed, string_key(salt), attempt)
        attempt += 1
        job = GenerationJob(
            lm=lm, scheme=scheme, prompt=pick_prompt(pool, seed), seed=seed,
            max_new_tokens=max_new_tokens, temperature=temperature,
        )
        sample = generate(job)
        if len(sample.tokens) < min_tokens:
            continue
        if z_min is not None and scheme is not None:
            if score(sample, scheme, vocab_size).statistic < z_min:
                continue
        sample.sample_id = f"{id_prefix}/{len(out):04d}"
        out.append(sample)
    return out


def paraphrase_slice(
    lm: TokenModel,
    sources: list[TextSample],
    scheme: SchemeConfig | None,
    *,
    retention_rate: float,
    temperature: float,
    id_prefix: str,
    retention_block: int = 4,
    copy_fidelity: float = 1.5,
    fresh_rate: float = 0.0,
) -> list[TextSample]:
    """Paraphrase each source once.

    The job seed comes from the source sample's own seed, so watermarked
    and plain paraphrases of one source share their retained positions.
    """
    out = []
    for i, src in enumerate(sources):
        job = ParaphraseJob(
            lm=lm, source=src, scheme=scheme,
            seed=mix(src.seed, string_key("paraphrase")),
            retention_rate=retention_rate, retention_block=retention_block,
            copy_fidelity=copy_fidelity, fresh_rate=fresh_rate,
            temperature=temperature,
        )
        sample = paraphrase(job)
        sample.sample_id = f"{id_prefix}/{i:04d}"
        out.append(sample)
    return out


def build_dataset(
    config: ExperimentConfig,
    lm: TokenModel | None = None,
    p_lm: TokenModel | None = None,
    pool: list[list[int]] | None = None,
) -> Dataset:
    """The four-slice collision dataset for every scheme pair in the config.

    For each watermarker W: n z-filtered watermarked samples (tw) and n
    unwatermarked ones (twprime).  For each allowed (W, P) pair: one
    watermarked paraphrase per tw sample (tp).  For each W: one plain
    paraphrase per tw sample (tpprime).
    """
    if lm is None:
        vocab = ingest_corpus(config.corpus, config.max_vocab)
        lm = train_lm(config.corpus, vocab, config.order, config.alpha)
    if p_lm is None:
        p_lm = paraphraser_model(config, lm)
    if pool is None:
        pool = prompt_pool(config.corpus, lm)
    ds = Dataset(vocab_size=lm.vocab.size)
    common = dict(
        master_seed=config.master_seed,
        max_new_tokens=config.max_new_tokens,
        temperature=config.temperature,
        min_tokens=config.min_sample_tokens,
        max_attempts_factor=config.max_attempts_factor,
    )
    tw: dict[str, list[TextSample]] = {}
    for w in config.watermarker_schemes():
        ds.add_scheme(w)
        tw[w.scheme_id] = generate_slice(
            lm, w, pool, config.n_samples,
            salt=f"tw/{w.scheme_id}", id_prefix=f"tw/{w.scheme_id}",
            z_min=config.z_min_for(w.kind), **common,
        )
        ds.extend(tw[w.scheme_id])
        ds.extend(
            generate_slice(
                lm, None, pool, config.n_samples,
                salt=f"twprime/{w.scheme_id}", id_prefix=f"twprime/{w.scheme_id}",
                **common,
            )
        )
    for w, p in config.scheme_pairs():
        ds.add_scheme(p)
        ds.extend(
            paraphrase_slice(
                p_lm, tw[w.scheme_id], p,
                retention_rate=config.retention_rate,
                retention_block=config.retention_block,
                copy_fidelity=config.copy_fidelity,
                fresh_rate=config.fresh_rate,
                temperature=config.temperature,
                id_prefix=f"tp/{w.scheme_id}/{p.scheme_id}",
            )
        )
    for w in config.watermarker_schemes():
        ds.extend(
            paraphrase_slice(
                p_lm, tw[w.scheme_id], None,
                retention_rate=config.retention_rate,
                retention_block=config.retention_block,
                copy_fidelity=config.copy_fidelity,
                fresh_rate=config.fresh_rate,
                temperature=config.temperature,
                id_prefix=f"tpprime/{w.scheme_id}",
            )
        )
    return ds


def paraphraser_model(config: ExperimentConfig, shared: TokenModel) -> TokenModel:
    """Second LM slot: train a separate paraphraser model when configured.

    The shared vocabulary is reused so both models agree on token ids.
    """
    if config.p_corpus is None and config.p_order is None and config.p_alpha is None:
        return shared
    corpus = config.p_corpus or config.corpus
    order = config.p_order or config.order
    alpha = config.p_alpha or config.alpha
    return train_lm(corpus, shared.vocab, order, alpha)
