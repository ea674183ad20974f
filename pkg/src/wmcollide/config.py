"""Experiment configuration: schema, validation, TOML round-trip.

A config file is flat TOML (no tables), one key per field, e.g.:

    corpus = "corpus.txt"
    order = 3
    alpha = 0.0002
    kinds = ["kgw", "sir", "prw"]
    fpr_targets = [0.01, 0.05, 0.1]
    master_seed = 20240001

Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .errors import BadConfigError
from .watermark import (
    DEFAULT_PARAPHRASER_KEY,
    DEFAULT_WATERMARKER_KEY,
    SchemeConfig,
    SchemeKind,
    make_scheme,
)

OUT_DIR_ENV_VAR = "WMCOLLIDE_OUT_DIR"


@dataclass
class ExperimentConfig:
    # language model
    corpus: str
    model_file: str | None = None
    order: int = 3
    alpha: float = 1e-6
    max_vocab: int = 5000
    # optional separate paraphraser model; defaults to sharing the main one
    p_corpus: str | None = None
    p_order: int | None = None
    p_alpha: float | None = None
    # scheme grid
    kinds: list[str] = field(default_factory=lambda: ["kgw", "sir", "prw"])
    strengths: list[str] = field(default_factory=lambda: ["weak", "strong"])
    watermarker_key: int = DEFAULT_WATERMARKER_KEY
    paraphraser_key: int = DEFAULT_PARAPHRASER_KEY
    gamma: float = 0.25
    sir_gamma: float = 0.5
    seeding: str = "self_hash"
    chunk_length: int = 10
    delta_weak: float = 2.0
    delta_strong: float = 5.0
    # generation / paraphrase
    n_samples: int = 200
    max_new_tokens: int = 128
    temperature: float = 1.0
    retention_rate: float = 0.12
    retention_block: int = 10
    copy_fidelity: float = 4.5
    fresh_rate: float = 0.38
    min_sample_tokens: int = 96
    max_attempts_factor: int = 80
    # detection
    fpr_targets: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.10])
    n_calibration: int = 6000
    n_holdout: int = 2000
    z_min_kgw: float = 4.0
    z_min_prw: float = 4.0
    z_min_sir: float = 0.0
    # harness
    master_seed: int = 20240001
    out_dir: str = ""
    allow_sir_sir: bool = False
    weak_probe: bool = True
    plots: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.order < 1:
            raise BadConfigError("order must be >= 1")
        if not self.alpha > 0:
            raise BadConfigError("alpha must be > 0")
        if not self.kinds:
            raise BadConfigError("need at least one scheme kind")
        for k in self.kinds:
            if k not in ("kgw", "prw", "sir"):
                raise BadConfigError(f"unknown scheme kind {k!r}")
        for s in self.strengths:
            if s not in ("weak", "strong"):
                raise BadConfigError(f"unknown strength {s!r}")
        if self.watermarker_key == self.paraphraser_key:
            raise BadConfigError("watermarker and paraphraser keys must differ")
        if not self.fpr_targets:
            raise BadConfigError("need at least one FPR target")
        if any(not 0.0 < f < 1.0 for f in self.fpr_targets):
            raise BadConfigError("fpr_targets must lie in (0,1)")
        if sorted(self.fpr_targets) != list(self.fpr_targets):
            raise BadConfigError("fpr_targets must be sorted ascending")
        if not 0.0 <= self.retention_rate <= 1.0:
            raise BadConfigError("retention_rate must be in [0,1]")
        if self.n_samples < 1 or self.n_calibration < 1 or self.n_holdout < 1:
            raise BadConfigError("sample counts must be positive")

    def resolved_out_dir(self) -> Path:
        if self.out_dir:
            return Path(self.out_dir)
        return Path(os.environ.get(OUT_DIR_ENV_VAR, "wmcollide-out"))

    def delta_for(self, strength: str) -> float:
        return self.delta_weak if strength == "weak" else self.delta_strong

    def z_min_for(self, kind: SchemeKind) -> float:
        return {
            SchemeKind.KGW: self.z_min_kgw,
            SchemeKind.PRW: self.z_min_prw,
            SchemeKind.SIR: self.z_min_sir,
        }[kind]

    def _side_schemes(self, key: int) -> list[SchemeConfig]:
        out = []
        for kind in self.kinds:
            for strength in self.strengths:
                out.append(
                    make_scheme(
                        kind, strength, key,
                        gamma=self.sir_gamma if kind == "sir" else self.gamma,
                        delta=self.delta_for(strength),
                        seeding=self.seeding,
                        chunk_length=self.chunk_length,
                    )
                )
        return out

    def watermarker_schemes(self) -> list[SchemeConfig]:
        return self._side_schemes(self.watermarker_key)

    def paraphraser_schemes(self) -> list[SchemeConfig]:
        return self._side_schemes(self.paraphraser_key)

    def scheme_pairs(self) -> list[tuple[SchemeConfig, SchemeConfig]]:
        """Every (watermarker, paraphraser) combination under study.

        sir -> sir pairs are excluded unless explicitly allowed, because two
        instances of a keyless semantic scheme would not collide.
        """
        pairs = []
        for w in self.watermarker_schemes():
            for p in self.paraphraser_schemes():
                if (
                    not self.allow_sir_sir
                    and w.kind is SchemeKind.SIR
                    and p.kind is SchemeKind.SIR
                ):
                    continue
                pairs.append((w, p))
        return pairs


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise BadConfigError(f"unknown config keys: {sorted(unknown)}")
    if "corpus" not in data:
        raise BadConfigError("config must set 'corpus'")
    return ExperimentConfig(**data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise BadConfigError(f"cannot serialize config value {v!r}")


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    lines = []
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_toml_value(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
