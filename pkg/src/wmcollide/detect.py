"""Watermark detectors and FPR-targeted threshold calibration.

Detection reduces every scheme to the same one-proportion test: count
the positions whose realized token is green (kgw/prw) or positively
aligned with the context embedding (sir), then standardize against the
scheme's null rate:

    z = (green_count - rate * T) / sqrt(T * rate * (1 - rate))

Masks and alignments are recomputed from the scored tokens alone, so a
detector needs nothing beyond the scheme config and the vocabulary
size.  Thresholds are empirical quantiles of null scores, with ties
resolved conservatively (a tie at the threshold counts as negative).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import BadConfigError, CalibrationError, TooShortError
from .toylm import TextSample
from .watermark import SchemeConfig, null_rate, token_is_green

MIN_CALIBRATION_SCORES = 100


@dataclass
class DetectionResult:
    statistic: float
    green_count: int
    token_count: int
    scheme_id: str


@dataclass(frozen=True)
class CalibratedThreshold:
    value: float
    target_fpr: float
    n_calibration: int


def z_statistic(green_count: int, token_count: int, rate: float) -> float:
    return (green_count - rate * token_count) / math.sqrt(
        token_count * rate * (1.0 - rate)
    )


def score(text: TextSample | Sequence[int], cfg: SchemeConfig, vocab_size: int) -> DetectionResult:
    """Score one token sequence against one scheme.

    The context for every position is the preceding scored tokens only
    (position 0 sees the empty context), matching how the generators
    seed their masks.
    """
    tokens = list(text.tokens) if isinstance(text, TextSample) else list(text)
    n = len(tokens)
    if n < 2:
        raise TooShortError(f"need at least 2 tokens to score, got {n}")
    green = 0
    for i, tok in enumerate(tokens):
        if token_is_green(cfg, tokens[:i], tok, vocab_size):
            green += 1
    rate = null_rate(cfg)
    return DetectionResult(
        statistic=z_statistic(green, n, rate),
        green_count=green,
        token_count=n,
        scheme_id=cfg.scheme_id,
    )


def calibrate(null_scores: Sequence[float], target_fpr: float) -> CalibratedThreshold:
    """Smallest null score whose strictly-greater tail is within the target.

    The comparison count/n <= target_fpr is done in exact arithmetic so
    that boundary cases (e.g. exactly 10% of scores above) resolve the
    same way on every platform.
    """
    n = len(null_scores)
    if n < MIN_CALIBRATION_SCORES:
        raise CalibrationError(f"need >= {MIN_CALIBRATION_SCORES} null scores, got {n}")
    if not 0.0 < target_fpr < 1.0:
        raise BadConfigError(f"target_fpr must be in (0,1), got {target_fpr}")
    xs = np.sort(np.asarray(null_scores, dtype=float))
    max_exceed = Fraction(target_fpr) * n
    for value in np.unique(xs):
        greater = n - int(np.searchsorted(xs, value, side="right"))
        if Fraction(greater) <= max_exceed:
            return CalibratedThreshold(value=float(value), target_fpr=target_fpr, n_calibration=n)
    raise CalibrationError("no feasible threshold")  # pragma: no cover


def tpr_at_fpr(positive_scores: Sequence[float], threshold: CalibratedThreshold) -> float:
    """Fraction of positive scores strictly above the calibrated threshold."""
    if len(positive_scores) < 1:
        raise BadConfigError("need at least one positive score")
    xs = np.asarray(positive_scores, dtype=float)
    return float(np.mean(xs > threshold.value))


def empirical_fpr(null_scores: Sequence[float], threshold: CalibratedThreshold) -> float:
    xs = np.asarray(null_scores, dtype=float)
    return float(np.mean(xs > threshold.value))


def z_filter(
    samples: Iterable[TextSample], cfg: SchemeConfig, z_min: float, vocab_size: int
) -> list[TextSample]:
    """Keep samples whose detection statistic reaches z_min."""
    return [s for s in samples if score(s, cfg, vocab_size).statistic >= z_min]


def write_scores_csv(path: str | Path, rows: Iterable[tuple[str, DetectionResult]]) -> None:
    """Export (sample_id, result) pairs with the frozen column layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "scheme_id", "statistic", "green_count", "token_count"])
        for sample_id, res in rows:
            writer.writerow(
                [sample_id, res.scheme_id, repr(res.statistic), res.green_count, res.token_count]
            )
