"""Rebuild a CollisionReport from previously emitted CSV files.

Only kinds, strengths, and TPR values survive the CSV round trip, which
is exactly what the summary findings and the TPR bar plot need; score
histograms require the original dataset and are skipped.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .harness import (
    CellResult,
    CollisionReport,
    ParaphraserBaseline,
    WatermarkerBaseline,
)
from .watermark import (
    DEFAULT_PARAPHRASER_KEY,
    DEFAULT_WATERMARKER_KEY,
    make_scheme,
)


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def report_from_csv(in_dir: str | Path) -> CollisionReport:
    in_dir = Path(in_dir)
    matrix = _read_rows(in_dir / "collision_matrix.csv")
    baselines = _read_rows(in_dir / "baselines.csv")
    p_base_path = in_dir / "paraphraser_baselines.csv"
    p_baselines = _read_rows(p_base_path) if p_base_path.exists() else []

    fprs = sorted({float(r["fpr_target"]) for r in matrix})
    w_specs, p_specs = [], []
    for r in matrix:
        if (r["w_kind"], r["w_strength"]) not in w_specs:
            w_specs.append((r["w_kind"], r["w_strength"]))
        if (r["p_kind"], r["p_strength"]) not in p_specs:
            p_specs.append((r["p_kind"], r["p_strength"]))
    w_schemes = [make_scheme(k, s, DEFAULT_WATERMARKER_KEY) for k, s in w_specs]
    p_schemes = [make_scheme(k, s, DEFAULT_PARAPHRASER_KEY) for k, s in p_specs]
    by_w = {(k, s): cfg for (k, s), cfg in zip(w_specs, w_schemes)}
    by_p = {(k, s): cfg for (k, s), cfg in zip(p_specs, p_schemes)}

    report = CollisionReport(fpr_targets=fprs, w_schemes=w_schemes, p_schemes=p_schemes)
    for r in matrix:
        w = by_w[(r["w_kind"], r["w_strength"])]
        p = by_p[(r["p_kind"], r["p_strength"])]
        report.cells[(w.scheme_id, p.scheme_id, float(r["fpr_target"]))] = CellResult(
            tpr_dw=float(r["tpr_dw"]), tpr_dp=float(r["tpr_dp"]), n_calibration=0,
        )
    for r in baselines:
        w = by_w.get((r["w_kind"], r["w_strength"]))
        if w is None:
            w = make_scheme(r["w_kind"], r["w_strength"], DEFAULT_WATERMARKER_KEY)
            by_w[(r["w_kind"], r["w_strength"])] = w
            report.w_schemes.append(w)
        report.baselines[(w.scheme_id, float(r["fpr_target"]))] = WatermarkerBaseline(
            tpr_tw=float(r["tpr_tw"]),
            tpr_tp_prime=float(r["tpr_tp_prime"]),
            tpr_tp=float(r["tpr_tp"]),
        )
    for r in p_baselines:
        p = by_p.get((r["p_kind"], r["p_strength"]))
        if p is None:
            continue
        probe = r["tpr_on_unwatermarked"]
        report.p_baselines[(p.scheme_id, float(r["fpr_target"]))] = ParaphraserBaseline(
            tpr_generation=float(r["tpr_generation"]),
            tpr_on_unwatermarked=float(probe) if probe else None,
        )
    return report
