"""Experiment orchestration: the full collision matrix and its reports.

`run_collision_matrix` builds the dataset, calibrates every detector on
its own unwatermarked nulls, and fills a TPR cell for each (watermarker,
paraphraser, FPR target) combination, plus the single-watermark baseline
tables.  `emit_report` freezes everything into CSV files, score
histograms, and a findings summary.

Emitted files (all CSVs versioned by their header row):

    collision_matrix.csv        w_kind, w_strength, p_kind, p_strength,
                                fpr_target, tpr_dw, tpr_dp
    baselines.csv               per-watermarker TPR of D_W on tw / tpprime / tp
    paraphraser_baselines.csv   per-paraphraser generation TPR and TPR on
                                paraphrased unwatermarked text
    thresholds.csv              calibrated threshold per detector and FPR
    calibration_check.csv       held-out empirical FPR per detector and FPR
    summary.txt                 directional findings, one per line
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig, save_config
from .dataset import (
    Dataset,
    build_dataset,
    generate_slice,
    paraphrase_slice,
    paraphraser_model,
    save_dataset,
)
from .detect import CalibratedThreshold, calibrate, empirical_fpr, score, tpr_at_fpr
from .pipeline import prompt_pool
from .toylm import TextSample, TokenModel, ingest_corpus, load_model, train_lm
from .watermark import SchemeConfig, Strength

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

MATRIX_COLUMNS = ["w_kind", "w_strength", "p_kind", "p_strength", "fpr_target", "tpr_dw", "tpr_dp"]
BASELINE_COLUMNS = ["w_kind", "w_strength", "fpr_target", "tpr_tw", "tpr_tp_prime", "tpr_tp"]
P_BASELINE_COLUMNS = ["p_kind", "p_strength", "fpr_target", "tpr_generation", "tpr_on_unwatermarked"]


@dataclass
class CellResult:
    tpr_dw: float
    tpr_dp: float
    n_calibration: int


@dataclass
class WatermarkerBaseline:
    tpr_tw: float
    tpr_tp_prime: float
    tpr_tp: float


@dataclass
class ParaphraserBaseline:
    tpr_generation: float
    tpr_on_unwatermarked: float | None


@dataclass
class CollisionReport:
    fpr_targets: list[float]
    w_schemes: list[SchemeConfig]
    p_schemes: list[SchemeConfig]
    # keyed by (w_id, p_id, fpr) / (w_id, fpr) / (p_id, fpr) / (scheme_id, fpr)
    cells: dict = field(default_factory=dict)
    baselines: dict = field(default_factory=dict)
    p_baselines: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    holdout_fpr: dict = field(default_factory=dict)
    dataset: Dataset | None = None

    def scheme_by_id(self, scheme_id: str) -> SchemeConfig:
        for cfg in self.w_schemes + self.p_schemes:
            if cfg.scheme_id == scheme_id:
                return cfg
        raise KeyError(scheme_id)


def _load_or_train(config: ExperimentConfig) -> TokenModel:
    if config.model_file:
        return load_model(config.model_file)
    vocab = ingest_corpus(config.corpus, config.max_vocab)
    return train_lm(config.corpus, vocab, config.order, config.alpha)


def run_collision_matrix(config: ExperimentConfig) -> CollisionReport:
    """Run the whole experiment described by `config`.

    Any per-cell failure aborts the run with an error naming the
    (watermarker, paraphraser) pair.
    """
    lm = _load_or_train(config)
    p_lm = paraphraser_model(config, lm)
    pool = prompt_pool(config.corpus, lm)
    vocab_size = lm.vocab.size

    logger.info("building dataset (n=%d per slice)", config.n_samples)
    ds = build_dataset(config, lm, p_lm, pool)

    common = dict(
        master_seed=config.master_seed,
        max_new_tokens=config.max_new_tokens,
        temperature=config.temperature,
        min_tokens=config.min_sample_tokens,
        max_attempts_factor=config.max_attempts_factor,
    )

    def null_pool(n: int, salt: str) -> list[TextSample]:
        # Detectors face two unwatermarked text classes, fresh generations
        # and plain rewrites; their structural null rates differ slightly,
        # so thresholds are calibrated on an even mixture of both.
        half = n // 2
        gens = generate_slice(lm, None, pool, n - half,
                              salt=f"{salt}gen", id_prefix=f"{salt}gen", **common)
        sources = generate_slice(lm, None, pool, half,
                                 salt=f"{salt}src", id_prefix=f"{salt}src", **common)
        paras = paraphrase_slice(
            p_lm, sources, None,
            retention_rate=config.retention_rate,
            retention_block=config.retention_block,
            copy_fidelity=config.copy_fidelity,
            fresh_rate=config.fresh_rate,
            temperature=config.temperature,
            id_prefix=f"{salt}para",
        )
        return gens + paras

    logger.info("generating calibration and holdout nulls (%d + %d)",
                config.n_calibration, config.n_holdout)
    cal = null_pool(config.n_calibration, "cal")
    holdout = null_pool(config.n_holdout, "holdout")
    ds.extend(cal)
    ds.extend(holdout)

    # single-watermark reference generations for the paraphraser-side schemes
    pgen: dict[str, list[TextSample]] = {}
    for p in config.paraphraser_schemes():
        ds.add_scheme(p)
        pgen[p.scheme_id] = generate_slice(
            lm, p, pool, config.n_samples,
            salt=f"pgen/{p.scheme_id}", id_prefix=f"pgen/{p.scheme_id}",
            z_min=config.z_min_for(p.kind), **common,
        )
        ds.extend(pgen[p.scheme_id])

    # watermarked paraphrases of unwatermarked text, for the weak-probe view
    probe: dict[str, list[TextSample]] = {}
    if config.weak_probe:
        probe_src = generate_slice(lm, None, pool, config.n_samples,
                                   salt="probesrc", id_prefix="probesrc", **common)
        ds.extend(probe_src)
        for p in config.paraphraser_schemes():
            probe[p.scheme_id] = paraphrase_slice(
                p_lm, probe_src, p,
                retention_rate=config.retention_rate,
                retention_block=config.retention_block,
                copy_fidelity=config.copy_fidelity,
                fresh_rate=config.fresh_rate,
                temperature=config.temperature,
                id_prefix=f"probe/{p.scheme_id}",
            )
            ds.extend(probe[p.scheme_id])

    report = CollisionReport(
        fpr_targets=list(config.fpr_targets),
        w_schemes=config.watermarker_schemes(),
        p_schemes=config.paraphraser_schemes(),
        dataset=ds,
    )

    def stats(samples: list[TextSample], detector: SchemeConfig) -> list[float]:
        return [score(s, detector, vocab_size).statistic for s in samples]

    cal_scores: dict[str, list[float]] = {}
    for detector in report.w_schemes + report.p_schemes:
        did = detector.scheme_id
        logger.info("calibrating detector %s", did)
        cal_scores[did] = stats(cal, detector)
        hold = stats(holdout, detector)
        for fpr in config.fpr_targets:
            thr = calibrate(cal_scores[did], fpr)
            report.thresholds[(did, fpr)] = thr
            report.holdout_fpr[(did, fpr)] = empirical_fpr(hold, thr)

    pair_ids = [(w.scheme_id, p.scheme_id) for w, p in config.scheme_pairs()]
    for w in report.w_schemes:
        wid = w.scheme_id
        logger.info("scoring watermarker %s", wid)
        tw_scores = stats(ds.in_slice(f"tw/{wid}"), w)
        tpprime_scores = stats(ds.in_slice(f"tpprime/{wid}"), w)
        tp_pooled: list[float] = []
        for p in report.p_schemes:
            pid = p.scheme_id
            if (wid, pid) not in pair_ids:
                continue
            try:
                tp_samples = ds.in_slice(f"tp/{wid}/{pid}")
                dw_scores = stats(tp_samples, w)
                dp_scores = stats(tp_samples, p)
            except Exception as exc:
                raise RuntimeError(f"cell (w={wid}, p={pid}) failed: {exc}") from exc
            tp_pooled.extend(dw_scores)
            for fpr in config.fpr_targets:
                report.cells[(wid, pid, fpr)] = CellResult(
                    tpr_dw=tpr_at_fpr(dw_scores, report.thresholds[(wid, fpr)]),
                    tpr_dp=tpr_at_fpr(dp_scores, report.thresholds[(pid, fpr)]),
                    n_calibration=report.thresholds[(wid, fpr)].n_calibration,
                )
        for fpr in config.fpr_targets:
            thr = report.thresholds[(wid, fpr)]
            report.baselines[(wid, fpr)] = WatermarkerBaseline(
                tpr_tw=tpr_at_fpr(tw_scores, thr),
                tpr_tp_prime=tpr_at_fpr(tpprime_scores, thr),
                tpr_tp=tpr_at_fpr(tp_pooled, thr),
            )

    for p in report.p_schemes:
        pid = p.scheme_id
        gen_scores = stats(pgen[pid], p)
        probe_scores = stats(probe[pid], p) if pid in probe else None
        for fpr in config.fpr_targets:
            thr = report.thresholds[(pid, fpr)]
            report.p_baselines[(pid, fpr)] = ParaphraserBaseline(
                tpr_generation=tpr_at_fpr(gen_scores, thr),
                tpr_on_unwatermarked=(
                    tpr_at_fpr(probe_scores, thr) if probe_scores is not None else None
                ),
            )
    return report


@dataclass
class Finding:
    name: str
    held: bool | None  # None when the grid lacks the needed cells
    detail: str

    def line(self) -> str:
        status = "n/a" if self.held is None else ("yes" if self.held else "no")
        return f"finding {self.name} held={status} {self.detail}"


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def compute_findings(report: CollisionReport, fpr: float | None = None) -> list[Finding]:
    """Directional findings at one FPR target (default: the smallest)."""
    if fpr is None:
        fpr = min(report.fpr_targets)
    cells = report.cells
    out: list[Finding] = []

    tp = [report.baselines[(w.scheme_id, fpr)].tpr_tp for w in report.w_schemes]
    tpp = [report.baselines[(w.scheme_id, fpr)].tpr_tp_prime for w in report.w_schemes]
    out.append(
        Finding(
            "watermarked_paraphrase_stronger_attack",
            _mean(tp) < _mean(tpp),
            f"mean_tpr_dw(tp)={_mean(tp):.4f} mean_tpr_dw(tpprime)={_mean(tpp):.4f} fpr={fpr}",
        )
    )

    def dw_under(strength: Strength) -> list[float]:
        return [
            cells[(w.scheme_id, p.scheme_id, fpr)].tpr_dw
            for w in report.w_schemes
            for p in report.p_schemes
            if p.strength_label is strength and (w.scheme_id, p.scheme_id, fpr) in cells
        ]

    strong_dw = dw_under(Strength.STRONG)
    weak_dw = dw_under(Strength.WEAK)
    if strong_dw and weak_dw:
        out.append(
            Finding(
                "upstream_erasure_by_strong_paraphraser",
                _mean(strong_dw) < _mean(weak_dw),
                f"mean_tpr_dw(strong_p)={_mean(strong_dw):.4f} "
                f"mean_tpr_dw(weak_p)={_mean(weak_dw):.4f} fpr={fpr}",
            )
        )
    else:
        out.append(Finding("upstream_erasure_by_strong_paraphraser", None, "needs both strengths"))

    ww = [
        (w, p)
        for w in report.w_schemes
        for p in report.p_schemes
        if w.strength_label is Strength.WEAK
        and p.strength_label is Strength.WEAK
        and (w.scheme_id, p.scheme_id, fpr) in cells
    ]
    if ww:
        dw_drop = _mean(
            [
                report.baselines[(w.scheme_id, fpr)].tpr_tw
                - cells[(w.scheme_id, p.scheme_id, fpr)].tpr_dw
                for w, p in ww
            ]
        )
        dp_drop = _mean(
            [
                report.p_baselines[(p.scheme_id, fpr)].tpr_generation
                - cells[(w.scheme_id, p.scheme_id, fpr)].tpr_dp
                for w, p in ww
            ]
        )
        out.append(
            Finding(
                "weak_weak_competition",
                dw_drop > 0 and dp_drop > 0,
                f"mean_dw_drop={dw_drop:.4f} mean_dp_drop={dp_drop:.4f} fpr={fpr}",
            )
        )
    else:
        out.append(Finding("weak_weak_competition", None, "needs weak/weak cells"))

    probe_rows = [
        (p, report.p_baselines[(p.scheme_id, fpr)].tpr_on_unwatermarked)
        for p in report.p_schemes
        if p.strength_label is Strength.WEAK
        and report.p_baselines[(p.scheme_id, fpr)].tpr_on_unwatermarked is not None
    ]
    strong_w = [w for w in report.w_schemes if w.strength_label is Strength.STRONG]
    if probe_rows and strong_w:
        on_wm = _mean(
            [
                cells[(w.scheme_id, p.scheme_id, fpr)].tpr_dp
                for p, _ in probe_rows
                for w in strong_w
                if (w.scheme_id, p.scheme_id, fpr) in cells
            ]
        )
        on_plain = _mean([t for _, t in probe_rows])
        out.append(
            Finding(
                "weak_watermark_harder_on_watermarked_text",
                on_wm < on_plain,
                f"mean_tpr_dp(on_strong_tw)={on_wm:.4f} mean_tpr_dp(on_plain)={on_plain:.4f} fpr={fpr}",
            )
        )
    else:
        out.append(
            Finding("weak_watermark_harder_on_watermarked_text", None, "needs weak probe slices")
        )
    return out


def _write_csv(path: Path, columns: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(x)


def emit_report(report: CollisionReport, out_dir: str | Path, *, plots: bool = True) -> list[Path]:
    """Write CSVs, plots, and the findings summary; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    rows = []
    for w in report.w_schemes:
        for p in report.p_schemes:
            for fpr in report.fpr_targets:
                key = (w.scheme_id, p.scheme_id, fpr)
                if key not in report.cells:
                    continue
                cell = report.cells[key]
                rows.append([
                    w.kind.value, w.strength_label.value,
                    p.kind.value, p.strength_label.value,
                    repr(fpr), _fmt(cell.tpr_dw), _fmt(cell.tpr_dp),
                ])
    path = out / "collision_matrix.csv"
    _write_csv(path, MATRIX_COLUMNS, rows)
    written.append(path)

    rows = []
    for w in report.w_schemes:
        for fpr in report.fpr_targets:
            base = report.baselines[(w.scheme_id, fpr)]
            rows.append([
                w.kind.value, w.strength_label.value, repr(fpr),
                _fmt(base.tpr_tw), _fmt(base.tpr_tp_prime), _fmt(base.tpr_tp),
            ])
    path = out / "baselines.csv"
    _write_csv(path, BASELINE_COLUMNS, rows)
    written.append(path)

    rows = []
    for p in report.p_schemes:
        for fpr in report.fpr_targets:
            if (p.scheme_id, fpr) not in report.p_baselines:
                continue
            base = report.p_baselines[(p.scheme_id, fpr)]
            rows.append([
                p.kind.value, p.strength_label.value, repr(fpr),
                _fmt(base.tpr_generation), _fmt(base.tpr_on_unwatermarked),
            ])
    path = out / "paraphraser_baselines.csv"
    _write_csv(path, P_BASELINE_COLUMNS, rows)
    written.append(path)

    rows = []
    side = {w.scheme_id: "watermarker" for w in report.w_schemes}
    side.update({p.scheme_id: "paraphraser" for p in report.p_schemes})
    for (sid, fpr), thr in report.thresholds.items():
        cfg = report.scheme_by_id(sid)
        rows.append([
            sid, side[sid], cfg.kind.value, cfg.strength_label.value,
            repr(fpr), repr(thr.value), thr.n_calibration,
        ])
    path = out / "thresholds.csv"
    _write_csv(
        path,
        ["scheme_id", "side", "kind", "strength", "fpr_target", "threshold", "n_calibration"],
        rows,
    )
    written.append(path)

    if report.holdout_fpr:
        rows = []
        for (sid, fpr), value in report.holdout_fpr.items():
            cfg = report.scheme_by_id(sid)
            rows.append([
                sid, side[sid], cfg.kind.value, cfg.strength_label.value,
                repr(fpr), repr(value),
            ])
        path = out / "calibration_check.csv"
        _write_csv(
            path,
            ["scheme_id", "side", "kind", "strength", "fpr_target", "holdout_fpr"],
            rows,
        )
        written.append(path)

    findings = compute_findings(report)
    path = out / "summary.txt"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"wmcollide report schema_version={REPORT_SCHEMA_VERSION}\n")
        fh.write(f"fpr_targets={report.fpr_targets}\n")
        for finding in findings:
            fh.write(finding.line() + "\n")
    written.append(path)

    if plots:
        written.extend(_emit_plots(report, out))
    return written


def _emit_plots(report: CollisionReport, out: Path) -> list[Path]:
    from .plots import plot_cell_histogram, plot_tpr_bars

    written = []
    ds = report.dataset
    if ds is not None:
        vocab_size = ds.vocab_size
        null_scores: dict[str, list[float]] = {}
        # a few hundred nulls are plenty for an illustrative histogram
        cal = (ds.in_slice("calgen") + ds.in_slice("calpara"))[:500]
        for w, p in [(w, p) for w in report.w_schemes for p in report.p_schemes]:
            wid, pid = w.scheme_id, p.scheme_id
            if (wid, pid, report.fpr_targets[0]) not in report.cells:
                continue
            tp_samples = ds.in_slice(f"tp/{wid}/{pid}")
            if not tp_samples:
                continue
            if wid not in null_scores:
                null_scores[wid] = [score(s, w, vocab_size).statistic for s in cal]
            scores = {
                "tp_dw": [score(s, w, vocab_size).statistic for s in tp_samples],
                "null_dw": null_scores[wid],
            }
            thresholds = [
                (fpr, report.thresholds[(wid, fpr)].value) for fpr in report.fpr_targets
            ]
            path = out / f"hist_{wid}_{pid}.png"
            plot_cell_histogram(scores, thresholds, f"{wid} vs {pid}", path)
            written.append(path)
    path = out / "tpr_bars.png"
    plot_tpr_bars(report, path)
    written.append(path)
    return written
