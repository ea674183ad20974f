#!/usr/bin/env python3
"""Recompute the directional findings from emitted CSVs alone.

Deliberately standalone (stdlib only, no wmcollide import) so it can
audit a report directory independently: it parses collision_matrix.csv,
baselines.csv, and paraphraser_baselines.csv, rebuilds each finding
flag, and compares against summary.txt.  Exits nonzero on any mismatch.

Usage: check_findings.py <report_dir>
"""

import csv
import re
import sys
from pathlib import Path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs)


def recompute(report_dir: Path) -> dict:
    matrix = read_rows(report_dir / "collision_matrix.csv")
    baselines = read_rows(report_dir / "baselines.csv")
    p_path = report_dir / "paraphraser_baselines.csv"
    p_baselines = read_rows(p_path) if p_path.exists() else []

    fpr = min(float(r["fpr_target"]) for r in matrix)
    cells = [r for r in matrix if float(r["fpr_target"]) == fpr]
    base = {(r["w_kind"], r["w_strength"]): r
            for r in baselines if float(r["fpr_target"]) == fpr}
    p_base = {(r["p_kind"], r["p_strength"]): r
              for r in p_baselines if float(r["fpr_target"]) == fpr}

    flags = {}
    flags["watermarked_paraphrase_stronger_attack"] = mean(
        float(r["tpr_tp"]) for r in base.values()
    ) < mean(float(r["tpr_tp_prime"]) for r in base.values())

    strong = [float(r["tpr_dw"]) for r in cells if r["p_strength"] == "strong"]
    weak = [float(r["tpr_dw"]) for r in cells if r["p_strength"] == "weak"]
    if strong and weak:
        flags["upstream_erasure_by_strong_paraphraser"] = mean(strong) < mean(weak)

    ww = [r for r in cells if r["w_strength"] == "weak" and r["p_strength"] == "weak"]
    if ww:
        dw_drop = mean(
            float(base[(r["w_kind"], "weak")]["tpr_tw"]) - float(r["tpr_dw"]) for r in ww
        )
        dp_drop = mean(
            float(p_base[(r["p_kind"], "weak")]["tpr_generation"]) - float(r["tpr_dp"])
            for r in ww
        )
        flags["weak_weak_competition"] = dw_drop > 0 and dp_drop > 0

    probes = {
        k: float(r["tpr_on_unwatermarked"])
        for k, r in p_base.items()
        if k[1] == "weak" and r["tpr_on_unwatermarked"]
    }
    on_wm = [
        float(r["tpr_dp"])
        for r in cells
        if r["w_strength"] == "strong" and (r["p_kind"], "weak") in probes
        and r["p_strength"] == "weak"
    ]
    if probes and on_wm:
        flags["weak_watermark_harder_on_watermarked_text"] = (
            mean(on_wm) < mean(probes.values())
        )
    return flags


def parse_summary(report_dir: Path) -> dict:
    flags = {}
    pattern = re.compile(r"^finding (\S+) held=(yes|no|n/a)")
    for line in (report_dir / "summary.txt").read_text().splitlines():
        m = pattern.match(line)
        if m and m.group(2) != "n/a":
            flags[m.group(1)] = m.group(2) == "yes"
    return flags


def main() -> int:
    if len(sys.argv) != 2:
        print(__doc__)
        return 2
    report_dir = Path(sys.argv[1])
    expected = recompute(report_dir)
    stated = parse_summary(report_dir)
    bad = 0
    for name, value in expected.items():
        if name not in stated:
            print(f"MISSING {name}: summary has no flag, recomputed {value}")
            bad += 1
        elif stated[name] != value:
            print(f"MISMATCH {name}: summary says {stated[name]}, CSVs say {value}")
            bad += 1
        else:
            print(f"ok {name} = {value}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
