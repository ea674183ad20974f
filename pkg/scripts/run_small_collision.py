#!/usr/bin/env python3
"""End-to-end demo at reduced scale (~1 minute on one core).

Synthesizes a corpus, runs a 2-kind collision matrix with 40 samples per
condition, and writes the report to ./demo-out (or argv[1]).
"""

import sys
import tempfile
from pathlib import Path

from wmcollide.config import ExperimentConfig, save_config
from wmcollide.corpus import synthesize_corpus
from wmcollide.dataset import save_dataset
from wmcollide.harness import compute_findings, emit_report, run_collision_matrix


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-out")
    corpus = Path(tempfile.mkdtemp()) / "corpus.txt"
    print(f"synthesizing corpus -> {corpus}")
    synthesize_corpus(corpus)
    config = ExperimentConfig(
        corpus=str(corpus),
        kinds=["kgw", "prw"],
        n_samples=40,
        n_calibration=400,
        n_holdout=400,
        master_seed=20240001,
        out_dir=str(out_dir),
    )
    print("running collision matrix (this takes a minute)...")
    report = run_collision_matrix(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, out_dir / "config.toml")
    save_dataset(report.dataset, out_dir / "dataset.jsonl")
    emit_report(report, out_dir)
    print(f"\nreport written to {out_dir}/")
    for finding in compute_findings(report):
        print(" ", finding.line())
    return 0


if __name__ == "__main__":
    sys.exit(main())
