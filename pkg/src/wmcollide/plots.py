"""Plot emission behind a small function interface.

matplotlib is imported lazily so headless report paths stay cheap when
plots are disabled.
"""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_cell_histogram(
    score_sets: dict[str, list[float]],
    thresholds: list[tuple[float, float]],
    title: str,
    path: str | Path,
) -> None:
    """Overlaid score histograms with calibrated-threshold markers."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, scores in score_sets.items():
        ax.hist(scores, bins=40, alpha=0.55, label=label, density=True)
    for fpr, value in thresholds:
        ax.axvline(value, linestyle="--", linewidth=1.0, color="black")
        ax.text(value, ax.get_ylim()[1] * 0.95, f"{fpr:g}", fontsize=7, rotation=90)
    ax.set_xlabel("detection statistic")
    ax.set_ylabel("density")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_tpr_bars(report, path: str | Path) -> None:
    """TPR per cell at the smallest FPR target, grouped by watermarker."""
    plt = _pyplot()
    fpr = min(report.fpr_targets)
    labels, dw, dp = [], [], []
    for w in report.w_schemes:
        for p in report.p_schemes:
            key = (w.scheme_id, p.scheme_id, fpr)
            if key not in report.cells:
                continue
            labels.append(f"{w.kind.value}-{w.strength_label.value[0]}\n"
                          f"{p.kind.value}-{p.strength_label.value[0]}")
            dw.append(report.cells[key].tpr_dw)
            dp.append(report.cells[key].tpr_dp)
    if not labels:
        return
    x = range(len(labels))
    fig, ax = plt.subplots(figsize=(max(8, 0.45 * len(labels)), 4))
    ax.bar([i - 0.2 for i in x], dw, width=0.4, label="D_W")
    ax.bar([i + 0.2 for i in x], dp, width=0.4, label="D_P")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=6)
    ax.set_ylabel(f"TPR at FPR={fpr:g}")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
