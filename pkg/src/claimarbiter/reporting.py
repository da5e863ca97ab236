"""Report rendering: metric tables, per-claim CSV, and matplotlib figures."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be pinned first

from claimarbiter.core import Stance
from claimarbiter.evaluation import UNVERIFIABLE, LabeledDataset, MetricReport
from claimarbiter.pipeline import VerdictRecord


def format_metric_table(report: MetricReport) -> str:
    """Fixed-width, human-readable summary of a metric report."""
    rows = [f"{'class':<10} {'precision':>9} {'recall':>9} {'f1':>9}"]
    for stance in (Stance.SUPPORT, Stance.REFUTE):
        metrics = report.per_class[stance]
        rows.append(
            f"{stance.value:<10} {float(metrics.precision):>9.3f}"
            f" {float(metrics.recall):>9.3f} {float(metrics.f1):>9.3f}"
        )
    rows.append(
        f"{'macro':<10} {float(report.macro_precision):>9.3f}"
        f" {float(report.macro_recall):>9.3f} {float(report.macro_f1):>9.3f}"
    )
    rows.append("")
    coverage = "n/a" if report.coverage is None else f"{float(report.coverage):.3f}"
    stage1 = "n/a" if report.stage1_f1 is None else f"{float(report.stage1_f1):.3f}"
    rows.append(
        f"claims: {report.total}   unverifiable: {report.unverifiable_count}"
        f"   stage-1 coverage: {coverage}   stage-1 macro-F1: {stage1}"
    )
    return "\n".join(rows)


def write_results_csv(records: Sequence[VerdictRecord], gold: LabeledDataset | None,
                      path: str | Path) -> Path:
    """Write one delimited row per claim next to the figures."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = gold.labels_by_id() if gold is not None else {}
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["claim_id", "gold_label", "verdict", "decided_by", "sigma", "sigma_float",
             "normalizer_z", "rounds_used", "forced", "unverifiable_reason"]
        )
        for record in records:
            gold_label = labels.get(record.claim_id)
            writer.writerow([
                record.claim_id,
                gold_label.value if gold_label else "",
                record.verdict.value if record.verdict else UNVERIFIABLE,
                record.decided_by.value if record.decided_by else "",
                str(record.sigma) if record.sigma is not None else "",
                f"{float(record.sigma):.6f}" if record.sigma is not None else "",
                str(record.normalizer_z) if record.normalizer_z is not None else "",
                record.rounds_used if record.rounds_used is not None else "",
                record.forced if record.forced is not None else "",
                record.unverifiable_reason or "",
            ])
    return path


def render_confusion_matrix(report: MetricReport, path: str | Path) -> Path:
    """Gold-by-predicted counts, including the unverifiable column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    gold_labels = [Stance.SUPPORT.value, Stance.REFUTE.value]
    pred_labels = [Stance.SUPPORT.value, Stance.REFUTE.value, UNVERIFIABLE]
    grid = [[report.confusion[g][p] for p in pred_labels] for g in gold_labels]

    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    image = ax.imshow(grid, cmap="Blues")
    ax.set_xticks(range(len(pred_labels)), pred_labels)
    ax.set_yticks(range(len(gold_labels)), gold_labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    ax.set_title("confusion matrix")
    peak = max((max(row) for row in grid), default=0)
    for row_index, row in enumerate(grid):
        for col_index, count in enumerate(row):
            color = "white" if peak and count > peak / 2 else "black"
            ax.text(col_index, row_index, str(count), ha="center", va="center", color=color)
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_sigma_histogram(records: Sequence[VerdictRecord], tau: float,
                           path: str | Path) -> Path:
    """Distribution of agreement scores with the gate thresholds marked."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sigmas = [float(record.sigma) for record in records if record.sigma is not None]

    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    if sigmas:
        ax.hist(sigmas, bins=21, range=(-1.0, 1.0), color="#4878a8", edgecolor="white")
    else:
        ax.text(0.5, 0.5, "no scored claims", ha="center", va="center",
                transform=ax.transAxes)
    ax.axvline(tau, color="#b04a4a", linestyle="--", label=f"gate at ±{tau:g}")
    ax.axvline(-tau, color="#b04a4a", linestyle="--")
    ax.set_xlabel("agreement score")
    ax.set_ylabel("claims")
    ax.set_title("agreement score distribution")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_stage_breakdown(records: Sequence[VerdictRecord], path: str | Path) -> Path:
    """How many claims each decision path handled."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {"stage1": 0, "stage2": 0, "fallback": 0, UNVERIFIABLE: 0}
    for record in records:
        if record.decided_by is None:
            counts[UNVERIFIABLE] += 1
        else:
            counts[record.decided_by.value] += 1

    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    names = list(counts)
    values = [counts[name] for name in names]
    bars = ax.bar(names, values, color=["#4878a8", "#6a9a58", "#c8a24a", "#b04a4a"])
    ax.bar_label(bars)
    ax.set_ylabel("claims")
    ax.set_title("decision path breakdown")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report_figures(report: MetricReport, records: Sequence[VerdictRecord],
                          tau: float, out_dir: str | Path) -> list[Path]:
    """Render the standard figure set into out_dir; returns the paths."""
    out_dir = Path(out_dir)
    return [
        render_confusion_matrix(report, out_dir / "confusion_matrix.png"),
        render_sigma_histogram(records, tau, out_dir / "sigma_distribution.png"),
        render_stage_breakdown(records, out_dir / "stage_breakdown.png"),
    ]
