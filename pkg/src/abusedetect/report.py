"""Comparison tables and plots for cross-validation reports."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .eval import CvReport  # noqa: E402
from .models.config import TABLE_ORDER  # noqa: E402

ROW_LABELS = (
    ("precision", "Average Precision"),
    ("recall", "Average Recall"),
    ("accuracy", "Average Accuracy"),
    ("f1", "Average F1-score"),
    ("auc", "Average AUC"),
    ("train_seconds", "Avg Training time (sec)"),
    ("predict_seconds", "Avg Pred. time (sec)"),
)

_KIND_RANK = {k: i for i, k in enumerate(TABLE_ORDER)}

matplotlib.rcParams["svg.hashsalt"] = "abusedetect"
_SAVE_META = {"png": {"Software": None}, "svg": {"Date": None, "Creator": None}}


def table_order(reports: Sequence[CvReport]) -> list[CvReport]:
    return sorted(reports, key=lambda r: (_KIND_RANK[r.model_kind], r.feature_kind.value))


def comparison_rows(reports: Sequence[CvReport]) -> tuple[list[str], list[list[str]]]:
    """Header and rows of the comparison table: one metric per row, one model per column."""
    header = ["Metric"] + [r.label for r in reports]
    avgs = [r.average for r in reports]
    rows = []
    for key, title in ROW_LABELS:
        fmt = "{:.2f}" if key.endswith("seconds") else "{:.3f}"
        rows.append([title] + [fmt.format(getattr(a, key)) for a in avgs])
    return header, rows


def format_table(reports: Sequence[CvReport]) -> str:
    header, rows = comparison_rows(reports)
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for r in [header, *rows]:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if r is header:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines)


def table_csv(reports: Sequence[CvReport]) -> str:
    header, rows = comparison_rows(reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def summary_line(report: CvReport) -> str:
    """Averaged metrics of one report in table row order, rounded to 3 decimals."""
    a = report.average
    return (f"{report.label:<18} P={a.precision:.3f} R={a.recall:.3f} ACC={a.accuracy:.3f} "
            f"F1={a.f1:.3f} AUC={a.auc:.3f} train={a.train_seconds:.2f}s pred={a.predict_seconds:.2f}s")


def checksum_warning(reports: Sequence[CvReport]) -> str | None:
    sums = {r.corpus_checksum for r in reports}
    if len(sums) > 1:
        return "WARNING: reports were computed on different corpora; columns are not directly comparable"
    return None


def _save(fig, stem: Path) -> list[Path]:
    out = []
    for ext in ("png", "svg"):
        p = stem.with_suffix("." + ext)
        fig.savefig(p, format=ext, metadata=_SAVE_META[ext], dpi=100)
        out.append(p)
    plt.close(fig)
    return out


def plot_roc(reports: Sequence[CvReport], stem) -> list[Path]:
    """Overlay the pooled-score ROC curve of each report."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    for r in reports:
        if r.roc is None:
            continue
        ax.plot(r.roc.fpr, r.roc.tpr, label=f"{r.label} (AUC={r.average.auc:.3f})")
    ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=0.8)
    ax.set_xlabel("False Positive Rate")
    ax.set_ylabel("True Positive Rate")
    ax.set_title("ROC curves (pooled fold scores)")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    fig.tight_layout()
    return _save(fig, Path(stem))


def plot_confusion(report: CvReport, stem) -> list[Path]:
    """Confusion matrix summed over all test folds."""
    total = report.confusions[0]
    for cm in report.confusions[1:]:
        total = total + cm
    grid = np.array([[total.tn, total.fp], [total.fn, total.tp]])
    fig, ax = plt.subplots(figsize=(4, 3.6))
    ax.imshow(grid, cmap="Blues")
    for i in range(2):
        for j in range(2):
            ax.text(j, i, f"{grid[i, j]:,}", ha="center", va="center",
                    color="white" if grid[i, j] > grid.max() / 2 else "black")
    ticks = ["Non-abusive", "Abusive"]
    ax.set_xticks([0, 1], ticks)
    ax.set_yticks([0, 1], ticks)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("Actual")
    ax.set_title(f"{report.label} (all folds)")
    fig.tight_layout()
    return _save(fig, Path(stem))
