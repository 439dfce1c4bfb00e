"""Report figures (PNG) with a CSV of the plotted data next to each."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (7.0, 4.0),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
})


def _write_csv(path: Path, header, rows) -> Path:
    path = path.with_suffix(".csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def plot_drift(reports, path) -> tuple[Path, Path]:
    """Accuracy and heavy-class precision/recall per window, one panel per resource."""
    path = Path(path)
    rows = [(r.window_index, r.resource, r.accuracy, r.heavy_precision, r.heavy_recall, int(r.retrain_triggered))
            for r in reports]
    csv_path = _write_csv(path, ["window_index", "resource", "accuracy", "heavy_precision", "heavy_recall",
                                 "retrain_triggered"], rows)
    resources = sorted({r.resource for r in reports}, key=["cpu", "memory"].index)
    fig, axes = plt.subplots(1, len(resources), sharey=True, squeeze=False, figsize=(7.0 * len(resources) / 1.5, 4))
    for ax, res in zip(axes[0], resources):
        sub = [r for r in reports if r.resource == res]
        w = [r.window_index for r in sub]
        ax.plot(w, [r.accuracy for r in sub], "o-", label="accuracy")
        ax.plot(w, [r.heavy_precision for r in sub], "s--", label="heavy precision")
        ax.plot(w, [r.heavy_recall for r in sub], "^:", label="heavy recall")
        for r in sub:
            if r.retrain_triggered:
                ax.axvline(r.window_index, color="tab:red", alpha=0.4)
        ax.axhline(0.9, color="grey", lw=0.8, ls="-.")
        ax.set_title(f"{res} model")
        ax.set_xlabel("window")
        ax.set_xticks(w)
    axes[0][0].set_ylabel("score")
    axes[0][0].legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path, csv_path


def plot_imbalance(reports, path) -> tuple[Path, Path]:
    """Load imbalance over time for each simulated policy."""
    path = Path(path)
    n = max(len(r.imbalance_series) for r in reports)
    rows = [[t] + [r.imbalance_series[t] if t < len(r.imbalance_series) else "" for r in reports] for t in range(n)]
    csv_path = _write_csv(path, ["tick"] + [r.policy for r in reports], rows)
    fig, ax = plt.subplots()
    for r in reports:
        ax.plot(r.imbalance_series, lw=0.8, label=f"{r.policy} (max {r.max_imbalance:.1f})")
    ax.set_xlabel("tick")
    ax.set_ylabel("load imbalance (ticks of backlog)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path, csv_path


def plot_class_distribution(distribution, path) -> tuple[Path, Path]:
    """Bar chart of class counts per resource, as returned by ``class_distribution``."""
    path = Path(path)
    rows = [(res, lab, cnt) for res, counts in distribution.items() for lab, cnt in counts.items()]
    csv_path = _write_csv(path, ["resource", "class", "count"], rows)
    fig, axes = plt.subplots(1, len(distribution), squeeze=False)
    for ax, (res, counts) in zip(axes[0], distribution.items()):
        ax.bar(list(counts), list(counts.values()))
        ax.set_title(res)
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path, csv_path
