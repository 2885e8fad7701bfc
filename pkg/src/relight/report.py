"""Delimited report files and companion figures for the harness commands."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import AblationRow, BenchResult


def write_ablation_csv(rows: list[AblationRow], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "mean_final_loss", "mean_fit_seconds"])
        for row in rows:
            writer.writerow([row.label, repr(row.mean_final_loss), f"{row.mean_fit_seconds:.4f}"])


def write_ablation_figure(rows: list[AblationRow], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [row.label for row in rows]
    losses = [row.mean_final_loss for row in rows]
    ax.plot(range(len(rows)), losses, "o-", color="tab:blue")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=20)
    ax.set_ylabel("mean final loss")
    ax.set_xlabel("configuration")
    ax.set_title("Fit quality per configuration")
    ax.grid(True, alpha=0.3)
    ax2 = ax.twinx()
    ax2.bar(range(len(rows)), [row.mean_fit_seconds for row in rows], alpha=0.2, color="tab:orange")
    ax2.set_ylabel("mean fit seconds")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_bench_csv(result: BenchResult, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value_ms"])
        writer.writerow(["render_min", f"{result.min_ms:.4f}"])
        writer.writerow(["render_median", f"{result.median_ms:.4f}"])
        writer.writerow(["render_mean", f"{result.mean_ms:.4f}"])
        writer.writerow(["resize", f"{result.resize_ms:.4f}"])
        writer.writerow(["fit", f"{result.fit_ms:.4f}"])
        for n in sorted(result.amortized_ms):
            writer.writerow([f"amortized_n{n}", f"{result.amortized_ms[n]:.4f}"])


def write_bench_figure(result: BenchResult, path: str) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(result.render_ms, "o-", color="tab:blue")
    ax1.axhline(result.median_ms, color="tab:orange", linestyle="--", label="median")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("ms per frame")
    ax1.set_title(f"Render {result.width}x{result.height}, k={result.k}, {result.threads} threads")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    ns = sorted(result.amortized_ms)
    ax2.bar([str(n) for n in ns], [result.amortized_ms[n] for n in ns], color="tab:green", alpha=0.7)
    ax2.set_xlabel("keyframe interval")
    ax2.set_ylabel("amortized ms per frame")
    ax2.set_title("Amortized cost per keyframe interval")
    ax2.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
