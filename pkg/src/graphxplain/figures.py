"""Figure rendering for evaluation reports.

Kept out of the evaluation module on purpose: evaluation emits CSV/JSON
only, and the CLI report path calls into here to drop a PNG next to each
delimited file. Everything renders through the Agg backend so the CLI
works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError
from .evaluation import CorrelationStudy, FidelityReport, ThroughputReport


def figure_path(data_path) -> str:
    """PNG sibling of a CSV/JSON report file."""
    text = str(data_path)
    stem = text.rsplit(".", 1)[0] if "." in text.rsplit("/", 1)[-1] else text
    return stem + ".png"


def plot_fidelity(path, reports: list[FidelityReport]) -> str:
    """Fidelity+ and Fidelity- versus sparsity, one line per method."""
    if not reports:
        raise DataError("no fidelity reports to plot")
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6), sharex=True)
    for report in reports:
        for ax, mean, std in (
            (axes[0], report.plus_mean(), report.plus_std()),
            (axes[1], report.minus_mean(), report.minus_std()),
        ):
            band = std / np.sqrt(max(report.n_targets, 1))
            ax.plot(report.grid, mean, marker="o", markersize=3, label=report.method)
            ax.fill_between(report.grid, mean - band, mean + band, alpha=0.15)
    axes[0].set_ylabel("Fidelity+")
    axes[1].set_ylabel("Fidelity-")
    for ax in axes:
        ax.set_xlabel("sparsity")
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    out = figure_path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_correlation(path, studies: list[CorrelationStudy]) -> str:
    """Attribution-vs-Fidelity+ scatter with the Pearson r per method."""
    if not studies:
        raise DataError("no correlation studies to plot")
    fig, axes = plt.subplots(1, len(studies), figsize=(4.2 * len(studies), 3.6), squeeze=False)
    for ax, study in zip(axes[0], studies):
        x, y = study.points[:, 0], study.points[:, 1]
        ax.scatter(x, y, s=12, alpha=0.7)
        slope, intercept = np.polyfit(x, y, 1)
        line = np.linspace(x.min(), x.max(), 2)
        ax.plot(line, slope * line + intercept, color="tab:red", linewidth=1)
        ax.set_title(f"{study.method}: r = {study.r:.3f}", fontsize=10)
        ax.set_xlabel("attribution value")
        ax.set_ylabel("Fidelity+")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    out = figure_path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_throughput(path, reports: dict[str, ThroughputReport]) -> str:
    """Instances-per-second bars on a log scale, one bar per method."""
    if not reports:
        raise DataError("no throughput reports to plot")
    names = list(reports)
    values = [reports[k].throughput for k in names]
    fig, ax = plt.subplots(figsize=(1.4 + 1.2 * len(names), 3.4))
    ax.bar(names, values, color="tab:blue", width=0.6)
    ax.set_yscale("log")
    ax.set_ylabel("instances / second")
    for k, val in enumerate(values):
        ax.annotate(f"{val:.1f}", (k, val), ha="center", va="bottom", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    out = figure_path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
