"""Figure rendering for the CLI report paths.

Every report-producing command writes a PNG next to its delimited output:
`eval` renders per-configuration accuracies, `correlate` renders the
per-channel correlation profile.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _config_label(report) -> str:
    parts = []
    if report.target:
        parts.append(report.target[:3])
    if report.mode:
        parts.append(report.mode[:5])
    if report.channels:
        parts.append(f"{report.channels}ch")
    if report.tau_s:
        parts.append(f"tau{report.tau_s}")
    if report.baseline_removed is not None:
        parts.append("bl" if report.baseline_removed else "raw")
    parts.append(report.model)
    return "/".join(parts)


def save_report_figure(reports, path) -> None:
    """Mean accuracy with stddev bars plus per-fold points, one group per
    experiment configuration."""
    reports = list(reports)
    labels = [_config_label(r) for r in reports]
    means = [r.mean for r in reports]
    stds = [r.stddev for r in reports]
    xs = np.arange(len(reports))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(reports)), 4.0))
    ax.bar(xs, means, yerr=stds, capsize=4, color="#4878a8", alpha=0.8,
           zorder=2)
    for x, report in zip(xs, reports):
        folds = np.asarray(report.per_fold_accuracy)
        jitter = np.linspace(-0.18, 0.18, len(folds))
        ax.plot(x + jitter, folds, "k.", markersize=4, alpha=0.6, zorder=3)
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.axhline(0.5, color="grey", linewidth=0.8, linestyle="--", zorder=1)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_correlation_figure(corr: dict, probe: str, band, path) -> None:
    """Bar chart of Pearson r per channel; undefined values drawn hollow."""
    names = list(corr)
    values = [corr[n] for n in names]
    xs = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(5.0, 0.32 * len(names)), 3.6))
    for x, name, r in zip(xs, names, values):
        if r is None:
            ax.bar(x, 0.0, edgecolor="grey", fill=False, hatch="//")
        else:
            color = "#a84848" if name == probe else "#4878a8"
            ax.bar(x, r, color=color, zorder=2)
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=90, fontsize=7)
    ax.set_ylabel("Pearson r")
    ax.set_ylim(-1.05, 1.05)
    ax.axhline(0.0, color="black", linewidth=0.8)
    band_name = getattr(band, "value", str(band))
    ax.set_title(f"{probe} wavelet-entropy correlation, {band_name} band")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
