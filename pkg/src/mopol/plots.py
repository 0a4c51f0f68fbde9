"""Matplotlib figures for frontier-run reports.

Every figure has a CSV twin emitted by the report command; these are
rendered to files, never shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def hypervolume_figure(traces: dict):
    """Hypervolume against iteration, one line per run."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, frame in traces.items():
        ax.plot(frame["iteration"], frame["hypervolume"], label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("hypervolume")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def iteration_time_figure(traces: dict):
    """Per-iteration fit and acquisition seconds, one panel per kind."""
    fig, (ax_fit, ax_acq) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for name, frame in traces.items():
        total = frame["fit_seconds"] + frame.get("acq_seconds", 0.0)
        ax_fit.plot(frame["iteration"], total, label=name)
        ax_acq.plot(frame["iteration"], frame["acq_seconds"], label=name)
    ax_fit.set_ylabel("total seconds / iteration")
    ax_acq.set_ylabel("acquisition seconds")
    ax_acq.set_xlabel("iteration")
    ax_fit.legend(fontsize=8)
    fig.tight_layout()
    return fig


def frontier_figure(frontiers: dict):
    """Per-outcome value scatter of frontier members (first two axes)."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    for name, frame in frontiers.items():
        order = frame.sort_values("value_0")
        ax.plot(order["value_0"], order["value_1"], marker="o", linestyle="-", label=name)
    ax.set_xlabel("value (outcome 0)")
    ax.set_ylabel("value (outcome 1)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def value_curve_figure(curve):
    """Per-outcome value against the first weight component."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    value_cols = [c for c in curve.columns if c.startswith("value_")]
    for col in value_cols:
        y = col.removeprefix("value_")
        ax.plot(curve["lambda_0"], curve[col], marker=".", label=f"outcome {y}")
        se_col = f"se_{y}"
        if se_col in curve.columns:
            ax.fill_between(
                curve["lambda_0"],
                curve[col] - curve[se_col],
                curve[col] + curve[se_col],
                alpha=0.2,
            )
    ax.set_xlabel("weight on outcome 0")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> None:
    fig.savefig(path, dpi=150)
    plt.close(fig)
