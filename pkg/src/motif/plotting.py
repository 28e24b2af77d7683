"""Standalone SVG plots with byte-stable output."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "motif", "svg.fonttype": "path"}


def _save(fig, path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, title: str = "", hlines=()) -> Path:
    """One SVG with a curve per entry of ``series`` (label -> y values)."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for label, y in series.items():
            ax.plot(x, y, label=label, linewidth=1.2)
        for level in hlines:
            ax.axhline(level, color="0.5", linestyle="--", linewidth=0.8)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(loc="best", fontsize=8)
        ax.grid(True, linewidth=0.3)
        fig.tight_layout()
    return _save(fig, path)
