"""Static SVG figures for CLI reports. Output is byte-stable for a fixed input."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids inside the SVG instead of random hashes
matplotlib.rcParams["svg.hashsalt"] = "artifact"
matplotlib.rcParams["svg.fonttype"] = "none"


class PlotError(ValueError):
    pass


def line_plot(path, x: Sequence, series: dict, xlabel: str, ylabel: str, title: str, seed: int,
              logx: bool = False, logy: bool = False, step: bool = False) -> None:
    """One polyline per series; the seed goes into the SVG metadata."""
    if not len(x) or not series:
        raise PlotError("nothing to plot")
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, ys in series.items():
        if step:
            ax.step(x, ys, where="post", marker="o", label=label)
        else:
            ax.plot(x, ys, marker="o", label=label)
    if logx:
        ax.set_xscale("log", base=2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    meta = {"Title": title, "Description": f"seed={seed}", "Date": None, "Creator": "artifact"}
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)


def plot_spec(spec: Optional[dict], path, seed: int) -> None:
    if spec is None:
        raise PlotError("report has no plottable data")
    line_plot(path, seed=seed, **spec)
