"""Figure rendering for evaluation reports: per-class score histograms and
DIV% distributions, written as SVG next to the delimited plot data."""

from __future__ import annotations

import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["read_plot_data_csv", "render_score_histograms", "render_divpct_distributions"]

CLASS_ORDER = ("NoMeaningDifference", "SomeMeaningDifference", "Unrelated")
CLASS_COLORS = {
    "NoMeaningDifference": "#2a9d8f",
    "SomeMeaningDifference": "#e9c46a",
    "Unrelated": "#e76f51",
}


def read_plot_data_csv(path):
    """Read the per-pair plot-data CSV into {class: {"score": [...], "div_pct": [...]}}."""
    data = defaultdict(lambda: {"score": [], "div_pct": []})
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            data[row["class"]]["score"].append(float(row["score"]))
            data[row["class"]]["div_pct"].append(float(row["div_pct"]))
    return dict(data)


def _hist_by_class(data, key, xlabel, title, out_path, bins=30):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for cls in CLASS_ORDER:
        vals = data.get(cls, {}).get(key, [])
        if vals:
            ax.hist(
                vals,
                bins=bins,
                alpha=0.55,
                label=cls,
                color=CLASS_COLORS[cls],
                density=True,
            )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def render_score_histograms(data, out_path):
    """Model score distributions per adjudicated sentence class."""
    return _hist_by_class(data, "score", "model score", "Score distribution by class", out_path)


def render_divpct_distributions(data, out_path):
    """Predicted DIV% distributions per adjudicated sentence class."""
    return _hist_by_class(
        data, "div_pct", "% DIV tokens", "DIV% distribution by class", out_path
    )
