"""Fixed rendering theme so figure files diff meaningfully across runs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

HASH_SALT = "stpmarket-plots"

RC = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 100,
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.35,
    "axes.prop_cycle": matplotlib.cycler(
        color=["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    ),
    "lines.linewidth": 1.6,
    "lines.markersize": 4,
    "legend.fontsize": 8,
    "svg.hashsalt": HASH_SALT,
    "svg.fonttype": "path",
}
