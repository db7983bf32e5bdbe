"""Render experiment CSVs into the committed figure set.

Reads the results layout written by the market engine's batch command
(``<results_dir>/<scenario>/<metric>.csv`` plus a manifest) and produces one
vector image per figure table entry. Data is plotted exactly as read; no
resampling, smoothing, or reordering.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .figspec import FIGURES, FigureSpec, figures_for
from .theme import RC

SCALAR_HEADER = ["sweep_value", "mechanism", "mean", "std", "n"]
SERIES_HEADER = ["sweep_value", "mechanism", "series", "mean", "std", "n"]


class RenderError(RuntimeError):
    """Missing or malformed input; the message names the file and column."""


@dataclass
class Line:
    label: str
    x: list[float]
    mean: list[float]
    std: list[float]


@dataclass
class FigureData:
    spec: FigureSpec
    panels: dict[str, list[Line]]  # panel label -> lines in plot order


def _read_rows(path: Path, want_series: bool) -> list[dict[str, str]]:
    if not path.exists():
        raise RenderError(f"missing results file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RenderError(f"{path}: empty file, expected a header row")
        expected = SERIES_HEADER if want_series else SCALAR_HEADER
        if header != expected:
            missing = [c for c in expected if c not in header]
            what = f"missing column {missing[0]!r}" if missing else f"unexpected header {header}"
            raise RenderError(f"{path}: {what}")
        return [dict(zip(header, row)) for row in reader]


def _to_float(path: Path, row: dict[str, str], column: str) -> float:
    try:
        return float(row[column])
    except ValueError:
        raise RenderError(f"{path}: bad value {row[column]!r} in column {column!r}")


def load_figure_data(results_dir: str | Path, spec: FigureSpec) -> FigureData:
    """Assemble the exact line data one figure will show."""
    path = Path(results_dir) / spec.scenario / f"{spec.metric}.csv"
    per_series = spec.series is not None
    rows = _read_rows(path, want_series=per_series)
    panels: dict[str, list[Line]] = {}
    for panel in spec.panels:
        lines: list[Line] = []
        if per_series:
            assert spec.series is not None
            for s in spec.series:
                pts = [r for r in rows if r["mechanism"] == panel and r["series"] == s]
                lines.append(
                    Line(
                        label=s,
                        x=[_to_float(path, r, "sweep_value") for r in pts],
                        mean=[_to_float(path, r, "mean") for r in pts],
                        std=[_to_float(path, r, "std") for r in pts],
                    )
                )
        else:
            mechanisms = []
            for r in rows:
                if r["mechanism"] not in mechanisms:
                    mechanisms.append(r["mechanism"])
            for mech in mechanisms:
                pts = [r for r in rows if r["mechanism"] == mech]
                lines.append(
                    Line(
                        label=mech,
                        x=[_to_float(path, r, "sweep_value") for r in pts],
                        mean=[_to_float(path, r, "mean") for r in pts],
                        std=[_to_float(path, r, "std") for r in pts],
                    )
                )
        panels[panel] = lines
    return FigureData(spec, panels)


def build_figure(data: FigureData):
    """One matplotlib figure: a row of panels with mean lines and ±std bands."""
    spec = data.spec
    n = len(spec.panels)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, n, figsize=(5.0 * n, 3.4), squeeze=False)
        for ax, panel in zip(axes[0], spec.panels):
            for line in data.panels[panel]:
                xs = [x for x, m in zip(line.x, line.mean) if not math.isnan(m)]
                ms = [m for m in line.mean if not math.isnan(m)]
                ss = [s for m, s in zip(line.mean, line.std) if not math.isnan(m)]
                ax.plot(xs, ms, marker="o", label=line.label)
                if any(s > 0 for s in ss if not math.isnan(s)):
                    lo = [m - s for m, s in zip(ms, ss)]
                    hi = [m + s for m, s in zip(ms, ss)]
                    ax.fill_between(xs, lo, hi, alpha=0.15)
            ax.set_xlabel(spec.xlabel)
            ax.set_ylabel(spec.ylabel)
            title = spec.metric if not panel else f"{spec.metric}: {panel}"
            ax.set_title(title.replace("_", " "))
            ax.legend()
        fig.tight_layout()
    return fig


def render(results_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Render every figure for each scenario present under ``results_dir``.

    A scenario directory with any CSVs must contain all the files its figure
    table entries need; an entirely empty results directory is an error that
    lists what was expected.
    """
    results = Path(results_dir)
    scenarios = [f.scenario for f in FIGURES]
    present = [s for s in dict.fromkeys(scenarios) if (results / s).is_dir()]
    if not present:
        expected = ", ".join(f"{s}/welfare.csv" for s in dict.fromkeys(scenarios))
        raise RenderError(f"no scenario results under {results}; expected e.g. {expected}")
    out = Path(out_dir)
    written: list[Path] = []
    for scenario in present:
        target = out / scenario
        target.mkdir(parents=True, exist_ok=True)
        for spec in figures_for(scenario):
            data = load_figure_data(results, spec)
            fig = build_figure(data)
            path = target / spec.filename
            with plt.rc_context(RC):  # the hash salt must be active while saving
                fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
