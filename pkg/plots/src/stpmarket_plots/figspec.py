"""The committed figure table: one entry per (scenario, metric).

Scalar metrics plot one panel with a line per mechanism; the per-trip
metrics plot one panel per mechanism with a line per origin-destination
series. Tests pin the rendered output to this table.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FigureSpec:
    scenario: str
    metric: str
    filename: str
    xlabel: str
    ylabel: str
    panels: tuple[str, ...]  # ("",) for a single mechanism-comparison panel
    series: tuple[str, ...] | None  # None: one line per mechanism from the CSV


_EVENT_X = "riders requesting C->B at t=1"
_RUSH_X = "commuters from C to B per period"
_AIRPORT_X = "airport-bound riders per period"

EVENT_TRIPS = ("C->B@0", "B->C@0", "B->A@0", "C->B@1")
RUSH_ODS = ("C->B", "B->C", "B->A", "A->B")
AIRPORT_ODS = ("D->D", "D->A", "A->D", "A->A")


def _scenario_figures(
    scenario: str, xlabel: str, series: tuple[str, ...], with_regret: bool
) -> list[FigureSpec]:
    figs = [
        FigureSpec(scenario, "welfare", "welfare.svg", xlabel, "mean welfare (cents)", ("",), None),
        FigureSpec(
            scenario,
            "time_efficiency",
            "time_efficiency.svg",
            xlabel,
            "driver time-efficiency",
            ("",),
            None,
        ),
    ]
    if with_regret:
        figs.append(
            FigureSpec(
                scenario, "regret", "regret.svg", xlabel, "mean driver regret (cents)", ("",), None
            )
        )
    figs += [
        FigureSpec(
            scenario,
            "drivers",
            "drivers.svg",
            xlabel,
            "drivers per trip",
            ("stp", "myopic"),
            series,
        ),
        FigureSpec(
            scenario,
            "prices",
            "prices.svg",
            xlabel,
            "mean transacted price (cents)",
            ("stp", "myopic"),
            series,
        ),
    ]
    return figs


FIGURES: tuple[FigureSpec, ...] = tuple(
    _scenario_figures("event", _EVENT_X, EVENT_TRIPS, with_regret=True)
    + _scenario_figures("rush", _RUSH_X, RUSH_ODS, with_regret=False)
    + _scenario_figures("airport", _AIRPORT_X, AIRPORT_ODS, with_regret=False)
)


def figures_for(scenario: str) -> list[FigureSpec]:
    return [f for f in FIGURES if f.scenario == scenario]
