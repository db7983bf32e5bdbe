"""Scenario generators, batch experiment runner, metrics, and CSV export.

Three stylized demand patterns: a burst of high-value riders when an event
ends, a morning rush with a steady commuter stream, and unbalanced traffic
between downtown and an airport. Each generator is deterministic in its
seed; rider values are drawn from exponential distributions by inverse CDF
on a seeded generator and rounded half-up to integer cents.

A batch sweeps one demand parameter, replicates each point over fresh
seeded economies, runs each mechanism under straightforward play, and
aggregates welfare, driver time-efficiency, mean single-deviation regret,
per-trip driver counts, and transacted mean prices.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .economy import Available, Driver, Economy, Exit, Rider, TakeTrip, make_economy
from .mechanisms import (
    MECHANISM_NAMES,
    Trace,
    _mix_seeds,
    make_mechanism,
    run_simulation,
    single_deviation_regret,
)

SCHEMA_VERSION = 1

CENTS = 100
TRIP_COST_RATE = 3 * CENTS
EXIT_COST_RATE = 1 * CENTS


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _exp_cents(rng, mean_units: float) -> int:
    u = rng.random()
    return _round_half_up(-mean_units * math.log1p(-u) * CENTS)


def _scaled(count: int, scale: float) -> int:
    return max(0, _round_half_up(count * scale))


def gen_scenario_event(n_cb1: int, seed: int, scale: float = 1.0) -> Economy:
    """End of an event: drivers wait at C and B, a surge leaves C one period in."""
    if n_cb1 < 0:
        raise ValueError("rider count must be nonnegative")
    rng = random.Random(seed)
    A, B, C = 0, 1, 2
    drivers = [Driver(True, C, 0) for _ in range(_scaled(15, scale))]
    drivers += [Driver(True, B, 0) for _ in range(_scaled(10, scale))]
    riders: list[Rider] = []
    for origin, dest, start, count in (
        (C, B, 0, _scaled(20, scale)),
        (B, C, 0, _scaled(10, scale)),
        (B, A, 0, _scaled(10, scale)),
        (C, B, 1, _scaled(n_cb1, scale)),
    ):
        for _ in range(count):
            riders.append(Rider(origin, dest, start, _exp_cents(rng, 10)))
    return make_economy(
        horizon=2,
        locations=("A", "B", "C"),
        dist=((1, 1, 1), (1, 1, 1), (1, 1, 1)),
        trip_cost_rate=TRIP_COST_RATE,
        exit_cost_rate=EXIT_COST_RATE,
        drivers=drivers,
        riders=riders,
    )


def gen_scenario_rush(n_cb: int, seed: int, scale: float = 1.0) -> Economy:
    """Morning rush: background demand everywhere plus commuters from C to B."""
    if n_cb < 0:
        raise ValueError("rider count must be nonnegative")
    rng = random.Random(seed)
    horizon = 20
    riders: list[Rider] = []
    for _ in range(_scaled(100, scale)):
        o = rng.randrange(3)
        d = rng.randrange(3)
        t = rng.randrange(horizon)
        riders.append(Rider(o, d, t, _exp_cents(rng, 10)))
    C, B = 2, 1
    for t in range(horizon):
        for _ in range(_scaled(n_cb, scale)):
            riders.append(Rider(C, B, t, _exp_cents(rng, 20)))
    drivers = [Driver(True, loc, 0) for loc in range(3) for _ in range(_scaled(10, scale))]
    return make_economy(
        horizon=horizon,
        locations=("A", "B", "C"),
        dist=((1, 1, 1), (1, 1, 1), (1, 1, 1)),
        trip_cost_rate=TRIP_COST_RATE,
        exit_cost_rate=EXIT_COST_RATE,
        drivers=drivers,
        riders=riders,
    )


def gen_scenario_airport(n_da: int, seed: int, scale: float = 1.0) -> Economy:
    """Downtown and airport two periods apart, with a tunable flow imbalance."""
    if not 0 <= n_da <= 40:
        raise ValueError("airport-bound rider count must lie in [0, 40]")
    rng = random.Random(seed)
    horizon = 20
    D, A = 0, 1
    riders: list[Rider] = []
    for t in range(horizon):
        for _ in range(_scaled(40, scale)):
            riders.append(Rider(D, D, t, _exp_cents(rng, 10)))
    airport_total = _scaled(40, scale)
    outbound = min(airport_total, _scaled(n_da, scale))
    for t in range(horizon - 1):  # cross trips take two periods
        for _ in range(outbound):
            riders.append(Rider(D, A, t, _exp_cents(rng, 40)))
        for _ in range(airport_total - outbound):
            riders.append(Rider(A, D, t, _exp_cents(rng, 40)))
    drivers = [Driver(True, loc, 0) for loc in (D, A) for _ in range(_scaled(20, scale))]
    return make_economy(
        horizon=horizon,
        locations=("D", "A"),
        dist=((1, 2), (2, 1)),
        trip_cost_rate=TRIP_COST_RATE,
        exit_cost_rate=EXIT_COST_RATE,
        drivers=drivers,
        riders=riders,
    )


_GENERATORS: dict[str, Callable[[int, int, float], Economy]] = {
    "event": gen_scenario_event,
    "rush": gen_scenario_rush,
    "airport": gen_scenario_airport,
}

# Trip-level series for the short event horizon, OD-level for the long ones.
_EVENT_TRIPS = (("C", "B", 0), ("B", "C", 0), ("B", "A", 0), ("C", "B", 1))


@dataclass(frozen=True)
class ScenarioParams:
    scenario: str
    sweep: tuple[int, ...]
    reps: int
    base_seed: int
    scale: float = 1.0
    compute_regret: bool | None = None  # default: only for the event scenario

    def want_regret(self) -> bool:
        if self.compute_regret is None:
            return self.scenario == "event"
        return self.compute_regret


@dataclass
class Metrics:
    welfare: float
    time_efficiency: float
    mean_regret: float | None
    drivers: dict[str, float]
    prices: dict[str, float | None]


@dataclass
class MetricsTable:
    params: ScenarioParams
    mechanisms: tuple[str, ...]
    rows: list[tuple[int, int, str, Metrics]] = field(default_factory=list)  # sweep, rep, mech

    def series_names(self) -> list[str]:
        names: list[str] = []
        for _, _, _, m in self.rows:
            for k in m.drivers:
                if k not in names:
                    names.append(k)
        return names


def time_efficiency(econ: Economy, trace: Trace) -> float:
    """Fraction of on-platform driver periods spent carrying a rider."""
    on_platform = 0
    riding = 0
    for i, drv in enumerate(econ.drivers):
        entry: int | None = drv.time if drv.entered else None
        exit_t: int | None = None
        for t, row in enumerate(trace.steps):
            act = row[i].taken
            if isinstance(act, TakeTrip):
                if entry is None:
                    entry = t
                if act.rider is not None:
                    a, b, _ = act.trip
                    riding += econ.d(a, b)
            elif isinstance(act, Exit) and isinstance(trace.states[t].drivers[i], Available):
                exit_t = t
        if entry is None:
            continue
        on_platform += (exit_t if exit_t is not None else econ.horizon) - entry
    return riding / on_platform if on_platform > 0 else 1.0


def _series_of_trip(econ: Economy, trip, scenario: str) -> str | None:
    a, b, t = trip
    names = econ.locations
    if scenario == "event":
        key = (names[a], names[b], t)
        if key in _EVENT_TRIPS:
            return f"{names[a]}->{names[b]}@{t}"
        return None
    return f"{names[a]}->{names[b]}"


def _trip_metrics(
    econ: Economy, trace: Trace, scenario: str
) -> tuple[dict[str, float], dict[str, float | None]]:
    counts: dict[str, float] = {}
    charge_sum: dict[str, float] = {}
    charge_n: dict[str, int] = {}
    if scenario == "event":
        series = [f"{a}->{b}@{t}" for a, b, t in _EVENT_TRIPS]
    else:
        series = sorted(
            {f"{econ.locations[a]}->{econ.locations[b]}"
             for a in range(econ.n_locations) for b in range(econ.n_locations)}
        )
    for s in series:
        counts[s] = 0.0
    for row in trace.steps:
        for step in row:
            if isinstance(step.taken, TakeTrip):
                s = _series_of_trip(econ, step.taken.trip, scenario)
                if s is not None:
                    counts[s] += 1.0
    if scenario != "event":
        for s in counts:
            counts[s] /= econ.horizon
    rider_trip = {j: econ.rider_trip(j) for j in range(econ.n_riders)}
    for t, j, amount in trace.charges:
        s = _series_of_trip(econ, rider_trip[j], scenario)
        if s is None:
            continue
        charge_sum[s] = charge_sum.get(s, 0.0) + float(amount)
        charge_n[s] = charge_n.get(s, 0) + 1
    prices: dict[str, float | None] = {}
    for s in series:
        prices[s] = charge_sum[s] / charge_n[s] if charge_n.get(s) else None
    return counts, prices


def run_batch(params: ScenarioParams, mechanisms: Iterable[str] | None = None) -> MetricsTable:
    """Generate, simulate, and measure every (sweep value, replication) cell."""
    if params.scenario not in _GENERATORS:
        raise ValueError(f"unknown scenario {params.scenario!r}")
    mechs = tuple(mechanisms) if mechanisms else ("stp", "myopic")
    for name in mechs:
        if name not in MECHANISM_NAMES:
            raise ValueError(f"unknown mechanism {name!r}")
    gen = _GENERATORS[params.scenario]
    for v in params.sweep:
        if v < 0 or (params.scenario == "airport" and v > 40):
            raise ValueError(f"sweep value {v} out of range for scenario {params.scenario}")
    table = MetricsTable(params, mechs)
    for si, sweep_value in enumerate(params.sweep):
        for rep in range(params.reps):
            seed = _mix_seeds(params.base_seed, si * 1_000_003 + rep)
            try:
                econ = gen(sweep_value, seed, params.scale)
                for name in mechs:
                    mech = make_mechanism(name, seed=seed)
                    trace = run_simulation(econ, mech, seed=seed)
                    regret: float | None = None
                    if params.want_regret():
                        total = 0.0
                        for i in range(econ.n_drivers):
                            total += float(
                                single_deviation_regret(econ, make_mechanism(name, seed=seed), i, seed=seed)
                            )
                        regret = total / max(1, econ.n_drivers)
                    counts, prices = _trip_metrics(econ, trace, params.scenario)
                    table.rows.append(
                        (
                            sweep_value,
                            rep,
                            name,
                            Metrics(
                                welfare=float(trace.welfare(econ)),
                                time_efficiency=time_efficiency(econ, trace),
                                mean_regret=regret,
                                drivers=counts,
                                prices=prices,
                            ),
                        )
                    )
            except Exception as exc:
                raise RuntimeError(
                    f"batch cell failed at sweep={sweep_value} rep={rep}: {exc}"
                ) from exc
    return table


def _mean_std(xs: list[float]) -> tuple[float, float, int]:
    n = len(xs)
    if n == 0:
        return float("nan"), float("nan"), 0
    mean = sum(xs) / n
    if n == 1:
        return mean, 0.0, 1
    var = sum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, math.sqrt(var), n


def aggregate(
    table: MetricsTable,
) -> dict[str, list[tuple[int, str, str, float, float, int]]]:
    """Per metric: rows of (sweep, mechanism, series, mean, std, n)."""
    out: dict[str, list[tuple[int, str, str, float, float, int]]] = {
        "welfare": [],
        "time_efficiency": [],
    }
    if table.params.want_regret():
        out["regret"] = []
    out["drivers"] = []
    out["prices"] = []
    series = table.series_names()
    for sweep_value in table.params.sweep:
        for mech in table.mechanisms:
            cell = [
                m
                for s, _, name, m in table.rows
                if s == sweep_value and name == mech
            ]
            mean, std, n = _mean_std([m.welfare for m in cell])
            out["welfare"].append((sweep_value, mech, "", mean, std, n))
            mean, std, n = _mean_std([m.time_efficiency for m in cell])
            out["time_efficiency"].append((sweep_value, mech, "", mean, std, n))
            if "regret" in out:
                mean, std, n = _mean_std(
                    [m.mean_regret for m in cell if m.mean_regret is not None]
                )
                out["regret"].append((sweep_value, mech, "", mean, std, n))
            for s in series:
                mean, std, n = _mean_std([m.drivers[s] for m in cell if s in m.drivers])
                out["drivers"].append((sweep_value, mech, s, mean, std, n))
                mean, std, n = _mean_std(
                    [m.prices[s] for m in cell if m.prices.get(s) is not None]
                )
                out["prices"].append((sweep_value, mech, s, mean, std, n))
    return out


def export_results(table: MetricsTable, out_dir: str | Path) -> list[Path]:
    """Write one CSV per metric under ``<out_dir>/<scenario>/`` plus a manifest."""
    base = Path(out_dir) / table.params.scenario
    base.mkdir(parents=True, exist_ok=True)
    agg = aggregate(table)
    written: list[Path] = []
    for metric, rows in agg.items():
        path = base / f"{metric}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if metric in ("drivers", "prices"):
                w.writerow(["sweep_value", "mechanism", "series", "mean", "std", "n"])
                for sweep_value, mech, series, mean, std, n in rows:
                    w.writerow([sweep_value, mech, series, repr(mean), repr(std), n])
            else:
                w.writerow(["sweep_value", "mechanism", "mean", "std", "n"])
                for sweep_value, mech, _, mean, std, n in rows:
                    w.writerow([sweep_value, mech, repr(mean), repr(std), n])
        written.append(path)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "scenario": table.params.scenario,
        "sweep": list(table.params.sweep),
        "reps": table.params.reps,
        "base_seed": table.params.base_seed,
        "scale": table.params.scale,
        "regret_computed": table.params.want_regret(),
        "mechanisms": list(table.mechanisms),
        "metrics": sorted(agg),
    }
    mpath = base / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(mpath)
    return written
