from __future__ import annotations

import pytest

from stpmarket.economy import validate_economy
from stpmarket.experiments import (
    ScenarioParams,
    aggregate,
    export_results,
    gen_scenario_airport,
    gen_scenario_event,
    gen_scenario_rush,
    run_batch,
)


def test_event_counts() -> None:
    econ = gen_scenario_event(0, seed=1)
    assert econ.n_riders == 40
    assert econ.n_drivers == 25
    econ = gen_scenario_event(100, seed=1)
    assert econ.n_riders == 140
    assert econ.n_drivers == 25
    assert validate_economy(econ).ok


def test_event_reproducible() -> None:
    assert gen_scenario_event(20, seed=7) == gen_scenario_event(20, seed=7)
    assert gen_scenario_event(20, seed=7) != gen_scenario_event(20, seed=8)


def test_rush_counts() -> None:
    assert gen_scenario_rush(0, seed=2).n_riders == 100
    econ = gen_scenario_rush(10, seed=2)
    assert econ.n_riders == 100 + 10 * 20
    assert econ.n_drivers == 30
    assert validate_economy(econ).ok
    assert gen_scenario_rush(10, seed=2) == gen_scenario_rush(10, seed=2)


def test_airport_counts_and_bounds() -> None:
    econ = gen_scenario_airport(20, seed=3)
    assert econ.n_drivers == 40
    D, A = 0, 1
    outbound = sum(1 for r in econ.riders if (r.origin, r.dest) == (D, A))
    inbound = sum(1 for r in econ.riders if (r.origin, r.dest) == (A, D))
    assert outbound == inbound  # balanced at the midpoint
    assert validate_economy(econ).ok
    zero = gen_scenario_airport(0, seed=3)
    assert sum(1 for r in zero.riders if (r.origin, r.dest) == (D, A)) == 0
    with pytest.raises(ValueError):
        gen_scenario_airport(41, seed=3)
    assert gen_scenario_airport(5, seed=9) == gen_scenario_airport(5, seed=9)


def test_values_are_integer_cents() -> None:
    for econ in (
        gen_scenario_event(10, seed=4),
        gen_scenario_rush(2, seed=4, scale=0.2),
        gen_scenario_airport(10, seed=4, scale=0.2),
    ):
        assert all(isinstance(r.value, int) for r in econ.riders)


def test_time_efficiency_boundaries() -> None:
    from stpmarket.economy import Driver, Rider, make_economy
    from stpmarket.experiments import time_efficiency
    from stpmarket.mechanisms import run_simulation, stp_mechanism

    busy = make_economy(
        horizon=2,
        locations=("A",),
        dist=((1,),),
        drivers=[Driver(True, 0, 0)],
        riders=[Rider(0, 0, 0, 5), Rider(0, 0, 1, 5)],
    )
    trace = run_simulation(busy, stp_mechanism())
    assert time_efficiency(busy, trace) == 1.0  # a rider aboard every period

    idle = make_economy(
        horizon=2,
        locations=("A",),
        dist=((1,),),
        drivers=[Driver(True, 0, 0)],
        riders=[Rider(0, 0, 1, 5)],
    )
    trace = run_simulation(idle, stp_mechanism())
    eff = time_efficiency(idle, trace)
    assert 0.0 <= eff < 1.0


def _small_event_params(**kw) -> ScenarioParams:
    defaults = dict(scenario="event", sweep=(0, 40), reps=3, base_seed=99, scale=0.3)
    defaults.update(kw)
    return ScenarioParams(**defaults)


def test_batch_welfare_dominance_and_zero_regret() -> None:
    table = run_batch(_small_event_params())
    by_cell: dict[tuple[int, int], dict[str, float]] = {}
    for sweep_value, rep, mech, m in table.rows:
        by_cell.setdefault((sweep_value, rep), {})[mech] = m.welfare
        if mech == "stp":
            assert m.mean_regret == 0.0
        assert 0.0 <= m.time_efficiency <= 1.0
    for cell in by_cell.values():
        assert cell["stp"] >= cell["myopic"]


def test_batch_is_reproducible() -> None:
    a = run_batch(_small_event_params())
    b = run_batch(_small_event_params())
    assert a.rows == b.rows


def test_aggregate_shapes() -> None:
    table = run_batch(_small_event_params())
    agg = aggregate(table)
    assert set(agg) == {"welfare", "time_efficiency", "regret", "drivers", "prices"}
    assert len(agg["welfare"]) == 2 * 2  # sweep values x mechanisms
    assert len(agg["drivers"]) == 2 * 2 * 4  # ... x the four tracked trips


def test_export_results(tmp_path) -> None:
    table = run_batch(_small_event_params())
    written = export_results(table, tmp_path)
    base = tmp_path / "event"
    for name in ("welfare", "time_efficiency", "regret", "drivers", "prices"):
        assert (base / f"{name}.csv").exists()
    assert (base / "manifest.json").exists()
    welfare = (base / "welfare.csv").read_text().splitlines()
    assert welfare[0] == "sweep_value,mechanism,mean,std,n"
    assert len(welfare) == 1 + 4
    export_results(table, tmp_path / "again")
    assert (tmp_path / "again" / "event" / "welfare.csv").read_text() == (
        base / "welfare.csv"
    ).read_text()


def test_export_empty_sweep(tmp_path) -> None:
    table = run_batch(_small_event_params(sweep=()))
    export_results(table, tmp_path)
    lines = (tmp_path / "event" / "welfare.csv").read_text().splitlines()
    assert lines == ["sweep_value,mechanism,mean,std,n"]


def test_rush_and_airport_batches_complete(tmp_path) -> None:
    for scenario, sweep in (("rush", (0, 4)), ("airport", (0, 20))):
        params = ScenarioParams(
            scenario=scenario, sweep=sweep, reps=2, base_seed=5, scale=0.15
        )
        table = run_batch(params)
        files = export_results(table, tmp_path)
        assert all(p.exists() for p in files)
        agg = aggregate(table)
        assert "regret" not in agg  # off by default outside the event scenario
        for _, _, _, mean, _, n in agg["welfare"]:
            assert n == 2
