from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brute import brute_paths
from econgen import random_economy
from stpmarket.economy import (
    Available,
    Driver,
    EnRoute,
    Exit,
    Gone,
    Hold,
    IllegalActionError,
    Path,
    PathCapExceededError,
    Pending,
    Rider,
    TakeTrip,
    apply_actions,
    canonical_economy,
    dump_economy,
    enumerate_feasible_paths,
    initial_state,
    load_economy,
    make_economy,
    path_cost,
    shift_economy,
    validate_economy,
)
from stpmarket.fixtures import example1_economy, fixture_economy, superbowl_economy


def test_example1_economy_validates() -> None:
    assert validate_economy(example1_economy()).ok


def test_self_distance_violation_reported() -> None:
    econ = make_economy(
        horizon=2,
        locations=("A",),
        dist=((2,),),
        drivers=[Driver(True, 0, 0)],
        riders=[],
    )
    report = validate_economy(econ)
    assert not report.ok
    assert any("self-distance" in v for v in report.violations)


def test_infeasible_rider_trip_reported() -> None:
    econ = make_economy(
        horizon=2,
        locations=("A", "B"),
        dist=((1, 2), (2, 1)),
        drivers=[Driver(True, 0, 0)],
        riders=[Rider(0, 1, 1, 5)],  # needs until t=3 but the horizon is 2
    )
    report = validate_economy(econ)
    assert any("infeasible rider trip" in v for v in report.violations)


def test_nonzero_exit_floor_reported() -> None:
    econ = make_economy(
        horizon=1,
        locations=("A",),
        dist=((1,),),
        exit_cost=(3, 1),
        drivers=[Driver(True, 0, 0)],
        riders=[],
    )
    assert any("free" in v for v in validate_economy(econ).violations)


# -- path costs ------------------------------------------------------------


def test_example1_path_costs() -> None:
    econ = example1_economy()
    drv = econ.drivers[0]
    assert path_cost(econ, drv, Path((0, 0), ((0, 0, 0), (0, 0, 1)))) == 4
    assert path_cost(econ, drv, Path((0, 0), ((0, 1, 0),))) == 4
    assert path_cost(econ, drv, Path((0, 0), ((0, 0, 0),))) == 3  # exits one period early
    assert path_cost(econ, drv, Path(None, ())) == 0


def test_entered_driver_empty_path_pays_full_exit() -> None:
    econ = superbowl_economy()
    assert path_cost(econ, econ.drivers[0], Path((2, 0), ())) == 15


def test_path_must_chain() -> None:
    econ = example1_economy()
    with pytest.raises(ValueError):
        path_cost(econ, econ.drivers[0], Path((0, 0), ((0, 1, 0), (0, 0, 2))))


def test_example1_has_four_feasible_paths() -> None:
    econ = example1_economy()
    paths = enumerate_feasible_paths(econ, econ.drivers[0])
    assert len(paths) == 4
    assert paths[0] == Path(None, ())


def test_single_step_horizon_has_two_paths() -> None:
    econ = make_economy(
        horizon=2,
        locations=("A",),
        dist=((1,),),
        drivers=[Driver(True, 0, 1)],
        riders=[],
    )
    paths = enumerate_feasible_paths(econ, econ.drivers[0])
    assert len(paths) == 2  # stay one period, or exit immediately


def test_enumeration_matches_brute_recursion() -> None:
    econ = make_economy(
        horizon=2,
        locations=("A", "B"),
        dist=((1, 1), (1, 1)),
        trip_cost_rate=1,
        exit_cost_rate=1,
        drivers=[Driver(True, 0, 0)],
        riders=[],
    )
    drv = econ.drivers[0]
    got = {(p.trips, path_cost(econ, drv, p)) for p in enumerate_feasible_paths(econ, drv)}
    want = set(brute_paths(econ, drv))
    assert got == want


def test_enumeration_cap_trips() -> None:
    econ = superbowl_economy()
    with pytest.raises(PathCapExceededError):
        enumerate_feasible_paths(econ, econ.drivers[0], cap=3)


@given(st.integers(0, 500))
@settings(max_examples=60, deadline=None)
def test_path_costs_nonnegative(seed: int) -> None:
    econ = random_economy(seed)
    for drv in econ.drivers:
        for p in enumerate_feasible_paths(econ, drv):
            if p.start is None and drv.entered:
                continue
            assert path_cost(econ, drv, p) >= 0


@given(st.integers(0, 500))
@settings(max_examples=60, deadline=None)
def test_enumerated_paths_lie_in_feasible_trip_set(seed: int) -> None:
    econ = random_economy(seed)
    feasible = set(econ.feasible_trips())
    for drv in econ.drivers:
        for p in enumerate_feasible_paths(econ, drv):
            assert all(trip in feasible for trip in p.trips)


# -- state machine ----------------------------------------------------------


def test_unit_trip_arrives_next_period() -> None:
    econ = superbowl_economy()
    state = initial_state(econ)
    acts = [TakeTrip((2, 1, 0)), TakeTrip((2, 1, 0), rider=1), Exit()]
    nxt = apply_actions(econ, state, acts)
    assert nxt.time == 1
    assert nxt.drivers[0] == Available(1, 1)
    assert nxt.drivers[1] == Available(1, 1)
    assert nxt.drivers[2] == Gone()


def test_long_trip_goes_en_route() -> None:
    econ = superbowl_economy()
    state = initial_state(econ)
    acts = [TakeTrip((2, 0, 0)), Exit(), Exit()]
    nxt = apply_actions(econ, state, acts)
    assert nxt.drivers[0] == EnRoute(2, 0, 0, None)
    nxt2 = apply_actions(econ, nxt, [Hold(), Hold(), Hold()])
    assert nxt2.drivers[0] == Available(0, 2)


def test_en_route_driver_cannot_start_new_trip() -> None:
    econ = superbowl_economy()
    state = initial_state(econ)
    nxt = apply_actions(econ, state, [TakeTrip((2, 0, 0)), Exit(), Exit()])
    with pytest.raises(IllegalActionError) as err:
        apply_actions(econ, nxt, [TakeTrip((2, 0, 1)), Hold(), Hold()])
    assert err.value.driver == 0


def test_duplicate_pickup_rejected() -> None:
    econ = superbowl_economy()
    state = initial_state(econ)
    acts = [TakeTrip((2, 1, 0), rider=0), TakeTrip((2, 1, 0), rider=0), Exit()]
    with pytest.raises(IllegalActionError):
        apply_actions(econ, state, acts)


def test_pending_driver_promotes_at_entry_time() -> None:
    econ = make_economy(
        horizon=3,
        locations=("A",),
        dist=((1,),),
        drivers=[Driver(True, 0, 2)],
        riders=[],
    )
    state = initial_state(econ)
    assert state.drivers[0] == Pending(True, 0, 2)
    s1 = apply_actions(econ, state, [Hold()])
    assert s1.drivers[0] == Pending(True, 0, 2)
    s2 = apply_actions(econ, s1, [Hold()])
    assert s2.drivers[0] == Available(0, 2)


def test_replaying_actions_is_deterministic() -> None:
    econ = superbowl_economy()
    profiles = [
        [TakeTrip((2, 2, 0)), TakeTrip((2, 1, 0), rider=1), TakeTrip((1, 2, 0), rider=2)],
        [TakeTrip((2, 0, 1), rider=6), TakeTrip((1, 1, 1), rider=4), TakeTrip((2, 1, 1), rider=5)],
        [Hold(), TakeTrip((1, 1, 2)), TakeTrip((1, 1, 2))],
    ]
    def run() -> list:
        state = initial_state(econ)
        states = [state]
        for acts in profiles:
            state = apply_actions(econ, state, acts)
            states.append(state)
        return states

    assert run() == run()


# -- time-shifted economies --------------------------------------------------


def test_shift_at_time_zero_is_identity() -> None:
    econ = superbowl_economy()
    assert shift_economy(econ, initial_state(econ)) == econ


def test_shift_moves_en_route_driver_to_arrival() -> None:
    econ = superbowl_economy()
    state = initial_state(econ)
    s1 = apply_actions(econ, state, [TakeTrip((2, 0, 0)), Exit(), Exit()])
    s2 = apply_actions(econ, s1, [Hold(), Hold(), Hold()])
    assert s2.drivers[0] == Available(0, 2)
    s1b = apply_actions(econ, state, [TakeTrip((2, 0, 0)), TakeTrip((2, 2, 0)), Exit()])
    shifted = shift_economy(econ, s1b)
    assert shifted.horizon == 2
    assert shifted.drivers[0] == Driver(True, 0, 1)  # arrives at A one period in
    assert shifted.drivers[1] == Driver(True, 2, 0)
    assert len(shifted.drivers) == 2  # the exited driver is dropped
    assert all(r.start >= 0 for r in shifted.riders)
    assert len(shifted.riders) == 5  # riders starting at original t=1
    assert shifted.exit_cost == econ.exit_cost[:3]


def test_shift_preserves_costs_by_original_time() -> None:
    econ = make_economy(
        horizon=3,
        locations=("A", "B"),
        dist=((1, 1), (1, 1)),
        trip_cost={
            (a, b, t): 10 * t + a + 2 * b
            for a in range(2)
            for b in range(2)
            for t in range(3)
        },
        exit_cost=(0, 1, 4, 9),
        drivers=[Driver(True, 0, 0)],
        riders=[],
    )
    state = initial_state(econ)
    s1 = apply_actions(econ, state, [TakeTrip((0, 1, 0))])
    shifted = shift_economy(econ, s1)
    assert shifted.cost(0, 1, 1) == econ.cost(0, 1, 2)
    assert shifted.exit_cost == (0, 1, 4)


@given(st.integers(0, 400))
@settings(max_examples=40, deadline=None)
def test_shift_composes_along_no_deviation_runs(seed: int) -> None:
    econ = random_economy(seed)
    state = initial_state(econ)
    # March every driver along an arbitrary deterministic rule: stay put.
    states = [state]
    for t in range(econ.horizon):
        acts = []
        for i, ds in enumerate(state.drivers):
            if isinstance(ds, (Available,)) and ds.time == t:
                acts.append(TakeTrip((ds.location, ds.location, t)))
            elif isinstance(ds, Pending) and not ds.entered and ds.time == t:
                acts.append(TakeTrip((ds.location, ds.location, t)))
            else:
                acts.append(Hold())
        state = apply_actions(econ, state, acts)
        states.append(state)
    for t in range(1, econ.horizon + 1):
        once = shift_economy(econ, states[t])
        mid = t // 2
        part = shift_economy(econ, states[mid])
        # Re-root the partly shifted economy at the same absolute time.
        inner_state_drivers = []
        for ds in states[t].drivers:
            if isinstance(ds, Available):
                inner_state_drivers.append(Available(ds.location, ds.time - mid))
            elif isinstance(ds, EnRoute):
                inner_state_drivers.append(EnRoute(ds.origin, ds.dest, ds.start - mid, ds.rider))
            elif isinstance(ds, Pending):
                inner_state_drivers.append(Pending(ds.entered, ds.location, ds.time - mid))
            else:
                inner_state_drivers.append(ds)
        # Drivers gone by mid are already dropped from `part`.
        kept = [
            s
            for ds_mid, s in zip(states[mid].drivers, inner_state_drivers)
            if not isinstance(ds_mid, Gone)
        ]
        from stpmarket.economy import PlatformState

        twice = shift_economy(part, PlatformState(t - mid, tuple(kept)))
        assert canonical_economy(twice) == canonical_economy(once)


def test_economy_serialization_roundtrip() -> None:
    for name in ("superbowl", "example1", "example3"):
        econ = fixture_economy(name)
        assert load_economy(dump_economy(econ)) == econ


def test_fixture_files_match_builders() -> None:
    from stpmarket import fixtures

    for name, build in fixtures._BUILDERS.items():
        assert fixture_economy(name) == build()
