"""Market model for a discrete-time, multi-location ridesharing economy.

An economy fixes a planning horizon, a set of locations with integer travel
times, per-trip and early-exit cost schedules, a roster of drivers (each with
an entry point in space-time) and a set of impatient riders (each wanting one
specific trip). All money values are exact integers in minor units; nothing
in this module or in the solvers built on top of it touches floating point.

The module also houses the per-period state machine: driver states, legal
actions, deterministic state transitions, and the construction of the
time-shifted economy that re-roots the remaining market at a later period.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

Money = int
Trip = tuple[int, int, int]  # (origin, destination, start time), locations by index


class EconomyFormatError(ValueError):
    """Raised when an economy document cannot be parsed."""


class IllegalActionError(ValueError):
    """Raised when an action profile contains an action a driver cannot take."""

    def __init__(self, driver: int, time: int, reason: str):
        self.driver = driver
        self.time = time
        self.reason = reason
        super().__init__(f"driver {driver} at t={time}: {reason}")


class PathCapExceededError(RuntimeError):
    """Raised when path enumeration would produce more paths than allowed."""

    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"feasible path enumeration exceeded cap of {cap}")


@dataclass(frozen=True)
class Driver:
    """A driver's entry point.

    ``entered`` drivers are already committed to the platform and pay the
    early-exit penalty if they leave before the horizon; non-entered drivers
    may decline to show up at no cost.
    """

    entered: bool
    location: int
    time: int


@dataclass(frozen=True)
class Rider:
    """A rider wanting the single trip (origin, dest) starting exactly at ``start``."""

    origin: int
    dest: int
    start: int
    value: Money


@dataclass(frozen=True, eq=True)
class Economy:
    horizon: int
    locations: tuple[str, ...]
    dist: tuple[tuple[int, ...], ...]
    trip_cost: Mapping[Trip, Money]
    exit_cost: tuple[Money, ...]  # indexed by periods left before the horizon
    drivers: tuple[Driver, ...]
    riders: tuple[Rider, ...]

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def n_drivers(self) -> int:
        return len(self.drivers)

    @property
    def n_riders(self) -> int:
        return len(self.riders)

    def d(self, a: int, b: int) -> int:
        return self.dist[a][b]

    def cost(self, a: int, b: int, t: int) -> Money:
        return self.trip_cost[(a, b, t)]

    def exit_penalty(self, t: int) -> Money:
        """Cost of leaving the platform at time ``t`` instead of at the horizon."""
        return self.exit_cost[self.horizon - t]

    def is_feasible_trip(self, a: int, b: int, t: int) -> bool:
        return 0 <= t and t + self.dist[a][b] <= self.horizon

    def feasible_trips(self) -> list[Trip]:
        """All trips that fit in the horizon, in (origin, dest, start) order."""
        out = []
        for a in range(self.n_locations):
            for b in range(self.n_locations):
                for t in range(self.horizon - self.dist[a][b] + 1):
                    out.append((a, b, t))
        return out

    def rider_trip(self, j: int) -> Trip:
        r = self.riders[j]
        return (r.origin, r.dest, r.start)

    def location_index(self, name: str) -> int:
        return self.locations.index(name)


def make_economy(
    *,
    horizon: int,
    locations: Sequence[str],
    dist: Sequence[Sequence[int]],
    trip_cost_rate: Money | None = None,
    trip_cost: Mapping[Trip, Money] | None = None,
    exit_cost_rate: Money | None = None,
    exit_cost: Sequence[Money] | None = None,
    drivers: Iterable[Driver],
    riders: Iterable[Rider],
) -> Economy:
    """Build an economy, expanding rate-based cost schedules into full tables.

    ``trip_cost_rate`` prices every trip at rate * distance; ``exit_cost_rate``
    charges rate * (periods left). Explicit tables win over rates.
    """
    locs = tuple(locations)
    dmat = tuple(tuple(row) for row in dist)
    if trip_cost is None:
        rate = 0 if trip_cost_rate is None else trip_cost_rate
        trip_cost = {}
        for a in range(len(locs)):
            for b in range(len(locs)):
                for t in range(horizon - dmat[a][b] + 1):
                    trip_cost[(a, b, t)] = rate * dmat[a][b]
    if exit_cost is None:
        rate = 0 if exit_cost_rate is None else exit_cost_rate
        exit_cost = tuple(rate * delta for delta in range(horizon + 1))
    return Economy(
        horizon=horizon,
        locations=locs,
        dist=dmat,
        trip_cost=dict(trip_cost),
        exit_cost=tuple(exit_cost),
        drivers=tuple(drivers),
        riders=tuple(riders),
    )


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _is_money(x: object) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate_economy(econ: Economy) -> ValidationReport:
    """Check structural invariants; returns a report instead of raising."""
    v: list[str] = []
    n = econ.n_locations
    if econ.horizon < 1:
        v.append("horizon must be at least 1")
    if n < 1:
        v.append("at least one location required")
    if len(econ.dist) != n or any(len(row) != n for row in econ.dist):
        v.append("distance matrix shape must match the location set")
        return ValidationReport(v)
    for a in range(n):
        if econ.dist[a][a] != 1:
            v.append(f"self-distance must be 1 at {econ.locations[a]}")
        for b in range(n):
            if econ.dist[a][b] < 1:
                v.append(f"distance {econ.locations[a]}->{econ.locations[b]} must be >= 1")
    if len(econ.exit_cost) != econ.horizon + 1:
        v.append("exit cost schedule must have horizon+1 entries")
    else:
        if econ.exit_cost[0] != 0:
            v.append("exiting at the horizon must be free")
        for delta, k in enumerate(econ.exit_cost):
            if not _is_money(k) or k < 0:
                v.append(f"exit cost for {delta} periods early must be a nonnegative integer")
    expected = set()
    for a in range(n):
        for b in range(n):
            for t in range(econ.horizon - econ.dist[a][b] + 1):
                expected.add((a, b, t))
    if set(econ.trip_cost.keys()) != expected:
        v.append("trip cost table must cover exactly the feasible trips")
    for trip, c in econ.trip_cost.items():
        if not _is_money(c) or c < 0:
            v.append(f"trip cost for {trip} must be a nonnegative integer")
    for i, drv in enumerate(econ.drivers):
        if not (0 <= drv.location < n):
            v.append(f"driver {i} has an unknown location")
        elif not (0 <= drv.time <= econ.horizon):
            # Entry exactly at the horizon is allowed: time-shifted economies
            # contain drivers whose current trip ends at the boundary.
            v.append(f"driver {i} entry time must lie in [0, horizon]")
    for j, r in enumerate(econ.riders):
        if not (0 <= r.origin < n and 0 <= r.dest < n):
            v.append(f"rider {j} has an unknown location")
        elif not (0 <= r.start and r.start + econ.d(r.origin, r.dest) <= econ.horizon):
            v.append(f"infeasible rider trip for rider {j}")
        if not _is_money(r.value) or r.value < 0:
            v.append(f"rider {j} value must be a nonnegative integer")
    return ValidationReport(v)


# ---------------------------------------------------------------------------
# Paths


@dataclass(frozen=True)
class Path:
    """A driver's movement through space-time.

    ``start`` is the (location, time) where the driver becomes active, or
    ``None`` for the stay-out path of a driver who never entered. The path
    ends where its last trip ends; ending before the horizon means an early
    exit there.
    """

    start: tuple[int, int] | None
    trips: tuple[Trip, ...]

    def end(self, econ: Economy) -> tuple[int, int] | None:
        if self.start is None:
            return None
        loc, t = self.start
        for a, b, s in self.trips:
            loc, t = b, s + econ.d(a, b)
        return loc, t


@dataclass(frozen=True)
class PathStep:
    trip: Trip
    rider: int | None = None


@dataclass(frozen=True)
class ActionPath:
    """A path with each trip marked as a relocation or a specific rider's trip."""

    start: tuple[int, int] | None
    steps: tuple[PathStep, ...]

    def path(self) -> Path:
        return Path(self.start, tuple(s.trip for s in self.steps))

    def riders(self) -> list[int]:
        return [s.rider for s in self.steps if s.rider is not None]


def _check_chain(econ: Economy, start: tuple[int, int], trips: Sequence[Trip]) -> str | None:
    loc, t = start
    for a, b, s in trips:
        if (a, s) != (loc, t):
            return f"trip ({a},{b},{s}) does not start where the previous one ended"
        if not econ.is_feasible_trip(a, b, s):
            return f"trip ({a},{b},{s}) does not fit in the horizon"
        loc, t = b, s + econ.d(a, b)
    return None


def path_cost(econ: Economy, driver: Driver, path: Path) -> Money:
    """Total cost of a path: trip costs plus the early-exit penalty, if any."""
    if path.start is None:
        if driver.entered:
            raise ValueError("an entered driver cannot take the stay-out path")
        if path.trips:
            raise ValueError("the stay-out path contains no trips")
        return 0
    if path.start != (driver.location, driver.time):
        raise ValueError("path does not start at the driver's entry point")
    err = _check_chain(econ, path.start, path.trips)
    if err is not None:
        raise ValueError(err)
    total = sum(econ.cost(a, b, s) for a, b, s in path.trips)
    end = path.end(econ)
    assert end is not None
    return total + econ.exit_cost[econ.horizon - end[1]]


def action_path_cost(econ: Economy, driver: Driver, apath: ActionPath) -> Money:
    return path_cost(econ, driver, apath.path())


def enumerate_feasible_paths(econ: Economy, driver: Driver, cap: int = 10**6) -> list[Path]:
    """Exhaustively list a driver's feasible paths, the no-trip path first.

    Intended for oracles and tests on small instances; raises
    :class:`PathCapExceededError` once more than ``cap`` paths exist.
    """
    null_path = Path(None if not driver.entered else (driver.location, driver.time), ())
    out = [null_path]
    prefix: list[Trip] = []

    def visit(loc: int, t: int) -> None:
        for b in range(econ.n_locations):
            arrive = t + econ.d(loc, b)
            if arrive > econ.horizon:
                continue
            prefix.append((loc, b, t))
            out.append(Path((driver.location, driver.time), tuple(prefix)))
            if len(out) > cap:
                raise PathCapExceededError(cap)
            visit(b, arrive)
            prefix.pop()

    visit(driver.location, driver.time)
    return out


# ---------------------------------------------------------------------------
# Platform state machine


@dataclass(frozen=True)
class Pending:
    """Driver whose entry point lies in the future, or a non-entered driver
    standing at her entry point deciding whether to show up."""

    entered: bool
    location: int
    time: int


@dataclass(frozen=True)
class Available:
    location: int
    time: int


@dataclass(frozen=True)
class EnRoute:
    origin: int
    dest: int
    start: int
    rider: int | None = None


@dataclass(frozen=True)
class Gone:
    pass


DriverState = Pending | Available | EnRoute | Gone


@dataclass(frozen=True)
class PlatformState:
    time: int
    drivers: tuple[DriverState, ...]


@dataclass(frozen=True)
class TakeTrip:
    trip: Trip
    rider: int | None = None


@dataclass(frozen=True)
class Exit:
    """Leave the platform now, or never enter it."""


@dataclass(frozen=True)
class Hold:
    """The forced non-action of en-route, future, and departed drivers."""


Action = TakeTrip | Exit | Hold

ActionProfile = Sequence[Action]


def initial_state(econ: Economy) -> PlatformState:
    states: list[DriverState] = []
    for drv in econ.drivers:
        if drv.entered and drv.time == 0:
            states.append(Available(drv.location, 0))
        else:
            states.append(Pending(drv.entered, drv.location, drv.time))
    return PlatformState(0, tuple(states))


def is_actionable(state: DriverState, t: int) -> bool:
    """Whether the driver chooses an action at time ``t`` (everyone else holds)."""
    if isinstance(state, Available):
        return state.time == t
    if isinstance(state, Pending):
        return not state.entered and state.time == t
    return False


def actionable_location(state: DriverState) -> int:
    if isinstance(state, Available):
        return state.location
    if isinstance(state, Pending):
        return state.location
    raise ValueError("driver has no location to act from")


def available_deviations(econ: Economy, state: PlatformState, driver: int) -> list[Action]:
    """Actions a driver can take on her own: relocations within reach, or exit.

    Rider pickups are excluded; those only happen when dispatched.
    """
    ds = state.drivers[driver]
    if not is_actionable(ds, state.time):
        return [Hold()]
    a = actionable_location(ds)
    t = state.time
    acts: list[Action] = []
    for b in range(econ.n_locations):
        if t + econ.d(a, b) <= econ.horizon:
            acts.append(TakeTrip((a, b, t)))
    acts.append(Exit())
    return acts


def _legal_action(econ: Economy, t: int, i: int, ds: DriverState, act: Action) -> str | None:
    if isinstance(ds, (EnRoute, Gone)) or (isinstance(ds, Pending) and (ds.entered or ds.time > t)):
        if not isinstance(act, Hold):
            return "driver cannot act now and must hold"
        return None
    # Actionable: Available at t, or a non-entered driver at her entry time.
    if isinstance(act, Hold):
        return "an available driver must choose a trip or exit"
    if isinstance(act, Exit):
        return None
    a, b, s = act.trip
    if s != t:
        return f"trip starts at t={s}, not now"
    if a != actionable_location(ds):
        return "trip does not start at the driver's location"
    if not econ.is_feasible_trip(a, b, s):
        return "trip does not fit in the horizon"
    if act.rider is not None:
        r = econ.riders[act.rider]
        if (r.origin, r.dest, r.start) != act.trip:
            return f"rider {act.rider} does not request this trip"
    return None


def apply_actions(econ: Economy, state: PlatformState, actions: ActionProfile) -> PlatformState:
    """Deterministic successor state under a legal action profile."""
    t = state.time
    if len(actions) != econ.n_drivers:
        raise ValueError("action profile length must match the driver roster")
    seen_riders: set[int] = set()
    nxt: list[DriverState] = []
    for i, (ds, act) in enumerate(zip(state.drivers, actions)):
        err = _legal_action(econ, t, i, ds, act)
        if err is not None:
            raise IllegalActionError(i, t, err)
        if isinstance(act, TakeTrip) and act.rider is not None:
            if act.rider in seen_riders:
                raise IllegalActionError(i, t, f"rider {act.rider} picked up twice")
            seen_riders.add(act.rider)
        if isinstance(ds, (EnRoute, Gone)) or (
            isinstance(ds, Pending) and (ds.entered or ds.time > t)
        ):
            if isinstance(ds, EnRoute):
                arrive = ds.start + econ.d(ds.origin, ds.dest)
                nxt.append(Available(ds.dest, t + 1) if arrive == t + 1 else ds)
            elif isinstance(ds, Pending) and ds.entered and ds.time == t + 1:
                nxt.append(Available(ds.location, t + 1))
            else:
                nxt.append(ds)
            continue
        if isinstance(act, Exit):
            nxt.append(Gone())
        else:
            assert isinstance(act, TakeTrip)
            a, b, s = act.trip
            if s + econ.d(a, b) == t + 1:
                nxt.append(Available(b, t + 1))
            else:
                nxt.append(EnRoute(a, b, s, act.rider))
    return PlatformState(t + 1, tuple(nxt))


# ---------------------------------------------------------------------------
# Time-shifted economies


def shift_index_maps(econ: Economy, state: PlatformState) -> tuple[list[int], list[int]]:
    """Original indices of the drivers and riders kept by :func:`shift_economy`."""
    t = state.time
    drivers = [i for i, ds in enumerate(state.drivers) if not isinstance(ds, Gone)]
    riders = [j for j, r in enumerate(econ.riders) if r.start >= t]
    return drivers, riders


def shift_economy(econ: Economy, state: PlatformState) -> Economy:
    """The remaining market re-rooted at ``state.time``.

    Available drivers become entered drivers at time 0, en-route drivers
    become entered drivers at their arrival point, departed drivers are
    dropped, and riders starting earlier than the state's time disappear.
    Cost schedules are re-indexed so that a trip or an early exit costs the
    same as it would in the original economy.
    """
    t = state.time
    horizon = econ.horizon - t
    drivers: list[Driver] = []
    for ds in state.drivers:
        if isinstance(ds, Gone):
            continue
        if isinstance(ds, Available):
            drivers.append(Driver(True, ds.location, ds.time - t))
        elif isinstance(ds, EnRoute):
            arrive = ds.start + econ.d(ds.origin, ds.dest)
            drivers.append(Driver(True, ds.dest, arrive - t))
        else:
            assert isinstance(ds, Pending)
            drivers.append(Driver(ds.entered, ds.location, ds.time - t))
    riders = [
        Rider(r.origin, r.dest, r.start - t, r.value) for r in econ.riders if r.start >= t
    ]
    trip_cost: dict[Trip, Money] = {}
    for a in range(econ.n_locations):
        for b in range(econ.n_locations):
            for s in range(horizon - econ.d(a, b) + 1):
                trip_cost[(a, b, s)] = econ.cost(a, b, s + t)
    return Economy(
        horizon=horizon,
        locations=econ.locations,
        dist=econ.dist,
        trip_cost=trip_cost,
        exit_cost=econ.exit_cost[: horizon + 1],
        drivers=tuple(drivers),
        riders=tuple(riders),
    )


def canonical_economy(econ: Economy) -> Economy:
    """Relabel-insensitive form: drivers and riders in sorted order."""
    drivers = tuple(sorted(econ.drivers, key=lambda d: (d.entered, d.location, d.time)))
    riders = tuple(sorted(econ.riders, key=lambda r: (r.origin, r.dest, r.start, r.value)))
    return Economy(
        horizon=econ.horizon,
        locations=econ.locations,
        dist=econ.dist,
        trip_cost=dict(econ.trip_cost),
        exit_cost=econ.exit_cost,
        drivers=drivers,
        riders=riders,
    )


# ---------------------------------------------------------------------------
# Serialization


def economy_to_dict(econ: Economy) -> dict:
    names = econ.locations
    return {
        "horizon": econ.horizon,
        "locations": list(names),
        "dist": [list(row) for row in econ.dist],
        "trip_cost": {
            "entries": [
                [names[a], names[b], t, c] for (a, b, t), c in sorted(econ.trip_cost.items())
            ]
        },
        "exit_cost": list(econ.exit_cost),
        "drivers": [
            {"entered": d.entered, "location": names[d.location], "time": d.time}
            for d in econ.drivers
        ],
        "riders": [
            {"origin": names[r.origin], "dest": names[r.dest], "start": r.start, "value": r.value}
            for r in econ.riders
        ],
    }


def economy_from_dict(doc: Mapping) -> Economy:
    try:
        horizon = doc["horizon"]
        names = list(doc["locations"])
        index = {name: i for i, name in enumerate(names)}
        dist = [list(row) for row in doc["dist"]]
        tc = doc["trip_cost"]
        trip_cost: Mapping[Trip, Money] | None = None
        trip_cost_rate: Money | None = None
        if isinstance(tc, Mapping) and "rate_per_period" in tc:
            trip_cost_rate = tc["rate_per_period"]
        elif isinstance(tc, Mapping) and "entries" in tc:
            trip_cost = {(index[a], index[b], t): c for a, b, t, c in tc["entries"]}
        else:
            raise EconomyFormatError("trip_cost needs rate_per_period or entries")
        ec = doc["exit_cost"]
        exit_cost: Sequence[Money] | None = None
        exit_cost_rate: Money | None = None
        if isinstance(ec, Mapping) and "rate_per_period" in ec:
            exit_cost_rate = ec["rate_per_period"]
        else:
            exit_cost = list(ec)
        drivers = [
            Driver(bool(d["entered"]), index[d["location"]], d["time"]) for d in doc["drivers"]
        ]
        riders = [
            Rider(index[r["origin"]], index[r["dest"]], r["start"], r["value"])
            for r in doc["riders"]
        ]
    except (KeyError, TypeError, IndexError) as exc:
        raise EconomyFormatError(f"malformed economy document: {exc}") from exc
    return make_economy(
        horizon=horizon,
        locations=names,
        dist=dist,
        trip_cost=trip_cost,
        trip_cost_rate=trip_cost_rate,
        exit_cost=exit_cost,
        exit_cost_rate=exit_cost_rate,
        drivers=drivers,
        riders=riders,
    )


def dump_economy(econ: Economy) -> str:
    return json.dumps(economy_to_dict(econ), indent=2, sort_keys=True) + "\n"


def load_economy(text: str) -> Economy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EconomyFormatError(f"not valid JSON: {exc}") from exc
    return economy_from_dict(doc)
