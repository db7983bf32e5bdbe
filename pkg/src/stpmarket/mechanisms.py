"""Dynamic dispatch-and-payment mechanisms and the simulation harness.

A mechanism dispatches every available driver each period, posts the payment
each driver receives if she takes her dispatched action, and the price each
newly dispatched rider pays on pickup. Drivers may instead relocate anywhere
within reach or leave; deviators earn nothing that period. The planning
mechanisms here differ only in which priced plan they compute and when they
recompute it:

* replan-on-deviation with driver-pessimal prices (the headline mechanism),
* the same control flow with driver-optimal prices,
* a static variant that never replans,
* a naive variant that replans every period,
* and a myopic per-location spot market as the baseline.

Simulations are deterministic given the economy, the mechanism, its seed,
and the drivers' strategies, which makes exact regret computations possible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .economy import (
    Action,
    ActionPath,
    Available,
    Economy,
    Exit,
    Gone,
    Hold,
    Money,
    PathStep,
    PlatformState,
    TakeTrip,
    Trip,
    apply_actions,
    available_deviations,
    initial_state,
    is_actionable,
    actionable_location,
    shift_economy,
    shift_index_maps,
)
from .planner import Plan, plan_driver_optimal, plan_driver_pessimal

Pay = Money | Fraction


def _mix_seeds(a: int, b: int) -> int:
    x = (a * 0x9E3779B97F4A7C15 + b * 0xBF58476D1CE4E5B9 + 0x94D049BB133111EB) % 2**64
    x ^= x >> 31
    x = (x * 0xD6E8FEB86659FD93) % 2**64
    x ^= x >> 27
    return x


@dataclass
class StepDispatch:
    actions: dict[int, Action]
    driver_pay: dict[int, Pay]
    rider_prices: dict[int, Pay]
    prices: dict[Trip, Pay] | None = None  # posted this step, original time coordinates
    replanned: bool = False
    planning_economy: Economy | None = None


class Mechanism:
    """Stateful dispatcher confined to one simulation run at a time."""

    def start(self, econ: Economy, seed: int = 0) -> None:
        raise NotImplementedError

    def dispatch(self, t: int, state: PlatformState) -> StepDispatch:
        raise NotImplementedError

    def observe(
        self,
        t: int,
        dispatched: Mapping[int, Action],
        taken: Sequence[Action],
        state_after: PlatformState,
    ) -> None:
        raise NotImplementedError


def _plan_schedule(econ: Economy, plan: Plan) -> dict[tuple[int, int], Action]:
    """Planned action per (driver, time): trips, explicit early exits, stay-outs."""
    schedule: dict[tuple[int, int], Action] = {}
    for i, path in enumerate(plan.paths):
        drv = econ.drivers[i]
        if path.start is None:
            schedule[(i, drv.time)] = Exit()
            continue
        for step in path.steps:
            schedule[(i, step.trip[2])] = TakeTrip(step.trip, step.rider)
        end = path.path().end(econ)
        assert end is not None
        if end[1] < econ.horizon:
            schedule[(i, end[1])] = Exit()
    return schedule


class PlanningMechanism(Mechanism):
    """Computes a priced plan up front and executes it, optionally recomputing.

    ``replan`` is one of "deviation" (recompute on the time-shifted economy
    right after any driver strays from a dispatch), "never", or "always"
    (recompute each period regardless).
    """

    def __init__(self, plan_kind: str = "pessimal", replan: str = "deviation"):
        assert plan_kind in ("pessimal", "optimal")
        assert replan in ("deviation", "never", "always")
        self.plan_kind = plan_kind
        self.replan = replan

    def _plan(self, econ: Economy) -> Plan:
        if self.plan_kind == "pessimal":
            return plan_driver_pessimal(econ)
        return plan_driver_optimal(econ)

    def start(self, econ: Economy, seed: int = 0) -> None:
        self._econ = econ
        plan = self._plan(econ)
        self._schedule = _plan_schedule(econ, plan)
        self._prices: dict[Trip, Pay] = dict(plan.prices)
        self._fresh_prices: dict[Trip, Pay] | None = dict(plan.prices)
        self._replanned_econ: Economy | None = None
        self._pending_replan = False

    def _replan_now(self, t: int, state: PlatformState) -> None:
        shifted = shift_economy(self._econ, state)
        driver_map, rider_map = shift_index_maps(self._econ, state)
        plan = self._plan(shifted)
        schedule: dict[tuple[int, int], Action] = {}
        for (k, ts), act in _plan_schedule(shifted, plan).items():
            if isinstance(act, TakeTrip):
                a, b, s = act.trip
                rider = None if act.rider is None else rider_map[act.rider]
                act = TakeTrip((a, b, s + t), rider)
            schedule[(driver_map[k], ts + t)] = act
        self._schedule = schedule
        self._prices = {(a, b, s + t): p for (a, b, s), p in plan.prices.items()}
        self._fresh_prices = dict(self._prices)
        self._replanned_econ = shifted

    def dispatch(self, t: int, state: PlatformState) -> StepDispatch:
        replanned = False
        if self._pending_replan or (self.replan == "always" and t > 0):
            self._replan_now(t, state)
            self._pending_replan = False
            replanned = True
        actions: dict[int, Action] = {}
        pay: dict[int, Pay] = {}
        rider_prices: dict[int, Pay] = {}
        for i, ds in enumerate(state.drivers):
            if not is_actionable(ds, t):
                continue
            act = self._schedule.get((i, t))
            if isinstance(act, TakeTrip) and act.trip[0] != actionable_location(ds):
                act = None  # the plan no longer matches where this driver is
            if act is None:
                loc = actionable_location(ds)
                act = TakeTrip((loc, loc, t))
            actions[i] = act
            if isinstance(act, TakeTrip) and act.rider is not None:
                price = self._prices[act.trip]
                pay[i] = price
                rider_prices[act.rider] = price
        posted = self._fresh_prices
        self._fresh_prices = None
        return StepDispatch(
            actions=actions,
            driver_pay=pay,
            rider_prices=rider_prices,
            prices=posted,
            replanned=replanned,
            planning_economy=self._replanned_econ if replanned else None,
        )

    def observe(
        self,
        t: int,
        dispatched: Mapping[int, Action],
        taken: Sequence[Action],
        state_after: PlatformState,
    ) -> None:
        if self.replan != "deviation":
            return
        for i, act in dispatched.items():
            if taken[i] != act:
                self._pending_replan = True
                return


def stp_mechanism() -> Mechanism:
    """Driver-pessimal plan, recomputed on the shifted economy after any deviation."""
    return PlanningMechanism("pessimal", "deviation")


def driver_optimal_mechanism() -> Mechanism:
    """Replans like the headline mechanism but prices at the driver-optimal dual."""
    return PlanningMechanism("optimal", "deviation")


def static_ce_mechanism(plan_kind: str = "pessimal") -> Mechanism:
    """Announces one priced plan at the start and never updates it."""
    return PlanningMechanism(plan_kind, "never")


def always_replan_mechanism(plan_kind: str = "pessimal") -> Mechanism:
    """Recomputes the plan every period whether or not anyone deviated."""
    return PlanningMechanism(plan_kind, "always")


class MyopicMechanism(Mechanism):
    """Per-location spot market clearing on per-period surplus.

    Riders at (a, t) with nonnegative per-period surplus are served in
    decreasing surplus order. The lowest market-clearing rate prices every
    trip leaving (a, t); undispatched drivers relocate to a uniformly random
    location within reach, or exit when relocating costs more than leaving.
    """

    def __init__(self, seed: int = 0):
        self.base_seed = seed

    def start(self, econ: Economy, seed: int = 0) -> None:
        self._econ = econ
        self._rng = random.Random(_mix_seeds(self.base_seed, seed))

    def dispatch(self, t: int, state: PlatformState) -> StepDispatch:
        econ = self._econ
        actions: dict[int, Action] = {}
        pay: dict[int, Pay] = {}
        rider_prices: dict[int, Pay] = {}
        prices: dict[Trip, Pay] = {}

        def surplus(j: int) -> Fraction:
            r = econ.riders[j]
            c = econ.cost(r.origin, r.dest, r.start)
            return Fraction(r.value - c, econ.d(r.origin, r.dest))

        for a in range(econ.n_locations):
            here = [
                i
                for i, ds in enumerate(state.drivers)
                if is_actionable(ds, t) and actionable_location(ds) == a
            ]
            candidates = [
                j
                for j, r in enumerate(econ.riders)
                if r.start == t and r.origin == a and surplus(j) >= 0
            ]
            candidates.sort(key=lambda j: (-surplus(j), j))
            assigned = candidates[: len(here)]
            clearing = Fraction(0)
            if len(candidates) > len(here):
                clearing = surplus(candidates[len(here)])
            for b in range(econ.n_locations):
                if t + econ.d(a, b) <= econ.horizon:
                    p = clearing * econ.d(a, b) + econ.cost(a, b, t)
                    prices[(a, b, t)] = int(p) if p.denominator == 1 else p
            for i, j in zip(here, assigned):
                r = econ.riders[j]
                trip = (a, r.dest, t)
                actions[i] = TakeTrip(trip, j)
                pay[i] = prices[trip]
                rider_prices[j] = prices[trip]
            for i in here[len(assigned):]:
                reachable = [b for b in range(econ.n_locations) if t + econ.d(a, b) <= econ.horizon]
                b = reachable[self._rng.randrange(len(reachable))]
                if econ.cost(a, b, t) <= econ.exit_penalty(t):
                    actions[i] = TakeTrip((a, b, t))
                else:
                    actions[i] = Exit()
        return StepDispatch(actions, pay, rider_prices, prices=prices)

    def observe(self, t, dispatched, taken, state_after) -> None:
        pass


def myopic_mechanism(seed: int = 0) -> Mechanism:
    return MyopicMechanism(seed)


MECHANISM_NAMES = ("stp", "myopic", "static-pessimal", "static-optimal", "driver-optimal")


def make_mechanism(name: str, seed: int = 0) -> Mechanism:
    if name == "stp":
        return stp_mechanism()
    if name == "myopic":
        return myopic_mechanism(seed)
    if name == "static-pessimal":
        return static_ce_mechanism("pessimal")
    if name == "static-optimal":
        return static_ce_mechanism("optimal")
    if name == "driver-optimal":
        return driver_optimal_mechanism()
    raise ValueError(f"unknown mechanism {name!r}")


# ---------------------------------------------------------------------------
# Simulation


Strategy = Callable[[int, int, PlatformState, Action | None, list[Action]], Action]


def straightforward(i: int, t: int, state: PlatformState, dispatched, deviations) -> Action:
    assert dispatched is not None
    return dispatched


def scripted(overrides: Sequence[tuple[int, int, Action]]) -> dict[int, Strategy]:
    """Strategies that follow dispatches except at the scripted (driver, time) points."""
    table: dict[tuple[int, int], Action] = {(i, t): a for i, t, a in overrides}
    drivers = {i for i, _, _ in overrides}

    def make(driver: int) -> Strategy:
        def play(i, t, state, dispatched, deviations):
            return table.get((i, t), dispatched)

        return play

    return {i: make(i) for i in drivers}


@dataclass
class DriverStep:
    dispatched: Action | None
    taken: Action
    payment: Pay
    cost: Money


@dataclass
class Trace:
    states: list[PlatformState]
    steps: list[list[DriverStep]]
    charges: list[tuple[int, int, Pay]]  # (time, rider, amount)
    replans: list[int] = field(default_factory=list)
    replanned_economies: dict[int, Economy] = field(default_factory=dict)
    price_history: dict[int, dict[Trip, Pay]] = field(default_factory=dict)

    def driver_utility(self, i: int) -> Pay:
        return sum(s[i].payment - s[i].cost for s in self.steps)

    def continuation_utility(self, i: int, from_t: int) -> Pay:
        return sum(s[i].payment - s[i].cost for s in self.steps[from_t:])

    def served_riders(self) -> dict[int, int]:
        return {j: t for t, j, _ in self.charges}

    def total_charges(self) -> Pay:
        return sum(amount for _, _, amount in self.charges)

    def total_payments(self) -> Pay:
        return sum(s.payment for step in self.steps for s in step)

    def welfare(self, econ: Economy) -> Pay:
        value = sum(econ.riders[j].value for j in self.served_riders())
        cost = sum(s.cost for step in self.steps for s in step)
        return value - cost


def run_simulation(
    econ: Economy,
    mech: Mechanism,
    strategies: Mapping[int, Strategy] | None = None,
    seed: int = 0,
    overrides: Sequence[tuple[int, int, Action]] | None = None,
) -> Trace:
    """Step the mechanism and drivers through the horizon; exact accounting.

    Drivers default to the straightforward strategy of taking every dispatch;
    ``overrides`` patches single (driver, time, action) choices on top.
    """
    if overrides:
        strategies = {**scripted(overrides), **(strategies or {})}
    strategies = strategies or {}
    mech.start(econ, seed)
    state = initial_state(econ)
    states = [state]
    steps: list[list[DriverStep]] = []
    charges: list[tuple[int, int, Pay]] = []
    replans: list[int] = []
    replanned: dict[int, Economy] = {}
    price_history: dict[int, dict[Trip, Pay]] = {}
    for t in range(econ.horizon):
        sd = mech.dispatch(t, state)
        if sd.prices is not None:
            price_history[t] = sd.prices
        if sd.replanned:
            replans.append(t)
            if sd.planning_economy is not None:
                replanned[t] = sd.planning_economy
        actions: list[Action] = []
        row: list[DriverStep] = []
        for i, ds in enumerate(state.drivers):
            if not is_actionable(ds, t):
                actions.append(Hold())
                row.append(DriverStep(None, Hold(), 0, 0))
                continue
            dispatched = sd.actions.get(i)
            deviations = available_deviations(econ, state, i)
            play = strategies.get(i, straightforward)
            act = play(i, t, state, dispatched, deviations)
            if act != dispatched and act not in deviations:
                from .economy import IllegalActionError

                raise IllegalActionError(i, t, "strategy chose an unavailable action")
            actions.append(act)
            payment: Pay = sd.driver_pay.get(i, 0) if act == dispatched else 0
            cost: Money = 0
            if isinstance(act, TakeTrip):
                a, b, s = act.trip
                cost = econ.cost(a, b, s)
            elif isinstance(act, Exit) and isinstance(ds, Available):
                cost = econ.exit_penalty(t)
            row.append(DriverStep(dispatched, act, payment, cost))
            if isinstance(act, TakeTrip) and act.rider is not None and act == dispatched:
                charges.append((t, act.rider, sd.rider_prices[act.rider]))
        state = apply_actions(econ, state, actions)
        states.append(state)
        steps.append(row)
        mech.observe(t, sd.actions, actions, state)
    return Trace(states, steps, charges, replans, replanned, price_history)


def mechanism_time0_plan(econ: Economy, mech: Mechanism, seed: int = 0) -> Plan:
    """The full-horizon outcome under straightforward play, packaged as a plan."""
    trace = run_simulation(econ, mech, seed=seed)
    served = trace.served_riders()
    picked = tuple(j in served for j in range(econ.n_riders))
    paths: list[ActionPath] = []
    payments: list[Pay] = []
    utilities: list[Pay] = []
    for i, drv in enumerate(econ.drivers):
        steps: list[PathStep] = []
        entered = drv.entered
        for row in trace.steps:
            act = row[i].taken
            if isinstance(act, TakeTrip):
                entered = True
                steps.append(PathStep(act.trip, act.rider))
        start = (drv.location, drv.time) if entered else None
        paths.append(ActionPath(start, tuple(steps)))
        pay = sum(row[i].payment for row in trace.steps)
        cost = sum(row[i].cost for row in trace.steps)
        payments.append(pay)
        utilities.append(pay - cost)
    prices: dict[Trip, Pay] = {}
    for t in sorted(trace.price_history):
        prices.update(trace.price_history[t])
    rider_payments = tuple(
        next((amt for tt, j2, amt in trace.charges if j2 == j), 0) for j in range(econ.n_riders)
    )
    return Plan(
        picked=picked,
        paths=tuple(paths),
        prices=prices,
        rider_payments=rider_payments,
        driver_payments=tuple(payments),
        utilities=tuple(utilities),
        welfare=trace.welfare(econ),
        kind="realized",
    )


def single_deviation_regret(
    econ: Economy, mech: Mechanism, driver_id: int, seed: int = 0
) -> Pay:
    """Best gain from one off-dispatch action followed by straightforward play.

    All other drivers stay straightforward throughout; every branch reuses the
    mechanism with the same seed so its internal randomness matches the base
    run. Floored at zero. For replan-on-deviation planning this single
    deviation search is the exact finite-horizon equilibrium test; for other
    mechanisms it is a lower bound on fully strategic regret.
    """
    base = run_simulation(econ, mech, seed=seed)
    base_utility = base.driver_utility(driver_id)
    best = base_utility
    for t in range(econ.horizon):
        state = base.states[t]
        if not is_actionable(state.drivers[driver_id], t):
            continue
        dispatched = base.steps[t][driver_id].dispatched
        for act in available_deviations(econ, state, driver_id):
            if act == dispatched:
                continue
            branch = run_simulation(econ, mech, seed=seed, overrides=[(driver_id, t, act)])
            utility = branch.driver_utility(driver_id)
            if utility > best:
                best = utility
    gain = best - base_utility
    return gain if gain > 0 else 0


# ---------------------------------------------------------------------------
# Trace serialization


def _action_to_text(econ: Economy, act: Action | None) -> str:
    if act is None:
        return "-"
    if isinstance(act, Hold):
        return "hold"
    if isinstance(act, Exit):
        return "exit"
    a, b, t = act.trip
    names = econ.locations
    core = f"{names[a]}->{names[b]}@{t}"
    return f"pickup:{act.rider}:{core}" if act.rider is not None else f"reloc:{core}"


def _action_from_text(econ: Economy, text: str) -> Action | None:
    if text == "-":
        return None
    if text == "hold":
        return Hold()
    if text == "exit":
        return Exit()
    kind, _, rest = text.partition(":")
    rider: int | None = None
    if kind == "pickup":
        rid, _, rest = rest.partition(":")
        rider = int(rid)
    ab, _, t = rest.partition("@")
    a, _, b = ab.partition("->")
    return TakeTrip((econ.locations.index(a), econ.locations.index(b), int(t)), rider)


def _pay_to_text(x: Pay) -> str:
    return str(x)


def _pay_from_text(s: str) -> Pay:
    f = Fraction(s)
    return int(f) if f.denominator == 1 else f


def trace_to_text(econ: Economy, trace: Trace) -> str:
    """Line-oriented dump: step records, rider charges, and replan markers."""
    lines = []
    for t, row in enumerate(trace.steps):
        for i, s in enumerate(row):
            lines.append(
                f"step {t} driver {i} dispatched {_action_to_text(econ, s.dispatched)}"
                f" taken {_action_to_text(econ, s.taken)}"
                f" payment {_pay_to_text(s.payment)} cost {s.cost}"
            )
    for t, j, amount in trace.charges:
        lines.append(f"charge {t} rider {j} amount {_pay_to_text(amount)}")
    for t in trace.replans:
        lines.append(f"replan {t}")
    return "\n".join(lines) + "\n"


def trace_from_text(econ: Economy, text: str) -> Trace:
    """Parse the textual dump back into a trace (steps, charges, replans only)."""
    steps: dict[int, dict[int, DriverStep]] = {}
    charges: list[tuple[int, int, Pay]] = []
    replans: list[int] = []
    for line in text.strip().splitlines():
        parts = line.split()
        if parts[0] == "step":
            t, i = int(parts[1]), int(parts[3])
            steps.setdefault(t, {})[i] = DriverStep(
                dispatched=_action_from_text(econ, parts[5]),
                taken=_action_from_text(econ, parts[7]) or Hold(),
                payment=_pay_from_text(parts[9]),
                cost=int(parts[11]),
            )
        elif parts[0] == "charge":
            charges.append((int(parts[1]), int(parts[3]), _pay_from_text(parts[5])))
        elif parts[0] == "replan":
            replans.append(int(parts[1]))
    rows = [
        [steps[t][i] for i in sorted(steps[t])] for t in sorted(steps)
    ]
    return Trace(states=[], steps=rows, charges=charges, replans=replans)


# ---------------------------------------------------------------------------
# Per-period externality payments


def _without_driver(state: PlatformState, i: int) -> PlatformState:
    drivers = list(state.drivers)
    drivers[i] = Gone()
    return PlatformState(state.time, tuple(drivers))


def dynamic_vcg_payments(econ: Economy) -> list[list[Money]]:
    """Per-driver, per-period payments equal to the flow of marginal externality.

    The payment to a driver at period t is the change, as her hypothetical
    departure date moves from t to t+1, in everyone else's total welfare:
    realized value and costs of others through the period, plus the optimal
    continuation of the remaining market without her. Summed over periods and
    net of her own costs this equals her removal's welfare loss.
    """
    plan = plan_driver_pessimal(econ)
    schedule = _plan_schedule(econ, plan)
    states = [initial_state(econ)]
    for t in range(econ.horizon):
        acts: list[Action] = []
        for i, ds in enumerate(states[-1].drivers):
            acts.append(schedule.get((i, t), Hold()) if is_actionable(ds, t) else Hold())
        states.append(apply_actions(econ, states[-1], acts))

    from .flow import omega

    n = econ.n_drivers
    payments: list[list[Money]] = []
    for i in range(n):
        others = tuple(d for k, d in enumerate(econ.drivers) if k != i)
        absent = Economy(
            horizon=econ.horizon,
            locations=econ.locations,
            dist=econ.dist,
            trip_cost=econ.trip_cost,
            exit_cost=econ.exit_cost,
            drivers=others,
            riders=econ.riders,
        )
        w_prev = omega(absent)
        realized = 0
        row: list[Money] = []
        for t in range(econ.horizon):
            for j, r in enumerate(econ.riders):
                if r.start == t and plan.picked[j]:
                    realized += r.value
            for k in range(n):
                if k == i:
                    continue
                ds = states[t].drivers[k]
                if not is_actionable(ds, t):
                    continue
                act = schedule.get((k, t))
                if isinstance(act, TakeTrip):
                    realized -= econ.cost(*act.trip)
                elif isinstance(act, Exit) and isinstance(ds, Available):
                    realized -= econ.exit_penalty(t)
            if t + 1 == econ.horizon:
                cont = 0
            else:
                cont = omega(shift_economy(econ, _without_driver(states[t + 1], i)))
            w_now = realized + cont
            row.append(w_now - w_prev)
            w_prev = w_now
        payments.append(row)
    return payments
