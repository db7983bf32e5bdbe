"""Priced plans: competitive-equilibrium dispatch, verification, and externality prices.

A plan couples the welfare-optimal dispatch with anonymous per-trip prices
derived from one of the two extreme duals. Driver-pessimal prices pay each
driver the welfare gain her replica would add; driver-optimal prices pay the
welfare loss her removal would cause. Both support the optimal dispatch as a
competitive equilibrium: riders who can afford their trip are served, and no
driver can earn more on any other feasible path at the posted prices.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product

from .economy import (
    ActionPath,
    Economy,
    Money,
    Rider,
    Trip,
    action_path_cost,
    validate_economy,
)
from .flow import (
    Dispatch,
    Potentials,
    build_network,
    decompose_flow,
    omega,
    omega_forced_rider,
    potentials_optimal,
    potentials_pessimal,
    solve_min_cost_flow,
)


class InvalidEconomyError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class RiderNotServedError(ValueError):
    """The rider is not picked up in the engine's chosen optimal dispatch."""


def _require_valid(econ: Economy) -> None:
    report = validate_economy(econ)
    if not report.ok:
        raise InvalidEconomyError(report.violations)


@dataclass(frozen=True)
class Plan:
    """Dispatch plus anonymous trip prices and the payments they imply."""

    picked: tuple[bool, ...]
    paths: tuple[ActionPath, ...]
    prices: dict[Trip, Money]
    rider_payments: tuple[Money, ...]
    driver_payments: tuple[Money, ...]
    utilities: tuple[Money, ...]
    welfare: Money
    kind: str  # "pessimal" or "optimal"


def prices_from_potentials(econ: Economy, pots: Potentials) -> dict[Trip, Money]:
    """Anonymous price per feasible trip: potential drop plus trip cost, floored at 0."""
    prices: dict[Trip, Money] = {}
    for a, b, t in econ.feasible_trips():
        raw = pots.at(a, t) - pots.at(b, t + econ.d(a, b)) + econ.cost(a, b, t)
        prices[(a, b, t)] = max(raw, 0)
    return prices


def _assemble(econ: Economy, dispatch: Dispatch, pots: Potentials, kind: str) -> Plan:
    prices = prices_from_potentials(econ, pots)
    rider_payments = tuple(
        prices[econ.rider_trip(j)] if dispatch.picked[j] else 0 for j in range(econ.n_riders)
    )
    driver_payments = []
    utilities = []
    for i, path in enumerate(dispatch.paths):
        pay = sum(prices[step.trip] for step in path.steps if step.rider is not None)
        driver_payments.append(pay)
        utilities.append(pay - action_path_cost(econ, econ.drivers[i], path))
    value = sum(r.value for j, r in enumerate(econ.riders) if dispatch.picked[j])
    cost = sum(action_path_cost(econ, econ.drivers[i], p) for i, p in enumerate(dispatch.paths))
    return Plan(
        picked=dispatch.picked,
        paths=dispatch.paths,
        prices=prices,
        rider_payments=tuple(rider_payments),
        driver_payments=tuple(driver_payments),
        utilities=tuple(utilities),
        welfare=value - cost,
        kind=kind,
    )


def plan_driver_pessimal(econ: Economy) -> Plan:
    """Welfare-optimal dispatch priced at the bottom of the driver-utility lattice."""
    _require_valid(econ)
    net = build_network(econ)
    flow = solve_min_cost_flow(net)
    dispatch = decompose_flow(net, flow, econ)
    return _assemble(econ, dispatch, potentials_pessimal(net, flow), "pessimal")


def plan_driver_optimal(econ: Economy) -> Plan:
    """Welfare-optimal dispatch priced at the top of the driver-utility lattice."""
    _require_valid(econ)
    net = build_network(econ)
    flow = solve_min_cost_flow(net)
    dispatch = decompose_flow(net, flow, econ)
    return _assemble(econ, dispatch, potentials_optimal(net, flow), "optimal")


# ---------------------------------------------------------------------------
# Best responses and equilibrium verification


def best_path_table(econ: Economy, prices: dict[Trip, Money]) -> dict[tuple[int, int], Money]:
    """Highest continuation payoff from each (location, time) at the given prices.

    Backward recursion over exits and trips; a trip earns its clamped price
    (a driver never has to accept a negative payment) minus its cost.
    """
    table: dict[tuple[int, int], Money] = {}
    for t in range(econ.horizon, -1, -1):
        for a in range(econ.n_locations):
            best = -econ.exit_cost[econ.horizon - t]
            for b in range(econ.n_locations):
                arrive = t + econ.d(a, b)
                if arrive > econ.horizon:
                    continue
                gain = (
                    max(prices[(a, b, t)], 0)
                    - econ.cost(a, b, t)
                    + table[(b, arrive)]
                )
                if gain > best:
                    best = gain
            table[(a, t)] = best
    return table


def best_path_value(econ: Economy, prices: dict[Trip, Money], a: int, t: int) -> Money:
    return best_path_table(econ, prices)[(a, t)]


@dataclass
class CEReport:
    rider_br_violations: list[tuple[int, str]]
    driver_br_violations: list[tuple[int, Money, Money]]  # driver, best alternative, plan value
    excess_supply_price_violations: list[Trip]
    envy_violations: list[str]
    budget_delta: Money

    @property
    def ok(self) -> bool:
        return (
            not self.rider_br_violations
            and not self.driver_br_violations
            and not self.excess_supply_price_violations
            and not self.envy_violations
            and self.budget_delta == 0
        )

    def summary(self) -> str:
        if self.ok:
            return "competitive equilibrium: all checks passed"
        parts = []
        for j, why in self.rider_br_violations:
            parts.append(f"rider {j} best response: {why}")
        for i, best, got in self.driver_br_violations:
            parts.append(f"driver {i} best response: an alternative path earns {best}, plan pays {got}")
        for trip in self.excess_supply_price_violations:
            parts.append(f"relocated trip {trip} has a nonzero price")
        parts.extend(self.envy_violations)
        if self.budget_delta != 0:
            parts.append(f"budget imbalance of {self.budget_delta}")
        return "\n".join(parts)


def verify_ce(econ: Economy, plan: Plan) -> CEReport:
    """Check rider/driver best response, excess-supply pricing, envy, and budget."""
    rider_bad: list[tuple[int, str]] = []
    for j, r in enumerate(econ.riders):
        p = plan.prices[econ.rider_trip(j)]
        if r.value > p and not plan.picked[j]:
            rider_bad.append((j, f"value {r.value} beats price {p} but not picked up"))
        if plan.picked[j] and r.value < p:
            rider_bad.append((j, f"picked up but price {p} exceeds value {r.value}"))

    table = best_path_table(econ, plan.prices)
    driver_bad: list[tuple[int, Money, Money]] = []
    for i, drv in enumerate(econ.drivers):
        best = table[(drv.location, drv.time)]
        if not drv.entered:
            best = max(best, 0)
        if plan.utilities[i] != best:
            driver_bad.append((i, best, plan.utilities[i]))

    excess: list[Trip] = []
    for path in plan.paths:
        for step in path.steps:
            if step.rider is None and plan.prices[step.trip] != 0:
                excess.append(step.trip)

    envy: list[str] = []
    for i, i2 in product(range(econ.n_drivers), repeat=2):
        if i < i2 and econ.drivers[i] == econ.drivers[i2]:
            if plan.utilities[i] != plan.utilities[i2]:
                envy.append(f"same-type drivers {i} and {i2} earn {plan.utilities[i]} vs {plan.utilities[i2]}")
    for j, j2 in product(range(econ.n_riders), repeat=2):
        if j >= j2 or econ.rider_trip(j) != econ.rider_trip(j2):
            continue
        vj = econ.riders[j].value
        own = (vj if plan.picked[j] else 0) - plan.rider_payments[j]
        other = (vj if plan.picked[j2] else 0) - plan.rider_payments[j2]
        if other > own:
            envy.append(f"rider {j} envies rider {j2}'s outcome")

    budget = sum(plan.rider_payments) - sum(plan.driver_payments)
    return CEReport(rider_bad, driver_bad, excess, envy, budget)


# ---------------------------------------------------------------------------
# Core membership


@dataclass
class CoreReport:
    blocking: list[tuple[tuple[int, ...], tuple[int, ...], Money, Money]]
    n_checked: int
    exhaustive: bool

    @property
    def ok(self) -> bool:
        return not self.blocking


def _sub_economy(econ: Economy, drivers: tuple[int, ...], riders: tuple[int, ...]) -> Economy:
    return Economy(
        horizon=econ.horizon,
        locations=econ.locations,
        dist=econ.dist,
        trip_cost=econ.trip_cost,
        exit_cost=econ.exit_cost,
        drivers=tuple(econ.drivers[i] for i in drivers),
        riders=tuple(econ.riders[j] for j in riders),
    )


def check_core_sampled(
    econ: Economy, plan: Plan, n_samples: int = 200, seed: int = 0
) -> CoreReport:
    """No sampled coalition can beat its members' plan utilities on its own.

    Exhaustive over all coalitions when there are at most 4096 of them,
    otherwise each agent joins a sampled coalition independently with
    probability one half.
    """
    utils_d = plan.utilities
    utils_r = tuple(
        (econ.riders[j].value if plan.picked[j] else 0) - plan.rider_payments[j]
        for j in range(econ.n_riders)
    )
    n, m = econ.n_drivers, econ.n_riders
    coalitions: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    exhaustive = 2 ** (n + m) <= 4096
    if exhaustive:
        for dmask in range(2**n):
            dsub = tuple(i for i in range(n) if dmask >> i & 1)
            for rmask in range(2**m):
                rsub = tuple(j for j in range(m) if rmask >> j & 1)
                coalitions.append((dsub, rsub))
    else:
        rng = random.Random(seed)
        for _ in range(n_samples):
            dsub = tuple(i for i in range(n) if rng.random() < 0.5)
            rsub = tuple(j for j in range(m) if rng.random() < 0.5)
            coalitions.append((dsub, rsub))
    blocking = []
    for dsub, rsub in coalitions:
        achievable = omega(_sub_economy(econ, dsub, rsub))
        held = sum(utils_d[i] for i in dsub) + sum(utils_r[j] for j in rsub)
        if held < achievable:
            blocking.append((dsub, rsub, held, achievable))
    return CoreReport(blocking, len(coalitions), exhaustive)


# ---------------------------------------------------------------------------
# Rider-side externality prices


def rider_vcg_price(econ: Economy, rider_id: int) -> Money:
    """What serving this rider costs everyone else: two re-solves.

    Defined for riders served in the engine's chosen optimal dispatch;
    otherwise :class:`RiderNotServedError` is raised.
    """
    _require_valid(econ)
    net = build_network(econ)
    flow = solve_min_cost_flow(net)
    dispatch = decompose_flow(net, flow, econ)
    if not dispatch.picked[rider_id]:
        raise RiderNotServedError(f"rider {rider_id} is not served in the optimal dispatch")
    others = tuple(j for j in range(econ.n_riders) if j != rider_id)
    without = omega(_sub_economy(econ, tuple(range(econ.n_drivers)), others))
    return without - (flow.welfare - econ.riders[rider_id].value)


@dataclass
class VcgSupportCheck:
    vcg: Money
    original_price: Money
    reduced_value_price: Money
    served_at_reduced_value: bool

    @property
    def ok(self) -> bool:
        return (
            self.served_at_reduced_value
            and self.reduced_value_price <= self.vcg <= self.original_price
        )


def vcg_price_support_check(econ: Economy, rider_id: int) -> VcgSupportCheck:
    """The externality price is the cheapest equilibrium price for the trip.

    Re-values the rider at her externality price; in that economy she is
    still served in some optimal dispatch and the driver-pessimal price for
    her trip drops to at most the externality price, while the original
    economy prices the trip at least that high.
    """
    vcg = rider_vcg_price(econ, rider_id)
    trip = econ.rider_trip(rider_id)
    original_price = plan_driver_pessimal(econ).prices[trip]
    r = econ.riders[rider_id]
    reduced = Economy(
        horizon=econ.horizon,
        locations=econ.locations,
        dist=econ.dist,
        trip_cost=econ.trip_cost,
        exit_cost=econ.exit_cost,
        drivers=econ.drivers,
        riders=tuple(
            rr if j != rider_id else Rider(rr.origin, rr.dest, rr.start, vcg)
            for j, rr in enumerate(econ.riders)
        ),
    )
    reduced_plan = plan_driver_pessimal(reduced)
    served = reduced_plan.picked[rider_id]
    if not served:
        served = omega_forced_rider(reduced, rider_id) == reduced_plan.welfare
    return VcgSupportCheck(
        vcg=vcg,
        original_price=original_price,
        reduced_value_price=reduced_plan.prices[trip],
        served_at_reduced_value=served,
    )


# ---------------------------------------------------------------------------
# Text dump


def plan_to_text(econ: Economy, plan: Plan) -> str:
    """Human-readable and diffable dump: one line per driver, then the price table."""
    names = econ.locations
    lines = [f"welfare {plan.welfare}"]
    for i, path in enumerate(plan.paths):
        if path.start is None:
            lines.append(f"driver {i}: stays out")
            continue
        steps = []
        for s in path.steps:
            a, b, t = s.trip
            mark = f" rider {s.rider}" if s.rider is not None else ""
            steps.append(f"{names[a]}->{names[b]}@{t}{mark}")
        end = path.path().end(econ)
        assert end is not None
        tail = f"exit {names[end[0]]}@{end[1]}"
        body = "; ".join(steps + [tail])
        lines.append(f"driver {i}: {body} | payment {plan.driver_payments[i]}"
                     f" utility {plan.utilities[i]}")
    for j in range(econ.n_riders):
        status = "picked" if plan.picked[j] else "not picked"
        lines.append(f"rider {j}: {status}, pays {plan.rider_payments[j]}")
    for (a, b, t), p in sorted(plan.prices.items()):
        lines.append(f"price {names[a]} {names[b]} {t} {p}")
    return "\n".join(lines) + "\n"
