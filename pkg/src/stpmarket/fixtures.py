"""Built-in benchmark economies and their expected-outcome checks.

Each fixture is a small, fully specified economy with hand-verifiable
optimal plans, prices, and mechanism behavior. They are shipped as economy
documents under ``fixtures_data/`` so the command-line ``verify-example``
runs offline, and are also constructible in code for tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable

from .economy import Driver, Economy, Rider, load_economy, make_economy


def _example1(trip_rate: int, exit_rate: int) -> Economy:
    return make_economy(
        horizon=2,
        locations=("A", "B"),
        dist=((1, 2), (2, 1)),
        trip_cost_rate=trip_rate,
        exit_cost_rate=exit_rate,
        drivers=[Driver(False, 0, 0)],
        riders=[Rider(0, 0, 0, 5), Rider(0, 0, 1, 6), Rider(0, 1, 0, 8)],
    )


def example1_economy() -> Economy:
    """One opt-in driver, two within-A riders versus one long A-to-B rider."""
    return _example1(trip_rate=2, exit_rate=1)


def rider_vcg_economy() -> Economy:
    """The example1 layout at zero cost; exercises rider-side VCG pricing."""
    return _example1(trip_rate=0, exit_rate=0)


def superbowl_economy() -> Economy:
    """Three drivers and a burst of high-value riders one period later.

    The optimal plan serves rider values 10 + 100 + 100 + 90 = 300 at trip
    costs 80 plus one early-exit penalty of 5, so the optimum is 215; the
    exhaustive enumeration oracle confirms it.
    """
    return make_economy(
        horizon=3,
        locations=("A", "B", "C"),
        dist=((1, 1, 2), (1, 1, 1), (2, 1, 1)),
        trip_cost_rate=10,
        exit_cost_rate=5,
        drivers=[Driver(True, 2, 0), Driver(True, 2, 0), Driver(True, 1, 0)],
        riders=[
            Rider(2, 1, 0, 20),
            Rider(2, 1, 0, 30),
            Rider(1, 2, 0, 10),
            Rider(1, 0, 0, 20),
            Rider(1, 1, 1, 20),
            Rider(2, 1, 1, 100),
            Rider(2, 0, 1, 100),
            Rider(2, 0, 1, 90),
            Rider(2, 0, 1, 80),
        ],
    )


def example3_economy() -> Economy:
    """Two drivers, rider demand only at t=1; replan timing matters here."""
    return make_economy(
        horizon=2,
        locations=("A", "B"),
        dist=((1, 1), (1, 1)),
        trip_cost_rate=0,
        exit_cost_rate=0,
        drivers=[Driver(True, 1, 0), Driver(True, 0, 0)],
        riders=[Rider(1, 1, 1, 8), Rider(0, 0, 1, 6), Rider(0, 0, 1, 5), Rider(0, 0, 1, 4)],
    )


def driver_optimal_economy() -> Economy:
    """Two drivers splitting off to serve C-side and A-side riders at zero cost."""
    return make_economy(
        horizon=3,
        locations=("A", "B", "C"),
        dist=((1, 2, 2), (2, 1, 1), (2, 1, 1)),
        trip_cost_rate=0,
        exit_cost_rate=0,
        drivers=[Driver(True, 1, 0), Driver(True, 1, 0)],
        riders=[Rider(2, 2, 1, 1), Rider(2, 2, 2, 5), Rider(0, 0, 2, 1)],
    )


_BUILDERS: dict[str, Callable[[], Economy]] = {
    "example1": example1_economy,
    "rider-vcg": rider_vcg_economy,
    "superbowl": superbowl_economy,
    "example3": example3_economy,
    "driver-optimal": driver_optimal_economy,
}

# Fixture checks that share an economy refer to it by these names.
_ECONOMY_OF_CHECK = {
    "example1": "example1",
    "rider-vcg": "rider-vcg",
    "superbowl": "superbowl",
    "superbowl-replan": "superbowl",
    "superbowl-myopic": "superbowl",
    "example3": "example3",
    "example3-naive-replan": "example3",
    "driver-optimal": "driver-optimal",
    "dynamic-vcg": "driver-optimal",
}


def fixture_economy_names() -> list[str]:
    return sorted(_BUILDERS)


def fixture_economy(name: str) -> Economy:
    """Load a fixture economy from its shipped document."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown fixture economy {name!r}")
    fname = name.replace("-", "_") + ".json"
    text = resources.files("stpmarket").joinpath("fixtures_data", fname).read_text()
    return load_economy(text)


@dataclass
class CheckResult:
    name: str
    ok: bool
    details: list[str]


def fixture_names() -> list[str]:
    return sorted(_ECONOMY_OF_CHECK)


def run_fixture(name: str) -> CheckResult:
    """Run one named fixture's assertions against the engine."""
    if name not in _ECONOMY_OF_CHECK:
        raise KeyError(f"unknown fixture {name!r}")
    econ = fixture_economy(_ECONOMY_OF_CHECK[name])
    details: list[str] = []
    ok = _CHECKS[name](econ, details)
    return CheckResult(name, ok, details)


def _expect(details: list[str], label: str, got: object, want: object) -> bool:
    good = got == want
    details.append(f"{'ok' if good else 'FAIL'}: {label}: expected {want!r}, got {got!r}")
    return good


def _expect_true(details: list[str], label: str, cond: bool) -> bool:
    details.append(f"{'ok' if cond else 'FAIL'}: {label}")
    return cond


def _check_example1(econ: Economy, details: list[str]) -> bool:
    from .economy import Path, enumerate_feasible_paths, path_cost

    drv = econ.drivers[0]
    paths = enumerate_feasible_paths(econ, drv)
    good = _expect(details, "feasible path count", len(paths), 4)
    stay2 = Path((0, 0), ((0, 0, 0), (0, 0, 1)))
    cross = Path((0, 0), ((0, 1, 0),))
    stay1 = Path((0, 0), ((0, 0, 0),))
    good &= _expect(details, "stay-two-periods path cost", path_cost(econ, drv, stay2), 4)
    good &= _expect(details, "cross-town path cost", path_cost(econ, drv, cross), 4)
    good &= _expect(details, "early-exit path cost", path_cost(econ, drv, stay1), 3)
    good &= _expect(details, "stay-out path cost", path_cost(econ, drv, Path(None, ())), 0)
    return good


def _check_superbowl(econ: Economy, details: list[str]) -> bool:
    from .planner import plan_driver_pessimal, verify_ce

    plan = plan_driver_pessimal(econ)
    A, B, C = 0, 1, 2
    want = {
        (C, B, 0): 55,
        (B, C, 0): 0,
        (B, A, 0): 70,
        (C, B, 1): 75,
        (B, B, 1): 20,
        (C, A, 1): 80,
    }
    good = True
    for trip, price in want.items():
        a, b, t = trip
        label = f"price {econ.locations[a]}->{econ.locations[b]}@{t}"
        good &= _expect(details, label, plan.prices[trip], price)
    good &= _expect(details, "driver utilities", plan.utilities, (50, 50, 50))
    good &= _expect(details, "welfare", plan.welfare, 215)
    good &= _expect_true(details, "plan is a competitive equilibrium", verify_ce(econ, plan).ok)
    return good


def _check_superbowl_replan(econ: Economy, details: list[str]) -> bool:
    from .economy import TakeTrip
    from .flow import build_network, potentials_pessimal, solve_min_cost_flow
    from .mechanisms import run_simulation, stp_mechanism

    B = 1
    stay_at_b = TakeTrip((B, B, 0))
    trace = run_simulation(econ, stp_mechanism(), overrides=[(2, 0, stay_at_b)])
    good = _expect(details, "replan times", trace.replans, [1])
    shifted = trace.replanned_economies[1]
    net = build_network(shifted)
    flow = solve_min_cost_flow(net)
    pots = potentials_pessimal(net, flow)
    # The shifted economy's clock starts at the replan: original t=1 is its 0.
    good &= _expect(details, "potential at C after replan", pots.at(2, 0), 70)
    good &= _expect(details, "potential at B after replan", pots.at(1, 0), -10)
    good &= _expect(details, "potential at B one period later", pots.at(1, 1), -5)
    prices = trace.price_history[1]
    good &= _expect(details, "replanned C->A price", prices[(2, 0, 1)], 90)
    good &= _expect(details, "replanned C->B price", prices[(2, 1, 1)], 85)
    good &= _expect(details, "replanned B->B price", prices[(1, 1, 1)], 5)
    cont = trace.continuation_utility(2, 1)
    good &= _expect(details, "deviating driver's continuation", cont, -10)
    return good


def _check_superbowl_myopic(econ: Economy, details: list[str]) -> bool:
    from .mechanisms import myopic_mechanism, run_simulation, single_deviation_regret

    mech = myopic_mechanism(seed=7)
    trace = run_simulation(econ, mech)
    good = _expect_true(details, "realized welfare at most 25", trace.welfare(econ) <= 25)
    prices = trace.price_history[1]
    good &= _expect(details, "clearing price C->B at t=1", prices[(2, 1, 1)], 100)
    good &= _expect(details, "clearing price C->A at t=1", prices[(2, 0, 1)], 200)
    regret = single_deviation_regret(econ, myopic_mechanism(seed=7), 0)
    good &= _expect_true(details, "driver 1 regret at least 20", regret >= 20)
    return good


def _check_example3(econ: Economy, details: list[str]) -> bool:
    from .mechanisms import run_simulation, single_deviation_regret, stp_mechanism

    trace = run_simulation(econ, stp_mechanism())
    good = _expect(details, "replans without deviation", trace.replans, [])
    prices = trace.price_history[0]
    good &= _expect(details, "B->B@1 price", prices[(1, 1, 1)], 5)
    good &= _expect(details, "A->A@1 price", prices[(0, 0, 1)], 5)
    for i in range(econ.n_drivers):
        r = single_deviation_regret(econ, stp_mechanism(), i)
        good &= _expect(details, f"driver {i} regret under replan-on-deviation", r, 0)
    return good


def _check_example3_naive_replan(econ: Economy, details: list[str]) -> bool:
    from .mechanisms import always_replan_mechanism, single_deviation_regret, run_simulation

    trace = run_simulation(econ, always_replan_mechanism())
    good = _expect(details, "replan times", trace.replans, [1])
    good &= _expect(details, "repriced B->B@1", trace.price_history[1][(1, 1, 1)], 0)
    regret = single_deviation_regret(econ, always_replan_mechanism(), 0)
    good &= _expect(details, "driver 1 regret under always-replan", regret, 4)
    return good


def _check_rider_vcg(econ: Economy, details: list[str]) -> bool:
    from .planner import plan_driver_pessimal, rider_vcg_price, vcg_price_support_check

    good = _expect(details, "rider 1 externality price", rider_vcg_price(econ, 0), 2)
    good &= _expect(details, "rider 2 externality price", rider_vcg_price(econ, 1), 3)
    plan = plan_driver_pessimal(econ)
    psum = plan.prices[(0, 0, 0)] + plan.prices[(0, 0, 1)]
    good &= _expect(details, "sum of within-A prices", psum, 8)
    good &= _expect(details, "A->B price", plan.prices[(0, 1, 0)], 8)
    for j in (0, 1):
        check = vcg_price_support_check(econ, j)
        good &= _expect_true(details, f"rider {j} minimum-price support check", check.ok)
    return good


def _check_driver_optimal(econ: Economy, details: list[str]) -> bool:
    from .economy import TakeTrip
    from .mechanisms import driver_optimal_mechanism, run_simulation

    trace = run_simulation(econ, driver_optimal_mechanism())
    utils = tuple(trace.driver_utility(i) for i in range(econ.n_drivers))
    good = _expect(details, "driver utilities", utils, (1, 1))
    B = 1
    # Driver 1 is dispatched toward the C-side riders; she stays at B instead.
    trace2 = run_simulation(
        econ, driver_optimal_mechanism(), overrides=[(1, 0, TakeTrip((B, B, 0)))]
    )
    good &= _expect(details, "replan times after deviation", trace2.replans, [1])
    good &= _expect(details, "replanned C->C@2 price", trace2.price_history[1][(2, 2, 2)], 5)
    return good


def _check_dynamic_vcg(econ: Economy, details: list[str]) -> bool:
    from .mechanisms import dynamic_vcg_payments

    payments = dynamic_vcg_payments(econ)
    good = _expect(details, "C-side driver per-period payments", payments[1], [-5, 1, 5])
    good &= _expect(details, "C-side driver total", sum(payments[1]), 1)
    good &= _expect(details, "A-side driver total", sum(payments[0]), 1)
    return good


_CHECKS: dict[str, Callable[[Economy, list[str]], bool]] = {
    "example1": _check_example1,
    "rider-vcg": _check_rider_vcg,
    "superbowl": _check_superbowl,
    "superbowl-replan": _check_superbowl_replan,
    "superbowl-myopic": _check_superbowl_myopic,
    "example3": _check_example3,
    "example3-naive-replan": _check_example3_naive_replan,
    "driver-optimal": _check_driver_optimal,
    "dynamic-vcg": _check_dynamic_vcg,
}
