"""Planning, pricing, and simulation engine for spatio-temporal ridesharing markets.

Exact integer arithmetic end to end: welfare-optimal dispatch by integral
min-cost flow over the time-expanded trip network, competitive-equilibrium
trip prices from the extreme duals of that flow, dynamic mechanisms that
replan after driver deviations, and seeded scenario experiments.
"""

from .economy import (
    ActionPath,
    Available,
    Driver,
    Economy,
    EnRoute,
    Exit,
    Gone,
    Hold,
    Path,
    PathStep,
    Pending,
    PlatformState,
    Rider,
    TakeTrip,
    Trip,
    apply_actions,
    available_deviations,
    canonical_economy,
    dump_economy,
    enumerate_feasible_paths,
    initial_state,
    load_economy,
    make_economy,
    path_cost,
    shift_economy,
    shift_index_maps,
    validate_economy,
)
from .flow import (
    Dispatch,
    FlowNetwork,
    OptimalFlow,
    Potentials,
    build_network,
    check_complementary_slackness,
    check_dual_feasibility,
    decompose_flow,
    dump_network,
    omega,
    potentials_optimal,
    potentials_pessimal,
    solve_min_cost_flow,
)
from .planner import (
    CEReport,
    Plan,
    best_path_value,
    check_core_sampled,
    plan_driver_optimal,
    plan_driver_pessimal,
    plan_to_text,
    rider_vcg_price,
    vcg_price_support_check,
    verify_ce,
)
from .mechanisms import (
    MECHANISM_NAMES,
    Mechanism,
    Trace,
    always_replan_mechanism,
    driver_optimal_mechanism,
    dynamic_vcg_payments,
    make_mechanism,
    mechanism_time0_plan,
    myopic_mechanism,
    run_simulation,
    single_deviation_regret,
    static_ce_mechanism,
    stp_mechanism,
    trace_from_text,
    trace_to_text,
)
from .experiments import (
    Metrics,
    MetricsTable,
    ScenarioParams,
    aggregate,
    export_results,
    gen_scenario_airport,
    gen_scenario_event,
    gen_scenario_rush,
    run_batch,
    time_efficiency,
)
from .fixtures import fixture_economy, fixture_names, run_fixture

__version__ = "0.1.0"
