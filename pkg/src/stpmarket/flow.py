"""Integral min-cost-flow planning over the time-expanded trip network.

Drivers flow through a graph whose nodes are (location, time) pairs plus one
source node per driver and a single sink. Rider edges (capacity one, cost
equal to trip cost minus rider value) compete with relocation edges, exit
edges priced by the early-exit schedule, and zero-cost entry edges. The
optimal dispatch problem is exactly a min-cost flow with one unit sourced at
each driver node, so an integral optimum always exists.

The solver is successive shortest paths with node potentials: one
label-correcting pass absorbs the negative rider-edge costs, then each
driver unit is routed by Dijkstra over reduced costs. Everything is exact
integer arithmetic.

Shortest-path passes over the residual graph of an optimum yield the two
extreme dual solutions used for pricing: the per-node welfare gain from one
extra driver (distance to the sink, negated) and the per-node welfare loss
from removing one (distance from the sink).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Mapping, Sequence

from .economy import ActionPath, Economy, Money, PathStep

NodeKey = tuple  # ("loc", a, t) | ("driver", i) | ("sink",)

RIDER, RELOCATION, EXIT, ENTRY = 1, 2, 3, 4

_UNREACHED = None


class FlowInfeasibleError(RuntimeError):
    """The requested boundary condition admits no feasible flow."""


class FlowInvariantError(RuntimeError):
    """An internal optimality or conservation invariant failed."""


@dataclass
class FlowNetwork:
    economy: Economy
    n_nodes: int
    sink: int
    tails: list[int]
    heads: list[int]
    caps: list[int]
    costs: list[Money]
    classes: list[int]
    riders: list[int]  # rider id for rider edges, -1 otherwise
    out_edges: list[list[int]]
    in_edges: list[list[int]]

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    def loc_node(self, a: int, t: int) -> int:
        return a * (self.economy.horizon + 1) + t

    def driver_node(self, i: int) -> int:
        return self.economy.n_locations * (self.economy.horizon + 1) + i

    def node_key(self, idx: int) -> NodeKey:
        horizon = self.economy.horizon
        n_loc_nodes = self.economy.n_locations * (horizon + 1)
        if idx < n_loc_nodes:
            return ("loc", idx // (horizon + 1), idx % (horizon + 1))
        if idx < n_loc_nodes + self.economy.n_drivers:
            return ("driver", idx - n_loc_nodes)
        return ("sink",)

    def node_label(self, idx: int) -> str:
        key = self.node_key(idx)
        if key[0] == "loc":
            return f"{self.economy.locations[key[1]]}@{key[2]}"
        if key[0] == "driver":
            return f"D{key[1]}"
        return "S"

    def node_index(self, key: NodeKey) -> int:
        if key[0] == "loc":
            return self.loc_node(key[1], key[2])
        if key[0] == "driver":
            return self.driver_node(key[1])
        return self.sink


def build_network(econ: Economy) -> FlowNetwork:
    """Construct the time-expanded network for one economy.

    Edge order is the determinism contract: sorted by (class, tail, head,
    rider id). Unlimited capacities are represented as one more than the
    driver count, which keeps every such edge present in the residual graph.
    """
    horizon = econ.horizon
    n_loc_nodes = econ.n_locations * (horizon + 1)
    sink = n_loc_nodes + econ.n_drivers
    n_nodes = sink + 1
    big = econ.n_drivers + 1

    def loc_node(a: int, t: int) -> int:
        return a * (horizon + 1) + t

    rows: list[tuple[int, int, int, int, Money, int]] = []  # cls, tail, head, rider, cost, cap
    for j, r in enumerate(econ.riders):
        tail = loc_node(r.origin, r.start)
        head = loc_node(r.dest, r.start + econ.d(r.origin, r.dest))
        rows.append((RIDER, tail, head, j, econ.cost(r.origin, r.dest, r.start) - r.value, 1))
    for a, b, t in econ.feasible_trips():
        rows.append(
            (RELOCATION, loc_node(a, t), loc_node(b, t + econ.d(a, b)), -1, econ.cost(a, b, t), big)
        )
    for a in range(econ.n_locations):
        for t in range(horizon + 1):
            rows.append((EXIT, loc_node(a, t), sink, -1, econ.exit_cost[horizon - t], big))
    for i, drv in enumerate(econ.drivers):
        rows.append((ENTRY, n_loc_nodes + i, loc_node(drv.location, drv.time), -1, 0, big))
        if not drv.entered:
            rows.append((ENTRY, n_loc_nodes + i, sink, -1, 0, big))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))

    net = FlowNetwork(
        economy=econ,
        n_nodes=n_nodes,
        sink=sink,
        tails=[r[1] for r in rows],
        heads=[r[2] for r in rows],
        caps=[r[5] for r in rows],
        costs=[r[4] for r in rows],
        classes=[r[0] for r in rows],
        riders=[r[3] for r in rows],
        out_edges=[[] for _ in range(n_nodes)],
        in_edges=[[] for _ in range(n_nodes)],
    )
    for e in range(net.n_edges):
        net.out_edges[net.tails[e]].append(e)
        net.in_edges[net.heads[e]].append(e)
    return net


@dataclass
class OptimalFlow:
    flow: list[int]
    cost: Money

    @property
    def welfare(self) -> Money:
        return -self.cost


def _initial_potentials(net: FlowNetwork, supplies: Sequence[int]) -> list[Money | None]:
    """One label-correcting pass over the empty network from the supply nodes."""
    dist: list[Money | None] = [_UNREACHED] * net.n_nodes
    in_queue = [False] * net.n_nodes
    queue: list[int] = []
    for s in supplies:
        if dist[s] is None:
            dist[s] = 0
            in_queue[s] = True
            queue.append(s)
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        in_queue[u] = False
        du = dist[u]
        assert du is not None
        for e in net.out_edges[u]:
            v = net.heads[e]
            nd = du + net.costs[e]
            if dist[v] is None or nd < dist[v]:
                dist[v] = nd
                if not in_queue[v]:
                    in_queue[v] = True
                    queue.append(v)
    return dist


def _solve_units(
    net: FlowNetwork, supplies: Sequence[int], demands: dict[int, int]
) -> OptimalFlow:
    """Route one unit per supply to the nearest remaining demand, repeatedly."""
    flow = [0] * net.n_edges
    demand_left = dict(demands)
    pot = _initial_potentials(net, supplies)
    total_cost: Money = 0
    inf = float("inf")

    for src in supplies:
        if pot[src] is None:
            raise FlowInfeasibleError("a supply node cannot reach the network")
        dist: list[float | Money] = [inf] * net.n_nodes
        parent: list[tuple[int, bool] | None] = [None] * net.n_nodes
        settled = [False] * net.n_nodes
        dist[src] = 0
        heap: list[tuple[Money, int]] = [(0, src)]
        target = -1
        while heap:
            d, u = heapq.heappop(heap)
            if settled[u]:
                continue
            settled[u] = True
            if demand_left.get(u, 0) > 0:
                target = u
                break
            pu = pot[u]
            assert pu is not None
            for e in net.out_edges[u]:
                if flow[e] >= net.caps[e]:
                    continue
                v = net.heads[e]
                if settled[v] or pot[v] is None:
                    continue
                nd = d + net.costs[e] + pu - pot[v]
                if nd < dist[v]:
                    dist[v] = nd
                    parent[v] = (e, True)
                    heapq.heappush(heap, (nd, v))
            for e in net.in_edges[u]:
                if flow[e] <= 0:
                    continue
                v = net.tails[e]
                if settled[v] or pot[v] is None:
                    continue
                nd = d - net.costs[e] + pu - pot[v]
                if nd < dist[v]:
                    dist[v] = nd
                    parent[v] = (e, False)
                    heapq.heappush(heap, (nd, v))
        if target < 0:
            raise FlowInfeasibleError("no remaining demand is reachable from a supply")
        d_target = dist[target]
        for v in range(net.n_nodes):
            if pot[v] is None:
                continue
            dv = dist[v] if settled[v] else d_target
            pot[v] = pot[v] + dv  # type: ignore[operator]
        demand_left[target] -= 1
        v = target
        while v != src:
            step = parent[v]
            assert step is not None
            e, forward = step
            if forward:
                flow[e] += 1
                total_cost += net.costs[e]
                v = net.tails[e]
            else:
                flow[e] -= 1
                total_cost -= net.costs[e]
                v = net.heads[e]
    return OptimalFlow(flow=flow, cost=total_cost)


def solve_min_cost_flow(net: FlowNetwork) -> OptimalFlow:
    """Optimal integral flow with one unit per driver, all absorbed at the sink."""
    supplies = [net.driver_node(i) for i in range(net.economy.n_drivers)]
    return _solve_units(net, supplies, {net.sink: len(supplies)})


def _boundary(
    net: FlowNetwork, boundary_delta: Mapping[NodeKey, int]
) -> tuple[list[int], dict[int, int]]:
    econ = net.economy
    base: dict[int, int] = {net.driver_node(i): 1 for i in range(econ.n_drivers)}
    for key, delta in boundary_delta.items():
        idx = net.node_index(key)
        base[idx] = base.get(idx, 0) + delta
        if key[0] == "driver" and base[idx] < 0:
            raise FlowInfeasibleError(f"negative source count at driver {key[1]}")
    supplies: list[int] = []
    demands: dict[int, int] = {}
    for idx in sorted(base):
        units = base[idx]
        if units > 0:
            supplies.extend([idx] * units)
        elif units < 0:
            demands[idx] = -units
    sink_units = len(supplies) - sum(demands.values())
    if sink_units < 0:
        raise FlowInfeasibleError("more demand than driver supply")
    demands[net.sink] = demands.get(net.sink, 0) + sink_units
    return supplies, demands


def omega(econ: Economy, boundary_delta: Mapping[NodeKey, int] | None = None) -> Money:
    """Maximum welfare under a perturbed flow boundary.

    ``boundary_delta`` adds or removes unit sources at (location, time) nodes
    (keys ``("loc", a, t)``) or at driver nodes (keys ``("driver", i)``).
    """
    net = build_network(econ)
    supplies, demands = _boundary(net, boundary_delta or {})
    return _solve_units(net, supplies, demands).welfare


def omega_forced_rider(econ: Economy, rider_id: int) -> Money:
    """Maximum welfare when one specific rider must be served."""
    net = build_network(econ)
    rider_edge = next(
        e for e in range(net.n_edges) if net.classes[e] == RIDER and net.riders[e] == rider_id
    )
    forced_cost = net.costs[rider_edge]
    net.caps[rider_edge] = 0
    r = econ.riders[rider_id]
    origin = ("loc", r.origin, r.start)
    dest = ("loc", r.dest, r.start + econ.d(r.origin, r.dest))
    supplies, demands = _boundary(net, {origin: -1, dest: +1})
    solved = _solve_units(net, supplies, demands)
    return -(solved.cost + forced_cost)


# ---------------------------------------------------------------------------
# Flow decomposition


@dataclass
class Dispatch:
    picked: tuple[bool, ...]
    paths: tuple[ActionPath, ...]


def decompose_flow(net: FlowNetwork, flow: OptimalFlow, econ: Economy) -> Dispatch:
    """Split an integral flow into one action path per driver.

    Walks follow the deterministic edge order, so rider edges are consumed
    before parallel relocations and the result is reproducible.
    """
    remaining = list(flow.flow)
    picked = [False] * econ.n_riders
    paths: list[ActionPath] = []
    for i, drv in enumerate(econ.drivers):
        node = net.driver_node(i)
        first = next((e for e in net.out_edges[node] if remaining[e] > 0), None)
        if first is None:
            raise FlowInvariantError(f"driver {i} sources no flow")
        remaining[first] -= 1
        if net.heads[first] == net.sink:
            paths.append(ActionPath(None, ()))
            continue
        steps: list[PathStep] = []
        node = net.heads[first]
        while node != net.sink:
            e = next((e for e in net.out_edges[node] if remaining[e] > 0), None)
            if e is None:
                raise FlowInvariantError("flow conservation broke during decomposition")
            remaining[e] -= 1
            key = net.node_key(node)
            assert key[0] == "loc"
            a, t = key[1], key[2]
            if net.classes[e] == RIDER:
                j = net.riders[e]
                picked[j] = True
                steps.append(PathStep((a, econ.riders[j].dest, t), j))
            elif net.classes[e] == RELOCATION:
                head_key = net.node_key(net.heads[e])
                steps.append(PathStep((a, head_key[1], t), None))
            node = net.heads[e]
        paths.append(ActionPath((drv.location, drv.time), tuple(steps)))
    if any(remaining):
        raise FlowInvariantError("decomposition left flow behind")
    return Dispatch(tuple(picked), tuple(paths))


# ---------------------------------------------------------------------------
# Extreme dual potentials


@dataclass
class Potentials:
    """Node-indexed money values forming an optimal dual of the flow problem."""

    kind: str  # "gain" (extra-driver welfare gain) or "loss" (removed-driver loss)
    values: dict[NodeKey, Money]

    def at(self, a: int, t: int) -> Money:
        return self.values[("loc", a, t)]

    def at_driver(self, i: int) -> Money:
        return self.values[("driver", i)]


def _residual_shortest_from_sink(
    net: FlowNetwork, flow: OptimalFlow, reverse: bool
) -> list[Money | None]:
    """Label-correcting distances from the sink over the residual graph.

    With ``reverse`` the arcs are flipped, which turns the result into
    distances *to* the sink. Raises if a negative cycle is detected, since
    that contradicts optimality of the flow.
    """
    dist: list[Money | None] = [_UNREACHED] * net.n_nodes
    hops = [0] * net.n_nodes  # edges on the current estimate; >= n implies a cycle
    dist[net.sink] = 0
    in_queue = [False] * net.n_nodes
    queue = [net.sink]
    in_queue[net.sink] = True
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        in_queue[u] = False
        du = dist[u]
        assert du is not None
        arcs: list[tuple[int, Money]] = []
        if reverse:
            # Arcs into u, traversed backwards.
            for e in net.in_edges[u]:
                if flow.flow[e] < net.caps[e]:
                    arcs.append((net.tails[e], net.costs[e]))
            for e in net.out_edges[u]:
                if flow.flow[e] > 0:
                    arcs.append((net.heads[e], -net.costs[e]))
        else:
            for e in net.out_edges[u]:
                if flow.flow[e] < net.caps[e]:
                    arcs.append((net.heads[e], net.costs[e]))
            for e in net.in_edges[u]:
                if flow.flow[e] > 0:
                    arcs.append((net.tails[e], -net.costs[e]))
        for v, w in arcs:
            nd = du + w
            if dist[v] is None or nd < dist[v]:
                dist[v] = nd
                hops[v] = hops[u] + 1
                if hops[v] >= net.n_nodes:
                    raise FlowInvariantError("negative cycle in the residual graph")
                if not in_queue[v]:
                    in_queue[v] = True
                    queue.append(v)
    return dist


def potentials_pessimal(net: FlowNetwork, flow: OptimalFlow) -> Potentials:
    """Welfare gain of one extra entered driver at each node (driver-pessimal dual)."""
    dist = _residual_shortest_from_sink(net, flow, reverse=True)
    values: dict[NodeKey, Money] = {}
    for idx in range(net.n_nodes):
        d = dist[idx]
        if d is None:
            raise FlowInvariantError("a node cannot reach the sink; exit edges missing?")
        values[net.node_key(idx)] = -d
    return Potentials("gain", values)


def potentials_optimal(net: FlowNetwork, flow: OptimalFlow) -> Potentials:
    """Welfare loss from removing one driver at each node (driver-optimal dual).

    Nodes no driver can reach are not pinned by the dual optimum; they get
    the smallest feasible value by backward induction over their out-edges,
    which keeps every dual constraint satisfied.
    """
    dist = _residual_shortest_from_sink(net, flow, reverse=False)
    econ = net.economy
    values: dict[NodeKey, Money] = {}
    for idx in range(net.n_nodes):
        d = dist[idx]
        if d is not None:
            values[net.node_key(idx)] = d
    for t in range(econ.horizon, -1, -1):
        for a in range(econ.n_locations):
            key = ("loc", a, t)
            if key in values:
                continue
            idx = net.loc_node(a, t)
            best: Money | None = None
            for e in net.out_edges[idx]:
                head_key = net.node_key(net.heads[e])
                cand = values[head_key] - net.costs[e]
                if best is None or cand > best:
                    best = cand
            assert best is not None  # every node has an exit edge
            values[key] = best
    for i in range(econ.n_drivers):
        key = ("driver", i)
        if key not in values:
            raise FlowInvariantError("driver node unreachable from the sink")
    return Potentials("loss", values)


# ---------------------------------------------------------------------------
# Optimality certificates


def check_dual_feasibility(net: FlowNetwork, pots: Potentials) -> list[str]:
    """Difference constraints every optimal dual must satisfy (rider edges aside)."""
    bad: list[str] = []
    phi = pots.values
    for e in range(net.n_edges):
        if net.classes[e] == RIDER:
            continue
        lhs = phi[net.node_key(net.tails[e])] - phi[net.node_key(net.heads[e])]
        if lhs < -net.costs[e]:
            bad.append(
                f"edge {net.node_label(net.tails[e])}->{net.node_label(net.heads[e])}"
                f" violates potential difference: {lhs} < {-net.costs[e]}"
            )
    return bad


def check_complementary_slackness(
    net: FlowNetwork, flow: OptimalFlow, pots: Potentials
) -> list[str]:
    """The six slackness conditions pairing an integral optimum with a dual."""
    econ = net.economy
    bad: list[str] = []
    phi = pots.values

    def price(r) -> Money:
        o = phi[("loc", r.origin, r.start)]
        d = phi[("loc", r.dest, r.start + econ.d(r.origin, r.dest))]
        return o - d + econ.cost(r.origin, r.dest, r.start)

    for e in range(net.n_edges):
        f = flow.flow[e]
        cls = net.classes[e]
        if cls == RIDER:
            j = net.riders[e]
            r = econ.riders[j]
            mu = max(r.value - price(r), 0)
            if f > 0 and mu != r.value - price(r):
                bad.append(f"CS-1: served rider {j} pays more than her value")
            if mu > 0 and f != 1:
                bad.append(f"CS-2: rider {j} has surplus {mu} but is not served")
        else:
            diff = phi[net.node_key(net.tails[e])] - phi[net.node_key(net.heads[e])]
            if f > 0 and diff != -net.costs[e]:
                label = {RELOCATION: "CS-3", EXIT: "CS-4", ENTRY: "CS-5/6"}[cls]
                bad.append(
                    f"{label}: used edge {net.node_label(net.tails[e])}->"
                    f"{net.node_label(net.heads[e])} not tight: {diff} != {-net.costs[e]}"
                )
    return bad


def dump_network(net: FlowNetwork, flow: OptimalFlow | None = None) -> str:
    """Edge-list debug dump: class, tail, head, upper, cost, flow per line."""
    lines = []
    for e in range(net.n_edges):
        f = "-" if flow is None else str(flow.flow[e])
        lines.append(
            f"{net.classes[e]} {net.node_label(net.tails[e])} {net.node_label(net.heads[e])}"
            f" {net.caps[e]} {net.costs[e]} {f}"
        )
    return "\n".join(lines) + "\n"
