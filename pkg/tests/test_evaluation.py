import math
import random

import pytest

from transitopt.evaluation import (
    EvalConfig,
    EvalContext,
    ObjectiveVector,
    Trip,
    Uncovered,
    evaluate,
    plan_trip,
)
from transitopt.graphs import (
    BusNetwork,
    MetroNetwork,
    WalkEdge,
    WalkNetwork,
    assemble_complete,
    haversine_m,
    make_route,
    RouteKind,
)
from transitopt.preprocess import DemandMatrix, build_grid
from transitopt.routegen import RouteLengthBounds, build_pool

from conftest import build_fixture_city, directed_road

BOUNDS = RouteLengthBounds(10.0, 1e7)


# -- independent oracle: exhaustive simple-path enumeration -------------------


def oracle_stage_labels(carriers):
    stages = []
    for c in carriers:
        if c == "walk":
            stages.append(c)
        elif not stages or stages[-1] != c:
            stages.append(c)
    return stages


def oracle_cost(carriers, times, access_t, egress_t, penalty):
    stages = oracle_stage_labels(carriers)
    gen = access_t + egress_t + sum(times) + penalty * max(0, len(stages) - 1)
    vehicle = [s for s in stages if s != "walk"]
    transfers = max(0, len(vehicle) - 1)
    t_inv = sum(t for c, t in zip(carriers, times) if c != "walk")
    t_wal = access_t + egress_t + sum(t for c, t in zip(carriers, times) if c == "walk")
    return gen, transfers, t_inv, t_wal


def oracle_plan(net, grid, s, t, penalty, cap, walk_speed_kmh=5.0):
    """Brute-force minimum generalized cost over all simple paths, or None."""
    speed = walk_speed_kmh * 1000.0 / 3600.0
    access, egress = [], {}
    for node, (lat, lon) in net.positions.items():
        z = grid.zone_of(lat, lon)
        clat, clon = grid.centroid(z)
        walk_t = haversine_m(lat, lon, clat, clon) / speed
        if z == s:
            access.append((node, walk_t))
        if z == t:
            egress[node] = walk_t

    adj = {}
    for e in net.edges:
        adj.setdefault(e.u, []).append(e)
    best = [math.inf, None]

    def dfs(node, visited, carriers, times, access_t, time_sum):
        if node in egress:
            gen, transfers, t_inv, t_wal = oracle_cost(
                carriers, times, access_t, egress[node], penalty
            )
            if transfers <= cap and gen < best[0] - 1e-12:
                best[0] = gen
                best[1] = (gen, transfers, t_inv, t_wal)
        if access_t + time_sum >= best[0]:
            return
        for e in adj.get(node, []):
            if e.v in visited:
                continue
            # walk stages never chain: two walk edges in a row are two stages
            dfs(
                e.v,
                visited | {e.v},
                carriers + [("walk" if e.carrier == "walk" else e.carrier)],
                times + [e.time_s],
                access_t,
                time_sum + e.time_s,
            )

    for a_node, a_t in access:
        dfs(a_node, {a_node}, [], [], a_t, 0.0)
    return best[1]


# -- micro fixtures -----------------------------------------------------------


def direct_city(q=5.0, leg_time=600.0):
    """Two stops in two zones joined by a single bus route."""
    coords = {0: (38.70, -9.20), 1: (38.70, -9.13)}
    road = directed_road(coords, edges=[(0, 1, 3000.0, leg_time), (1, 0, 3000.0, leg_time)])
    grid = build_grid(road, 1, 2)
    r = make_route(0, RouteKind.ORIGINAL, [0, 1], road)
    pool = build_pool([r], BOUNDS)
    demand = DemandMatrix([(0, 1, q)])
    ctx = EvalContext(road, pool, MetroNetwork.empty(), WalkNetwork.empty(), grid, demand)
    return ctx


def two_path_city(penalty, demand_entries=((0, 2, 10.0),)):
    """Zone 0 -> zone 2: a one-stage 900 s route versus two 350 s routes with
    a same-stop transfer; one-way streets pin the road paths."""
    coords = {
        0: (38.70, -9.200),   # A, zone 0
        1: (38.70, -9.170),   # B, middle zone
        2: (38.70, -9.160),   # C, middle zone
        3: (38.70, -9.130),   # D, zone 2
    }
    road = directed_road(
        coords,
        edges=[
            (0, 1, 2250.0, 450.0),
            (1, 3, 2250.0, 450.0),
            (0, 2, 1750.0, 350.0),
            (2, 3, 1750.0, 350.0),
        ],
    )
    grid = build_grid(road, 1, 3)
    r1 = make_route(0, RouteKind.ORIGINAL, [0, 1, 3], road)   # 900 s single stage
    r2 = make_route(1, RouteKind.ORIGINAL, [0, 2], road)      # 350 s
    r3 = make_route(2, RouteKind.ORIGINAL, [2, 3], road)      # 350 s
    pool = build_pool([r1, r2, r3], BOUNDS)
    demand = DemandMatrix(list(demand_entries))
    cfg = EvalConfig(transfer_penalty_s=penalty, max_transfers=3)
    ctx = EvalContext(road, pool, MetroNetwork.empty(), WalkNetwork.empty(), grid, demand, cfg)
    return ctx


def walk_transfer_city():
    """A -r0-> B, 200 m walk, C -r1-> D; the only covered trip is
    (bus, walk, bus)."""
    coords = {
        0: (38.70, -9.200),
        1: (38.70, -9.1680),
        2: (38.70, -9.1657),
        3: (38.70, -9.130),
    }
    road = directed_road(
        coords,
        edges=[(0, 1, 2500.0, 500.0), (2, 3, 2500.0, 500.0)],
    )
    grid = build_grid(road, 1, 3)
    r0 = make_route(0, RouteKind.ORIGINAL, [0, 1], road)
    r1 = make_route(1, RouteKind.ORIGINAL, [2, 3], road)
    pool = build_pool([r0, r1], BOUNDS)
    walk_len = haversine_m(*coords[1], *coords[2])
    walk = WalkNetwork([WalkEdge(1, 2, walk_len), WalkEdge(2, 1, walk_len)])
    demand = DemandMatrix([(0, 2, 1.0)])
    ctx = EvalContext(road, pool, MetroNetwork.empty(), walk, grid, demand)
    return ctx


def ctx_net(ctx, ids):
    return assemble_complete(
        BusNetwork.of(ids), ctx.metro, ctx.walk, ctx.pool, road=ctx.road
    )


class TestPlanTrip:
    def test_direct_trip(self):
        ctx = direct_city()
        net = ctx_net(ctx, [0])
        trip = plan_trip(net, ctx.grid, 0, 1)
        assert isinstance(trip, Trip)
        assert [s.kind for s in trip.stages] == ["bus"]
        assert trip.t_inv_s == 600.0
        assert trip.transfers == 0
        assert trip.t_wal_s > 0  # centroid access/egress walking

    def test_penalty_300_prefers_single_stage(self):
        ctx = two_path_city(300.0)
        net = ctx_net(ctx, [0, 1, 2])
        trip = plan_trip(net, ctx.grid, 0, 2, penalty_s=300.0)
        assert trip.t_inv_s == 900.0
        assert len([s for s in trip.stages if s.kind == "bus"]) == 1
        assert trip.transfers == 0

    def test_penalty_100_prefers_two_stage(self):
        ctx = two_path_city(100.0)
        net = ctx_net(ctx, [0, 1, 2])
        trip = plan_trip(net, ctx.grid, 0, 2, penalty_s=100.0)
        assert trip.t_inv_s == 700.0
        assert trip.transfers == 1

    def test_reported_times_exclude_penalty(self):
        ctx = direct_city()
        net = ctx_net(ctx, [0])
        a = plan_trip(net, ctx.grid, 0, 1, penalty_s=0.0)
        b = plan_trip(net, ctx.grid, 0, 1, penalty_s=5000.0)
        assert a.t_inv_s == b.t_inv_s and a.t_wal_s == b.t_wal_s

    def test_uncovered_no_path(self):
        ctx = direct_city()
        net = ctx_net(ctx, [0])
        res = plan_trip(net, ctx.grid, 1, 0)  # no reverse route
        assert isinstance(res, Uncovered) and res.reason == "no_path"

    def test_uncovered_too_many_transfers(self):
        ctx = two_path_city(100.0)
        net = ctx_net(ctx, [1, 2])  # only the two-leg option remains
        res = plan_trip(net, ctx.grid, 0, 2, penalty_s=100.0, max_transfers=0)
        assert isinstance(res, Uncovered) and res.reason == "too_many_transfers"

    def test_same_zone_rejected(self):
        ctx = direct_city()
        net = ctx_net(ctx, [0])
        with pytest.raises(ValueError):
            plan_trip(net, ctx.grid, 1, 1)

    def test_walk_only_trip_counts_zero_transfers(self):
        coords = {0: (38.70, -9.2000), 1: (38.70, -9.1977)}
        road = directed_road(coords, edges=[(0, 1, 250.0, 50.0), (1, 0, 250.0, 50.0)])
        grid = build_grid(road, 1, 2)
        walk_len = haversine_m(*coords[0], *coords[1])
        assert walk_len <= 300.0
        walk = WalkNetwork([WalkEdge(0, 1, walk_len), WalkEdge(1, 0, walk_len)])
        r = make_route(0, RouteKind.ORIGINAL, [0, 1], road)
        pool = build_pool([r], BOUNDS)
        net = assemble_complete(BusNetwork.of([]), MetroNetwork.empty(), walk, pool, road=road)
        trip = plan_trip(net, grid, 0, 1)
        assert isinstance(trip, Trip)
        assert [s.kind for s in trip.stages] == ["walk"]
        assert trip.transfers == 0 and trip.t_inv_s == 0.0


class TestStages:
    def test_bus_walk_bus_decomposition(self):
        ctx = walk_transfer_city()
        net = ctx_net(ctx, [0, 1])
        trip = plan_trip(net, ctx.grid, 0, 2)
        assert [s.kind for s in trip.stages] == ["bus", "walk", "bus"]
        assert trip.transfers == 1
        walk_stage = trip.stages[1]
        assert len(walk_stage.triplets) == 1  # walk stages are single edges
        for stage in trip.stages:
            carriers = {c for _, _, c in stage.triplets}
            assert len(carriers) == 1
        for a, b in zip(trip.stages, trip.stages[1:]):
            assert a.triplets[0][2] != b.triplets[0][2]


class TestObjectives:
    def test_full_coverage_direct(self):
        ctx = direct_city(q=5.0)
        vec = evaluate(BusNetwork.of([0]), ctx)
        assert vec.unsatisfied_demand == 0.0
        assert vec.transfers_per_passenger == 0.0

    def test_ud_arithmetic(self):
        # (0,2) q=10 covered; (2,0) q=30 uncovered -> UD = 1 - 10/40
        ctx = two_path_city(300.0, demand_entries=((0, 2, 10.0), (2, 0, 30.0)))
        vec = evaluate(BusNetwork.of([0, 1, 2]), ctx)
        assert vec.unsatisfied_demand == pytest.approx(0.75)

    def test_ivt_single_pair(self):
        ctx = direct_city(q=5.0, leg_time=600.0)
        vec = evaluate(BusNetwork.of([0]), ctx)
        assert vec.in_vehicle_time_s == pytest.approx(3000.0)

    def test_ant_bus_walk_bus(self):
        ctx = walk_transfer_city()
        vec = evaluate(BusNetwork.of([0, 1]), ctx)
        assert vec.transfers_per_passenger == pytest.approx(1.0)

    def test_tl_sums_selected_and_fixed(self):
        ctx = two_path_city(300.0)
        vec = evaluate(BusNetwork.of([0, 1]), ctx)
        assert vec.total_length_m == pytest.approx(4500.0 + 1750.0)

    def test_uncovered_pairs_do_not_move_ivt_ant(self):
        base = two_path_city(300.0, demand_entries=((0, 2, 10.0),))
        more = two_path_city(300.0, demand_entries=((0, 2, 10.0), (2, 0, 30.0)))
        net = BusNetwork.of([0, 1, 2])
        a, b = evaluate(net, base), evaluate(net, more)
        assert a.in_vehicle_time_s == b.in_vehicle_time_s
        assert a.transfers_per_passenger == b.transfers_per_passenger

    def test_empty_network_degenerate(self):
        coords = {0: (38.70, -9.20), 1: (38.70, -9.13)}
        road = directed_road(coords, edges=[(0, 1, 3000.0, 600.0)])
        grid = build_grid(road, 1, 2)
        r = make_route(0, RouteKind.ORIGINAL, [0, 1], road)
        pool = build_pool([r], BOUNDS)
        ctx = EvalContext(
            road, pool, MetroNetwork.empty(), WalkNetwork.empty(), grid,
            DemandMatrix([(0, 1, 4.0)]),
        )
        vec = evaluate(BusNetwork.of([]), ctx)
        assert vec.unsatisfied_demand == 1.0
        assert vec.in_vehicle_time_s == 0.0
        assert vec.transfers_per_passenger == 0.0
        assert vec.total_length_m == 0.0

    def test_empty_network_tl_counts_fixed(self):
        # a tram unrelated to the demanded pair: TL is its length, UD stays 1
        coords = {0: (38.70, -9.20), 1: (38.70, -9.13), 2: (38.74, -9.20), 3: (38.74, -9.13)}
        road = directed_road(
            coords, edges=[(0, 1, 3000.0, 600.0), (2, 3, 2600.0, 500.0)]
        )
        grid = build_grid(road, 2, 2)
        tram = make_route(7, RouteKind.TRAM_FIXED, [2, 3], road)
        pool = build_pool([tram], BOUNDS)
        z0 = grid.zone_of(38.70, -9.20)
        z1 = grid.zone_of(38.70, -9.13)
        ctx = EvalContext(
            road, pool, MetroNetwork.empty(), WalkNetwork.empty(), grid,
            DemandMatrix([(z0, z1, 4.0)]),
        )
        vec = evaluate(BusNetwork.of([]), ctx)
        assert vec.total_length_m == 2600.0
        assert vec.unsatisfied_demand == 1.0

    def test_objective_validation(self):
        with pytest.raises(ValueError):
            ObjectiveVector(-1.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            ObjectiveVector(0.0, 1.5, 0.0, 0.0)
        with pytest.raises(ValueError):
            ObjectiveVector(math.nan, 0.0, 0.0, 0.0)


class TestCoverageMonotonicity:
    def test_adding_routes_never_increases_ud(self, small_city_ctx):
        ctx = small_city_ctx
        ids = ctx.pool.mutable_ids()
        rng = random.Random(31)
        for _ in range(12):
            k = rng.randint(1, max(1, len(ids) - 2))
            subset = rng.sample(ids, k)
            extra = rng.choice([r for r in ids if r not in subset])
            ud_small = evaluate(BusNetwork.of(subset), ctx).unsatisfied_demand
            ud_big = evaluate(BusNetwork.of(subset + [extra]), ctx).unsatisfied_demand
            assert ud_big <= ud_small + 1e-12


class TestOracleEquivalence:
    def test_fast_sweep_matches_plan_trip_and_oracle(self, small_city_ctx):
        ctx = small_city_ctx
        ids = ctx.pool.mutable_ids()
        net_ids = ids[:6]
        bus = BusNetwork.of(net_ids)
        net = ctx_net(ctx, net_ids)
        results = ctx.od_results(bus)
        cap = ctx.config.max_transfers
        pen = ctx.config.transfer_penalty_s
        checked = 0
        for (s, t, _q) in ctx.od_pairs():
            fast = results[(s, t)]
            planned = plan_trip(net, ctx.grid, s, t, pen, cap)
            expected = oracle_plan(net, ctx.grid, s, t, pen, cap)
            if expected is None:
                assert fast is None and isinstance(planned, Uncovered)
                continue
            gen, transfers, t_inv, t_wal = expected
            assert fast is not None, (s, t)
            assert fast.generalized_cost_s == pytest.approx(gen, rel=1e-9)
            assert fast.transfers == transfers
            assert fast.t_inv_s == pytest.approx(t_inv, rel=1e-9)
            assert isinstance(planned, Trip)
            assert planned.generalized_cost_s == pytest.approx(gen, rel=1e-9)
            assert planned.transfers == transfers
            checked += 1
        assert checked > 10

    def test_transfer_cap_enforced_consistently(self):
        ctx = two_path_city(100.0)
        bus = BusNetwork.of([1, 2])
        strict = EvalContext(
            ctx.road, ctx.pool, ctx.metro, ctx.walk, ctx.grid, ctx.demand,
            EvalConfig(transfer_penalty_s=100.0, max_transfers=0),
        )
        res = strict.od_results(bus)[(0, 2)]
        net = ctx_net(ctx, [1, 2])
        assert res is None
        assert oracle_plan(net, ctx.grid, 0, 2, 100.0, 0) is None
