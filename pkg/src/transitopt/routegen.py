"""Route pool construction: carried-over originals, hub connectors between
the busiest stops, and long traversal routes across the city."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

from .graphs import (
    GraphError,
    Route,
    RouteKind,
    RoadGraph,
    StopId,
    make_route,
    reconstruct_path,
    shortest_time_path,
)
from .preprocess import DemandMatrix, ZoneGrid


@dataclass(frozen=True)
class RouteLengthBounds:
    min_m: float
    max_m: float

    def admits(self, length_m: float) -> bool:
        return self.min_m <= length_m <= self.max_m


@dataclass
class GenStats:
    """Counts of candidates dropped during generation, for reporting."""

    no_path: int = 0
    out_of_bounds: int = 0
    short_of_target: int = 0
    duplicates: int = 0


@dataclass
class RoutePool:
    """Indexed universe of candidate routes plus per-stop busyness scores."""

    routes: dict[int, Route]
    busyness: dict[StopId, float] = field(default_factory=dict)

    def fixed_ids(self) -> list[int]:
        return sorted(rid for rid, r in self.routes.items() if r.is_fixed)

    def mutable_ids(self) -> list[int]:
        return sorted(rid for rid, r in self.routes.items() if not r.is_fixed)

    def route(self, rid: int) -> Route:
        return self.routes[rid]

    def fixed_length_m(self) -> float:
        return sum(self.routes[rid].length_m for rid in self.fixed_ids())

    def validate(self, bounds: RouteLengthBounds) -> None:
        """Length constraints hold for every selectable route; fixed tram
        routes are exempt (they are in every network regardless)."""
        for rid in self.mutable_ids():
            r = self.routes[rid]
            if not bounds.admits(r.length_m):
                raise GraphError(
                    f"pool route {rid} length {r.length_m:.1f} m violates "
                    f"[{bounds.min_m}, {bounds.max_m}]"
                )


def build_pool(
    routes: Iterable[Route],
    bounds: RouteLengthBounds,
    busyness: Optional[dict[StopId, float]] = None,
) -> RoutePool:
    index: dict[int, Route] = {}
    for r in routes:
        if r.route_id in index:
            raise GraphError(f"duplicate route id {r.route_id} in pool")
        index[r.route_id] = r
    pool = RoutePool(routes=index, busyness=dict(busyness or {}))
    pool.validate(bounds)
    return pool


def stop_busyness(road: RoadGraph, demand: DemandMatrix, grid: ZoneGrid) -> dict[StopId, float]:
    """Total demand originating or terminating in each stop's zone."""
    zone_load: dict[int, float] = {}
    for s, t, q in demand.pairs():
        zone_load[s] = zone_load.get(s, 0.0) + q
        zone_load[t] = zone_load.get(t, 0.0) + q
    return {
        stop: zone_load.get(grid.zone_of(*road.position(stop)), 0.0)
        for stop in road.stop_ids
    }


def _stops_along_path(road: RoadGraph, src: StopId, dst: StopId) -> Optional[list[StopId]]:
    costs, parent = shortest_time_path(road, src, dst)
    if dst not in costs:
        return None
    path = reconstruct_path(parent, src, dst)
    return [n for n in path if road.nodes[n].is_stop]


def gen_hub_connectors(
    road: RoadGraph,
    demand: DemandMatrix,
    grid: ZoneGrid,
    top_k: int,
    max_pairs: int,
    bounds: RouteLengthBounds,
    start_id: int = 0,
) -> tuple[list[Route], GenStats]:
    """One shortest-path route per pair of top-k busiest stops, busier stop
    first; pairs ranked by combined busyness and truncated to ``max_pairs``."""
    if top_k < 2:
        raise ValueError("top_k must be >= 2")
    busy = stop_busyness(road, demand, grid)
    ranked = sorted(road.stop_ids, key=lambda s: (-busy.get(s, 0.0), s))[:top_k]
    pairs = sorted(
        combinations(ranked, 2),
        key=lambda p: (-(busy.get(p[0], 0.0) + busy.get(p[1], 0.0)), p),
    )[:max_pairs]

    stats = GenStats()
    routes: list[Route] = []
    seen: set[tuple[StopId, ...]] = set()
    rid = start_id
    for a, b in pairs:
        if (busy.get(b, 0.0), -b) > (busy.get(a, 0.0), -a):
            a, b = b, a
        stops = _stops_along_path(road, a, b)
        if stops is None:
            stats.no_path += 1
            continue
        if len(stops) < 2 or tuple(stops) in seen:
            stats.duplicates += 1
            continue
        route = make_route(rid, RouteKind.HUB_CONNECTOR, stops, road)
        if not bounds.admits(route.length_m):
            stats.out_of_bounds += 1
            continue
        seen.add(tuple(stops))
        routes.append(route)
        rid += 1
    return routes, stats


def _third_split(values: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    return lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0


def gen_traversal(
    road: RoadGraph,
    n: int,
    min_len_m: float,
    rng_seed: int,
    bounds: RouteLengthBounds,
    start_id: int = 0,
) -> tuple[list[Route], GenStats]:
    """Routes joining stops from opposite boundary thirds of the bounding box
    through shortest paths; endpoints drawn seeded, axes alternating."""
    if n < 0:
        raise ValueError("n must be >= 0")
    stats = GenStats()
    if n == 0:
        return [], stats
    stops = road.stop_ids
    if len(stops) < 2:
        stats.short_of_target = n
        return [], stats
    lats = [road.position(s)[0] for s in stops]
    lons = [road.position(s)[1] for s in stops]
    lat_lo, lat_hi = _third_split(lats)
    lon_lo, lon_hi = _third_split(lons)
    sides = {
        "south": [s for s in stops if road.position(s)[0] <= lat_lo],
        "north": [s for s in stops if road.position(s)[0] >= lat_hi],
        "west": [s for s in stops if road.position(s)[1] <= lon_lo],
        "east": [s for s in stops if road.position(s)[1] >= lon_hi],
    }
    axes = [ax for ax in (("west", "east"), ("south", "north")) if sides[ax[0]] and sides[ax[1]]]
    if not axes:
        stats.short_of_target = n
        return [], stats

    rng = random.Random(rng_seed)
    routes: list[Route] = []
    seen: set[tuple[StopId, ...]] = set()
    rid = start_id
    attempts = 0
    max_attempts = 60 * n
    while len(routes) < n and attempts < max_attempts:
        attempts += 1
        side_a, side_b = axes[attempts % len(axes)]
        a = rng.choice(sides[side_a])
        b = rng.choice(sides[side_b])
        if rng.random() < 0.5:
            a, b = b, a
        if a == b:
            continue
        stops_seq = _stops_along_path(road, a, b)
        if stops_seq is None:
            stats.no_path += 1
            continue
        if len(stops_seq) < 2 or tuple(stops_seq) in seen:
            stats.duplicates += 1
            continue
        route = make_route(rid, RouteKind.TRAVERSAL, stops_seq, road)
        if route.length_m < min_len_m or not bounds.admits(route.length_m):
            stats.out_of_bounds += 1
            continue
        seen.add(tuple(stops_seq))
        routes.append(route)
        rid += 1
    stats.short_of_target = n - len(routes)
    return routes, stats


def gen_baseline(
    road: RoadGraph,
    demand: DemandMatrix,
    grid: ZoneGrid,
    n_routes: int,
    rng_seed: int,
    bounds: RouteLengthBounds,
    start_id: int = 0,
) -> tuple[list[Route], GenStats]:
    """Stand-in "existing" network for synthetic cities: shortest-path routes
    between stop pairs sampled with busyness bias. Real datasets carry their
    own original routes instead."""
    stats = GenStats()
    busy = stop_busyness(road, demand, grid)
    stops = road.stop_ids
    weights = [busy.get(s, 0.0) + 1.0 for s in stops]
    rng = random.Random(rng_seed)
    routes: list[Route] = []
    seen: set[tuple[StopId, ...]] = set()
    rid = start_id
    attempts = 0
    while len(routes) < n_routes and attempts < 80 * max(n_routes, 1):
        attempts += 1
        a, b = rng.choices(stops, weights=weights, k=2)
        if a == b:
            continue
        seq = _stops_along_path(road, a, b)
        if seq is None:
            stats.no_path += 1
            continue
        if len(seq) < 2 or tuple(seq) in seen:
            stats.duplicates += 1
            continue
        route = make_route(rid, RouteKind.ORIGINAL, seq, road)
        if not bounds.admits(route.length_m):
            stats.out_of_bounds += 1
            continue
        seen.add(tuple(seq))
        routes.append(route)
        rid += 1
    stats.short_of_target = n_routes - len(routes)
    return routes, stats
