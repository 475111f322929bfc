"""Baseline-vs-optimized comparison: objective deltas, per-OD travel-time and
transfer difference histograms, and GeoJSON route overlays."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .evaluation import EvalContext, ObjectiveVector, TripSummary
from .graphs import BusNetwork, RoadGraph, Route, reconstruct_path, shortest_time_path

TIME_SUPPRESS_MIN = 2.5  # |travel-time delta| at or below this many minutes is noise


def _time_bin(dt_min: float) -> int:
    """Integer-minute bin for a (non-suppressed) travel-time delta."""
    mag = int(math.floor(abs(dt_min) + 0.5))
    return mag if dt_min > 0 else -mag


@dataclass(frozen=True)
class HistogramBar:
    bin: int
    pairs: int
    passengers: float


def travel_time_histogram(
    base: dict, opt: dict, demand_pairs: Sequence[tuple[int, int, float]]
) -> list[HistogramBar]:
    """Per-OD optimized-minus-baseline travel time deltas, in minutes, over
    pairs covered by both networks; deltas within the suppression window are
    dropped (they would dwarf the informative bars)."""
    bars: dict[int, list[float]] = {}
    for s, t, q in demand_pairs:
        rb: Optional[TripSummary] = base.get((s, t))
        ro: Optional[TripSummary] = opt.get((s, t))
        if rb is None or ro is None:
            continue
        dt_min = (ro.total_time_s - rb.total_time_s) / 60.0
        if abs(dt_min) <= TIME_SUPPRESS_MIN:
            continue
        b = _time_bin(dt_min)
        bars.setdefault(b, [0, 0.0])
        bars[b][0] += 1
        bars[b][1] += q
    return [HistogramBar(b, int(v[0]), float(v[1])) for b, v in sorted(bars.items())]


def transfer_histogram(
    base: dict, opt: dict, demand_pairs: Sequence[tuple[int, int, float]]
) -> list[HistogramBar]:
    """Per-OD transfer-count deltas over pairs covered by both networks; the
    central (zero) bar is omitted."""
    bars: dict[int, list[float]] = {}
    for s, t, q in demand_pairs:
        rb, ro = base.get((s, t)), opt.get((s, t))
        if rb is None or ro is None:
            continue
        d = ro.transfers - rb.transfers
        if d == 0:
            continue
        bars.setdefault(d, [0, 0.0])
        bars[d][0] += 1
        bars[d][1] += q
    return [HistogramBar(b, int(v[0]), float(v[1])) for b, v in sorted(bars.items())]


def objective_deltas_pct(base: ObjectiveVector, opt: ObjectiveVector) -> dict[str, float]:
    out: dict[str, float] = {}
    for name, b, o in zip(
        ("total_length_m", "unsatisfied_demand", "in_vehicle_time_s", "transfers_per_passenger"),
        base.as_tuple(),
        opt.as_tuple(),
    ):
        out[name] = ((o - b) / b * 100.0) if b != 0 else (0.0 if o == 0 else math.inf)
    return out


def compare_networks(
    original: BusNetwork, optimized: BusNetwork, ctx: EvalContext
) -> dict:
    """Full comparison bundle (JSON-ready) between two evaluable networks."""
    base_obj = ctx.objectives(original)
    opt_obj = ctx.objectives(optimized)
    base_od = ctx.od_results(original)
    opt_od = ctx.od_results(optimized)
    pairs = ctx.od_pairs()

    both = [(s, t, q) for s, t, q in pairs if base_od.get((s, t)) and opt_od.get((s, t))]
    lost = [(s, t, q) for s, t, q in pairs if base_od.get((s, t)) and not opt_od.get((s, t))]
    gained = [(s, t, q) for s, t, q in pairs if opt_od.get((s, t)) and not base_od.get((s, t))]

    return {
        "baseline": {
            "objectives": base_obj.as_dict(),
            "route_count": len(original),
        },
        "optimized": {
            "objectives": opt_obj.as_dict(),
            "route_count": len(optimized),
        },
        "objective_deltas_pct": objective_deltas_pct(base_obj, opt_obj),
        "travel_time_histogram_min": [
            {"bin_min": b.bin, "pairs": b.pairs, "passengers": b.passengers}
            for b in travel_time_histogram(base_od, opt_od, pairs)
        ],
        "transfer_histogram": [
            {"delta": b.bin, "pairs": b.pairs, "passengers": b.passengers}
            for b in transfer_histogram(base_od, opt_od, pairs)
        ],
        "coverage": {
            "pairs_compared": len(both),
            "pairs_lost": len(lost),
            "pairs_gained": len(gained),
            "demand_lost": sum(q for _, _, q in lost),
            "demand_gained": sum(q for _, _, q in gained),
        },
    }


# -- GeoJSON ------------------------------------------------------------------


def route_coordinates(route: Route, road: RoadGraph) -> list[list[float]]:
    """Route geometry along the road shortest-time paths, [lon, lat] pairs."""
    coords: list[list[float]] = []
    for u, v in route.legs:
        _, parent = shortest_time_path(road, u, v)
        if v not in parent:
            continue
        path = reconstruct_path(parent, u, v)
        start = 0 if not coords else 1
        for node in path[start:]:
            lat, lon = road.position(node)
            coords.append([lon, lat])
    return coords


def routes_geojson(routes: Sequence[Route], road: RoadGraph, label: str) -> dict:
    features = []
    for route in sorted(routes, key=lambda r: r.route_id):
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": route_coordinates(route, road),
                },
                "properties": {
                    "route_id": route.route_id,
                    "kind": route.kind.value,
                    "network": label,
                    "n_stops": len(route.stops),
                    "length_m": route.length_m,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def network_geojson(bus: BusNetwork, ctx: EvalContext, label: str) -> dict:
    routes = [ctx.pool.routes[rid] for rid in bus.sorted_ids()]
    routes += [ctx.pool.routes[rid] for rid in ctx.pool.fixed_ids()]
    return routes_geojson(routes, ctx.road, label)
