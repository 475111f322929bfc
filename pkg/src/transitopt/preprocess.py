"""Stop clustering, zone grid, demand matrix, and synthetic city generation."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .graphs import (
    GraphError,
    MetroEdge,
    MetroNetwork,
    Node,
    RoadEdge,
    RoadGraph,
    StopId,
    ZoneId,
    haversine_m,
    kmh_to_ms,
)

DEFAULT_CLUSTER_THRESHOLD_M = 100.0
DEFAULT_GRID_ROWS = 30
DEFAULT_GRID_COLS = 30

SYNTH_ROAD_SPEED_KMH = 20.0
_SYNTH_MAX_ATTEMPTS = 8


@dataclass
class ClusterMap:
    """Raw stop -> cluster representative, plus the merge events that produced it."""

    assignment: dict[StopId, StopId]
    representatives: dict[StopId, tuple[float, float]]
    merges: list[tuple[StopId, StopId]] = field(default_factory=list)

    def cluster_of(self, stop: StopId) -> StopId:
        return self.assignment.get(stop, stop)

    @property
    def is_identity(self) -> bool:
        return all(raw == rep for raw, rep in self.assignment.items())


def cluster_stops(
    road: RoadGraph, threshold_m: float = DEFAULT_CLUSTER_THRESHOLD_M
) -> tuple[RoadGraph, ClusterMap]:
    """Merge stop u into stop v whenever road edge (u, v) is shorter than
    ``threshold_m`` and v has in-degree 1, transitively.

    The downstream stop v of each merge is the representative, so chains
    collapse onto their last stop. Merge events are processed in ascending
    edge length (then endpoint ids) and recorded for auditing against the
    pre-merge graph. Non-representative stops lose their stop flag; the
    topology is untouched.
    """
    if threshold_m <= 0:
        raise ValueError("threshold_m must be positive")
    in_deg = road.in_degrees()
    stop_set = set(road.stop_ids)
    candidates = sorted(
        (
            e
            for e in road.edges
            if e.u in stop_set and e.v in stop_set and e.length_m < threshold_m and in_deg[e.v] == 1
        ),
        key=lambda e: (e.length_m, e.u, e.v),
    )
    parent: dict[StopId, StopId] = {s: s for s in stop_set}

    def find(x: StopId) -> StopId:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merges: list[tuple[StopId, StopId]] = []
    for e in candidates:
        ru, rv = find(e.u), find(e.v)
        if ru == rv:
            continue
        parent[ru] = rv
        merges.append((e.u, e.v))

    assignment = {s: find(s) for s in stop_set}
    representatives = {
        rep: road.position(rep) for rep in sorted(set(assignment.values()))
    }
    cmap = ClusterMap(assignment=assignment, representatives=representatives, merges=merges)

    new_nodes = [
        Node(n.node_id, n.lat, n.lon, is_stop=n.is_stop and assignment.get(n.node_id) == n.node_id)
        for n in road.nodes.values()
    ]
    rewritten = RoadGraph(new_nodes, road.edges)
    return rewritten, cmap


def audit_cluster_map(road_before: RoadGraph, cmap: ClusterMap, threshold_m: float) -> list[str]:
    """Re-verify every recorded merge against the pre-merge graph.

    Returns a list of violation descriptions; empty means the clustering
    rule held for all merges.
    """
    in_deg = road_before.in_degrees()
    edge_len = {(e.u, e.v): e.length_m for e in road_before.edges}
    stop_set = set(road_before.stop_ids)
    problems: list[str] = []
    for u, v in cmap.merges:
        if u not in stop_set or v not in stop_set:
            problems.append(f"merge ({u},{v}): endpoint is not a stop")
            continue
        if (u, v) not in edge_len:
            problems.append(f"merge ({u},{v}): no such road edge")
            continue
        if not (edge_len[(u, v)] < threshold_m):
            problems.append(f"merge ({u},{v}): edge length {edge_len[(u, v)]} >= {threshold_m}")
        if in_deg[v] != 1:
            problems.append(f"merge ({u},{v}): deg_in({v}) = {in_deg[v]} != 1")
    return problems


def remap_route_stops(stops: Sequence[StopId], cmap: ClusterMap) -> list[StopId]:
    """Rewrite a raw stop sequence onto cluster representatives, collapsing
    consecutive duplicates. May return fewer than 2 stops; callers drop those."""
    out: list[StopId] = []
    for s in stops:
        rep = cmap.cluster_of(s)
        if not out or out[-1] != rep:
            out.append(rep)
    return out


@dataclass(frozen=True)
class ZoneGrid:
    """Uniform rows x cols partition of the stop/station bounding box."""

    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float
    rows: int
    cols: int

    def zone_of(self, lat: float, lon: float) -> ZoneId:
        row = self._index(lat, self.min_lat, self.max_lat, self.rows)
        col = self._index(lon, self.min_lon, self.max_lon, self.cols)
        return row * self.cols + col

    @staticmethod
    def _index(x: float, lo: float, hi: float, n: int) -> int:
        span = hi - lo
        if span <= 0:
            return 0
        i = int((x - lo) / span * n)
        return min(max(i, 0), n - 1)

    def centroid(self, zone: ZoneId) -> tuple[float, float]:
        row, col = divmod(zone, self.cols)
        lat = self.min_lat + (row + 0.5) * (self.max_lat - self.min_lat) / self.rows
        lon = self.min_lon + (col + 0.5) * (self.max_lon - self.min_lon) / self.cols
        return (lat, lon)

    @property
    def n_zones(self) -> int:
        return self.rows * self.cols


def build_grid(
    road: RoadGraph,
    rows: int = DEFAULT_GRID_ROWS,
    cols: int = DEFAULT_GRID_COLS,
    metro: Optional[MetroNetwork] = None,
) -> ZoneGrid:
    """Bounding box over stop (and metro station) coordinates, split uniformly."""
    if rows < 1 or cols < 1:
        raise ValueError("grid rows and cols must be >= 1")
    points = [road.position(s) for s in road.stop_ids]
    if metro is not None:
        points += [(st.lat, st.lon) for st in metro.stations.values()]
    if not points:
        raise GraphError("cannot build a zone grid without any stop or station")
    lats = [p[0] for p in points]
    lons = [p[1] for p in points]
    return ZoneGrid(
        min_lat=min(lats),
        max_lat=max(lats),
        min_lon=min(lons),
        max_lon=max(lons),
        rows=rows,
        cols=cols,
    )


class DemandMatrix:
    """Sparse daily passenger counts between zone pairs."""

    def __init__(self, entries: Iterable[tuple[ZoneId, ZoneId, float]] = ()):
        self.q: dict[tuple[ZoneId, ZoneId], float] = {}
        for s, t, value in entries:
            if value < 0:
                raise ValueError(f"negative demand for pair ({s},{t})")
            if value > 0:
                self.q[(s, t)] = self.q.get((s, t), 0.0) + value

    def total(self) -> float:
        return sum(self.q.values())

    def pairs(self) -> list[tuple[ZoneId, ZoneId, float]]:
        return [(s, t, v) for (s, t), v in sorted(self.q.items())]

    def __len__(self) -> int:
        return len(self.q)


def zone_populations(
    rng: random.Random, zones: Sequence[ZoneId]
) -> dict[ZoneId, float]:
    return {z: rng.uniform(100.0, 1000.0) for z in sorted(zones)}


def gravity_demand(
    grid: ZoneGrid,
    populations: dict[ZoneId, float],
    scale: float = 1e-4,
    min_flow: float = 1.0,
) -> DemandMatrix:
    """q(s,t) proportional to population(s)*population(t)/distance(s,t)."""
    entries = []
    zones = sorted(populations)
    for s in zones:
        lat_s, lon_s = grid.centroid(s)
        for t in zones:
            if s == t:
                continue
            lat_t, lon_t = grid.centroid(t)
            dist_km = max(haversine_m(lat_s, lon_s, lat_t, lon_t) / 1000.0, 0.2)
            q = scale * populations[s] * populations[t] / dist_km
            if q >= min_flow:
                entries.append((s, t, round(q, 3)))
    return DemandMatrix(entries)


def _connected(n_nodes: int, edges: list[RoadEdge]) -> bool:
    if n_nodes == 0:
        return False
    adj: dict[int, list[int]] = {}
    for e in edges:
        adj.setdefault(e.u, []).append(e.v)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj.get(u, []):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n_nodes


def _road_distances(n_nodes: int, edges: list[RoadEdge], src: int) -> dict[int, float]:
    import heapq as _hq

    adj: dict[int, list[tuple[int, float]]] = {}
    for e in edges:
        adj.setdefault(e.u, []).append((e.v, e.length_m))
    dist = {src: 0.0}
    heap = [(0.0, src)]
    done: set[int] = set()
    while heap:
        d, u = _hq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adj.get(u, []):
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                _hq.heappush(heap, (nd, v))
    return dist


def synth_city(
    seed: int,
    n_junctions: int,
    n_stops: int,
    grid: int,
    road_speed_kmh: float = SYNTH_ROAD_SPEED_KMH,
) -> tuple[RoadGraph, MetroNetwork, DemandMatrix]:
    """Deterministic synthetic city: connected road graph, two metro lines,
    gravity demand between occupied zones.

    Stops are spaced more than the default clustering threshold apart, so a
    clustering pass over the generated city is a no-op and the zone grid is
    stable across preprocessing.
    """
    if n_stops < 1:
        raise ValueError("n_stops must be >= 1")
    if n_stops > n_junctions:
        raise ValueError("n_stops cannot exceed n_junctions")
    if grid < 1:
        raise ValueError("grid must be >= 1")

    center_lat, center_lon = 38.74, -9.15
    half_lat = 0.036
    half_lon = 0.046

    last_error = "generation failed"
    for attempt in range(_SYNTH_MAX_ATTEMPTS):
        rng = random.Random(seed * 1_000_003 + attempt)
        pts = [
            (
                center_lat + rng.uniform(-half_lat, half_lat),
                center_lon + rng.uniform(-half_lon, half_lon),
            )
            for _ in range(n_junctions)
        ]
        # k-nearest-neighbour road mesh, both directions per link.
        k = min(4, n_junctions - 1)
        links: set[tuple[int, int]] = set()
        for i, (lat, lon) in enumerate(pts):
            near = sorted(
                (j for j in range(n_junctions) if j != i),
                key=lambda j: haversine_m(lat, lon, pts[j][0], pts[j][1]),
            )[:k]
            for j in near:
                links.add((min(i, j), max(i, j)))
        edges: list[RoadEdge] = []
        speed = kmh_to_ms(road_speed_kmh)
        for i, j in sorted(links):
            d = haversine_m(pts[i][0], pts[i][1], pts[j][0], pts[j][1])
            if d <= 0:
                continue
            edges.append(RoadEdge(i, j, d, d / speed))
            edges.append(RoadEdge(j, i, d, d / speed))
        if not _connected(n_junctions, edges):
            last_error = f"attempt {attempt}: disconnected road mesh"
            continue

        # Stops: greedy selection keeping road distance between stops > 150 m
        # so the 100 m clustering rule never fires on synthetic cities.
        order = list(range(n_junctions))
        rng.shuffle(order)
        stops: list[int] = []
        for cand in order:
            if len(stops) == n_stops:
                break
            if all(
                haversine_m(pts[cand][0], pts[cand][1], pts[s][0], pts[s][1]) > 150.0
                for s in stops
            ):
                stops.append(cand)
        if len(stops) < n_stops:
            last_error = f"attempt {attempt}: could not place {n_stops} spaced stops"
            continue
        stop_set = set(stops)

        nodes = [
            Node(i, pts[i][0], pts[i][1], is_stop=i in stop_set) for i in range(n_junctions)
        ]
        road = RoadGraph(nodes, edges)

        # Two metro lines through the city center, stations offset from roads.
        stations: list[Node] = []
        metro_edges: list[MetroEdge] = []
        sid = n_junctions
        for line_idx, (horizontal, n_st) in enumerate(((True, 5), (False, 4))):
            line = f"m{line_idx}"
            prev: Optional[Node] = None
            for i in range(n_st):
                frac = (i + 0.5) / n_st
                if horizontal:
                    lat = center_lat + 0.004
                    lon = center_lon - half_lon + 2 * half_lon * frac
                else:
                    lat = center_lat - half_lat + 2 * half_lat * frac
                    lon = center_lon - 0.005
                st = Node(sid, lat, lon, is_stop=False)
                stations.append(st)
                sid += 1
                if prev is not None:
                    d = haversine_m(prev.lat, prev.lon, st.lat, st.lon)
                    metro_edges.append(MetroEdge(prev.node_id, st.node_id, line, d))
                    metro_edges.append(MetroEdge(st.node_id, prev.node_id, line, d))
                prev = st
        metro = MetroNetwork(stations, metro_edges)

        zone_grid = build_grid(road, grid, grid, metro)
        occupied = sorted(
            {zone_grid.zone_of(*road.position(s)) for s in road.stop_ids}
            | {zone_grid.zone_of(st.lat, st.lon) for st in metro.stations.values()}
        )
        populations = zone_populations(rng, occupied)
        demand = gravity_demand(zone_grid, populations)
        if demand.total() <= 0:
            last_error = f"attempt {attempt}: degenerate demand"
            continue
        return road, metro, demand

    raise RuntimeError(f"synthetic city generation failed after retries: {last_error}")
