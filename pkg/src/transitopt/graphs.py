"""Domain graphs: road substrate, routes, bus/metro/walk layers, and the
complete multimodal network assembled per candidate bus network."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

NodeId = int
StopId = int
ZoneId = int

EARTH_RADIUS_M = 6_371_000.0

WALK_CARRIER = "walk"
DEFAULT_WALK_SPEED_KMH = 5.0
DEFAULT_METRO_SPEED_KMH = 60.0
DEFAULT_WALK_RADIUS_M = 300.0


class GraphError(ValueError):
    """Invalid graph data."""


class UnknownRouteError(KeyError):
    def __init__(self, route_id: int):
        self.route_id = route_id
        super().__init__(f"route {route_id} not present in the route pool")


class UnreachableLegError(GraphError):
    def __init__(self, u: NodeId, v: NodeId):
        self.pair = (u, v)
        super().__init__(f"no road path between consecutive stops {u} -> {v}")


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def kmh_to_ms(speed_kmh: float) -> float:
    return speed_kmh * 1000.0 / 3600.0


@dataclass(frozen=True)
class Node:
    node_id: NodeId
    lat: float
    lon: float
    is_stop: bool = False


@dataclass(frozen=True)
class RoadEdge:
    u: NodeId
    v: NodeId
    length_m: float
    time_s: float


class RoadGraph:
    """Directed weighted road graph; the immutable substrate under every candidate."""

    def __init__(self, nodes: Iterable[Node], edges: Iterable[RoadEdge]):
        self.nodes: dict[NodeId, Node] = {n.node_id: n for n in nodes}
        self.edges: list[RoadEdge] = list(edges)
        self._validate()
        self.adjacency: dict[NodeId, list[RoadEdge]] = {nid: [] for nid in self.nodes}
        for e in self.edges:
            self.adjacency[e.u].append(e)

    def _validate(self) -> None:
        for e in self.edges:
            if e.u not in self.nodes or e.v not in self.nodes:
                raise GraphError(f"edge ({e.u},{e.v}) references unknown node")
            if not (e.length_m > 0):
                raise GraphError(f"edge ({e.u},{e.v}) has non-positive length")
            if not (e.time_s > 0):
                raise GraphError(f"edge ({e.u},{e.v}) has non-positive travel time")

    @property
    def stop_ids(self) -> list[StopId]:
        return sorted(nid for nid, n in self.nodes.items() if n.is_stop)

    def in_degree(self, v: NodeId) -> int:
        return sum(1 for e in self.edges if e.v == v)

    def in_degrees(self) -> dict[NodeId, int]:
        deg = {nid: 0 for nid in self.nodes}
        for e in self.edges:
            deg[e.v] += 1
        return deg

    def position(self, nid: NodeId) -> tuple[float, float]:
        n = self.nodes[nid]
        return (n.lat, n.lon)


def shortest_time_path(
    road: RoadGraph, src: NodeId, dst: Optional[NodeId] = None
) -> tuple[dict[NodeId, tuple[float, float]], dict[NodeId, NodeId]]:
    """Dijkstra over (time, length) lexicographic cost.

    Ties on time break toward shorter length, which makes route lengths
    (sums of leg path lengths) well defined. Returns cost and parent maps;
    stops early once ``dst`` is settled when given.
    """
    costs: dict[NodeId, tuple[float, float]] = {}
    parent: dict[NodeId, NodeId] = {}
    heap: list[tuple[float, float, NodeId, NodeId]] = [(0.0, 0.0, src, src)]
    while heap:
        t, length, node, prev = heapq.heappop(heap)
        if node in costs:
            continue
        costs[node] = (t, length)
        parent[node] = prev
        if node == dst:
            break
        for e in road.adjacency[node]:
            if e.v not in costs:
                heapq.heappush(heap, (t + e.time_s, length + e.length_m, e.v, node))
    return costs, parent


def reconstruct_path(parent: Mapping[NodeId, NodeId], src: NodeId, dst: NodeId) -> list[NodeId]:
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    path.reverse()
    return path


class RouteKind(str, Enum):
    ORIGINAL = "original"
    HUB_CONNECTOR = "hub_connector"
    TRAVERSAL = "traversal"
    TRAM_FIXED = "tram_fixed"


@dataclass(frozen=True)
class Route:
    """A directed sequence of stops; buses run legs along optimal-time road paths."""

    route_id: int
    kind: RouteKind
    stops: tuple[StopId, ...]
    length_m: float
    leg_times_s: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.stops) < 2:
            raise GraphError(f"route {self.route_id} has fewer than 2 stops")
        pairs = list(zip(self.stops, self.stops[1:]))
        for u, v in pairs:
            if u == v:
                raise GraphError(f"route {self.route_id} repeats consecutive stop {u}")
        if len(set(pairs)) != len(pairs):
            raise GraphError(f"route {self.route_id} repeats a consecutive stop pair")
        if len(self.leg_times_s) != len(self.stops) - 1:
            raise GraphError(f"route {self.route_id}: leg count does not match stop count")

    @property
    def legs(self) -> list[tuple[StopId, StopId]]:
        return list(zip(self.stops, self.stops[1:]))

    @property
    def is_fixed(self) -> bool:
        return self.kind is RouteKind.TRAM_FIXED


def route_leg_metrics(
    stops: Sequence[StopId], road: RoadGraph
) -> tuple[list[float], list[float]]:
    """Per-leg (lengths, times) along shortest-time road paths between consecutive stops."""
    lengths: list[float] = []
    times: list[float] = []
    for u, v in zip(stops, stops[1:]):
        if u not in road.nodes or v not in road.nodes:
            raise GraphError(f"route stop {u if u not in road.nodes else v} not in road graph")
        costs, _ = shortest_time_path(road, u, v)
        if v not in costs:
            raise UnreachableLegError(u, v)
        t, length = costs[v]
        times.append(t)
        lengths.append(length)
    return lengths, times


def route_length(route: Route, road: RoadGraph) -> float:
    """Total length of the route: sum of shortest-time road path lengths per leg."""
    for s in route.stops:
        node = road.nodes.get(s)
        if node is None or not node.is_stop:
            raise GraphError(f"route {route.route_id} references non-stop node {s}")
    lengths, _ = route_leg_metrics(route.stops, road)
    return sum(lengths)


def make_route(
    route_id: int, kind: RouteKind, stops: Sequence[StopId], road: RoadGraph
) -> Route:
    lengths, times = route_leg_metrics(stops, road)
    return Route(
        route_id=route_id,
        kind=kind,
        stops=tuple(stops),
        length_m=sum(lengths),
        leg_times_s=tuple(times),
    )


@dataclass(frozen=True)
class BusNetwork:
    """A candidate solution: the set of selected (non-fixed) pool route ids.

    Fixed tram routes are implicitly part of every network and never appear here.
    """

    route_ids: frozenset[int]

    @classmethod
    def of(cls, ids: Iterable[int]) -> "BusNetwork":
        return cls(route_ids=frozenset(ids))

    def __len__(self) -> int:
        return len(self.route_ids)

    def with_routes(self, ids: Iterable[int]) -> "BusNetwork":
        return BusNetwork(route_ids=frozenset(ids))

    def sorted_ids(self) -> list[int]:
        return sorted(self.route_ids)


@dataclass(frozen=True)
class MetroEdge:
    u: NodeId
    v: NodeId
    line: str
    length_m: float


class MetroNetwork:
    """Fixed metro layer; singleton per run, never mutated."""

    def __init__(
        self,
        stations: Iterable[Node],
        edges: Iterable[MetroEdge],
        speed_kmh: float = DEFAULT_METRO_SPEED_KMH,
    ):
        self.stations: dict[NodeId, Node] = {s.node_id: s for s in stations}
        self.edges: list[MetroEdge] = list(edges)
        self.speed_kmh = speed_kmh
        for e in self.edges:
            if e.u not in self.stations or e.v not in self.stations:
                raise GraphError(f"metro edge ({e.u},{e.v}) references unknown station")
            if not (e.length_m > 0):
                raise GraphError(f"metro edge ({e.u},{e.v}) has non-positive length")
            if e.line == WALK_CARRIER:
                raise GraphError(f"metro line label {e.line!r} collides with the walk carrier")

    def edge_time_s(self, edge: MetroEdge) -> float:
        return edge.length_m / kmh_to_ms(self.speed_kmh)

    @classmethod
    def empty(cls) -> "MetroNetwork":
        return cls(stations=[], edges=[])


@dataclass(frozen=True)
class WalkEdge:
    u: NodeId
    v: NodeId
    length_m: float


class WalkNetwork:
    """Straight-line transfer walks between nearby stops/stations; both directions stored."""

    def __init__(
        self,
        edges: Iterable[WalkEdge],
        max_length_m: float = DEFAULT_WALK_RADIUS_M,
        speed_kmh: float = DEFAULT_WALK_SPEED_KMH,
    ):
        self.edges: list[WalkEdge] = list(edges)
        self.max_length_m = max_length_m
        self.speed_kmh = speed_kmh
        seen = {(e.u, e.v) for e in self.edges}
        for e in self.edges:
            if not (0 < e.length_m <= max_length_m):
                raise GraphError(
                    f"walk edge ({e.u},{e.v}) length {e.length_m} outside (0, {max_length_m}]"
                )
            if (e.v, e.u) not in seen:
                raise GraphError(f"walk edge ({e.u},{e.v}) missing its reverse")

    def edge_time_s(self, edge: WalkEdge) -> float:
        return edge.length_m / kmh_to_ms(self.speed_kmh)

    @classmethod
    def empty(cls) -> "WalkNetwork":
        return cls(edges=[])


def build_walk_network(
    road: RoadGraph,
    metro: MetroNetwork,
    radius_m: float = DEFAULT_WALK_RADIUS_M,
    speed_kmh: float = DEFAULT_WALK_SPEED_KMH,
) -> WalkNetwork:
    """All stop/station pairs within straight-line ``radius_m``, both directions."""
    points: list[tuple[NodeId, float, float]] = [
        (nid, n.lat, n.lon) for nid, n in sorted(road.nodes.items()) if n.is_stop
    ]
    points += [(sid, s.lat, s.lon) for sid, s in sorted(metro.stations.items())]
    edges: list[WalkEdge] = []
    for i, (ida, lata, lona) in enumerate(points):
        for idb, latb, lonb in points[i + 1 :]:
            d = haversine_m(lata, lona, latb, lonb)
            if 0 < d <= radius_m:
                edges.append(WalkEdge(ida, idb, d))
                edges.append(WalkEdge(idb, ida, d))
    return WalkNetwork(edges, max_length_m=radius_m, speed_kmh=speed_kmh)


@dataclass(frozen=True)
class NetEdge:
    """One edge of the complete network: (u, v, carrier) with a traversal time."""

    u: NodeId
    v: NodeId
    carrier: object  # int route_id | str metro line | WALK_CARRIER
    time_s: float


class CompleteNetwork:
    """Time-weighted multimodal multigraph: selected bus routes + metro + walks."""

    def __init__(self, edges: list[NetEdge], positions: dict[NodeId, tuple[float, float]]):
        self.edges = edges
        self.positions = positions
        self.adjacency: dict[NodeId, list[NetEdge]] = {}
        for e in edges:
            self.adjacency.setdefault(e.u, []).append(e)
            self.adjacency.setdefault(e.v, [])

    def edge_keys(self) -> list[tuple[NodeId, NodeId, object]]:
        return [(e.u, e.v, e.carrier) for e in self.edges]


def assemble_complete(
    bus: BusNetwork,
    metro: MetroNetwork,
    walk: WalkNetwork,
    pool,
    road: Optional[RoadGraph] = None,
) -> CompleteNetwork:
    """Integrate the candidate bus network with the fixed metro and walk layers.

    Fixed tram routes from the pool are always included. Deterministic for
    identical inputs: routes are laid down in ascending route id, then metro,
    then walk edges in stored order.
    """
    edges: list[NetEdge] = []
    selected = sorted(bus.route_ids) + [
        rid for rid in pool.fixed_ids() if rid not in bus.route_ids
    ]
    positions: dict[NodeId, tuple[float, float]] = {}
    for rid in selected:
        route = pool.routes.get(rid)
        if route is None:
            raise UnknownRouteError(rid)
        for (u, v), t in zip(route.legs, route.leg_times_s):
            edges.append(NetEdge(u, v, route.route_id, t))
    for me in metro.edges:
        edges.append(NetEdge(me.u, me.v, me.line, metro.edge_time_s(me)))
    for we in walk.edges:
        edges.append(NetEdge(we.u, we.v, WALK_CARRIER, walk.edge_time_s(we)))
    if road is not None:
        for nid, n in road.nodes.items():
            if n.is_stop:
                positions[nid] = (n.lat, n.lon)
    for sid, s in metro.stations.items():
        positions[sid] = (s.lat, s.lon)
    return CompleteNetwork(edges, positions)
