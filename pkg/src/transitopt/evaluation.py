"""Trip planning over the complete multimodal network and the four network
objectives: total length, unsatisfied demand, in-vehicle time, transfers.

Trips are minimum generalized-cost paths between zone centroids, where the
generalized cost is total travel time plus a fixed penalty per stage change.
Zone centroids are virtual access points joined to every stop/station in the
cell by walking-speed connector edges; connectors count toward walking time
but are not stages, so they neither incur penalties nor affect transfer
counts. Coverage requires a path whose transfer count stays within the
allowed maximum, so adding routes can only grow the feasible set.

Two searchers implement the same semantics: a generic label-setting search
with parent tracking behind ``plan_trip``, and a dense integer-encoded sweep
inside ``EvalContext`` used by ``evaluate``. Tests pin both to an exhaustive
path-enumeration oracle.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .graphs import (
    BusNetwork,
    CompleteNetwork,
    MetroNetwork,
    RoadGraph,
    WALK_CARRIER,
    WalkNetwork,
    ZoneId,
    haversine_m,
    kmh_to_ms,
)
from .preprocess import DemandMatrix, ZoneGrid
from .routegen import RoutePool

DEFAULT_TRANSFER_PENALTY_S = 300.0
DEFAULT_MAX_TRANSFERS = 3

_WALK = "walk-carrier"
_NONE = "no-carrier"


@dataclass(frozen=True)
class Stage:
    """Maximal single-carrier trip segment; walk stages are single edges."""

    kind: str  # "bus" | "metro" | "walk"
    triplets: tuple[tuple[int, int, object], ...]
    duration_s: float


@dataclass(frozen=True)
class Trip:
    origin: ZoneId
    destination: ZoneId
    stages: tuple[Stage, ...]
    t_inv_s: float
    t_wal_s: float
    generalized_cost_s: float
    t_wai_s: float = 0.0

    @property
    def total_time_s(self) -> float:
        return self.t_inv_s + self.t_wai_s + self.t_wal_s

    @property
    def transfers(self) -> int:
        walk_stages = sum(1 for s in self.stages if s.kind == "walk")
        return max(0, len(self.stages) - walk_stages - 1)


@dataclass(frozen=True)
class Uncovered:
    origin: ZoneId
    destination: ZoneId
    reason: str  # "no_path" | "too_many_transfers"


PlanResult = Union[Trip, Uncovered]


@dataclass(frozen=True)
class ObjectiveVector:
    """(total length m, unsatisfied demand fraction, in-vehicle passenger-seconds,
    transfers per passenger); all minimized."""

    total_length_m: float
    unsatisfied_demand: float
    in_vehicle_time_s: float
    transfers_per_passenger: float

    def __post_init__(self) -> None:
        vals = self.as_tuple()
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError(f"objectives must be finite and non-negative: {vals}")
        if self.unsatisfied_demand > 1.0 + 1e-12:
            raise ValueError(f"unsatisfied demand {self.unsatisfied_demand} exceeds 1")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (
            self.total_length_m,
            self.unsatisfied_demand,
            self.in_vehicle_time_s,
            self.transfers_per_passenger,
        )

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in OBJECTIVE_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveVector":
        return cls(**{name: float(d[name]) for name in OBJECTIVE_NAMES})


OBJECTIVE_NAMES = (
    "total_length_m",
    "unsatisfied_demand",
    "in_vehicle_time_s",
    "transfers_per_passenger",
)


@dataclass(frozen=True)
class TripSummary:
    """Per-OD outcome of the fast sweep: enough for objectives and reports."""

    generalized_cost_s: float
    t_inv_s: float
    t_wal_s: float
    transfers: int

    @property
    def total_time_s(self) -> float:
        return self.t_inv_s + self.t_wal_s


# -- generic search (plan_trip) ----------------------------------------------


def _generic_sweep(
    adjacency: dict[int, list[tuple[int, object, float]]],
    access: Sequence[tuple[int, float]],
    attach_in: dict[int, tuple[ZoneId, float]],
    penalty_s: float,
    cap: Optional[int],
    targets: Optional[set[ZoneId]] = None,
    parents: Optional[dict] = None,
) -> dict[ZoneId, TripSummary]:
    """Label-setting search over (node, carrier, vehicle-stage-count) states.

    With ``cap`` set, states are pruned once their transfer count exceeds the
    cap and labels are kept Pareto-optimal in (stage count, cost); without it
    this is Dijkstra over (node, carrier). Because costs pop in ascending
    order, a popped state is dominated exactly when some settled state at the
    same (node, carrier) has an equal-or-smaller stage count.
    """
    results: dict[ZoneId, TripSummary] = {}
    remaining = set(targets) if targets is not None else None
    heap: list[tuple] = []
    counter = 0
    for stop, t_ac in access:
        heap.append((t_ac, counter, stop, _NONE, 0, 0.0, t_ac, None, ("access", stop, t_ac)))
        counter += 1
    heapq.heapify(heap)
    settled: set = set()
    min_k: dict[tuple[int, object], int] = {}

    while heap:
        cost, _, node, carrier, k, t_inv, t_wal, prev_state, edge = heapq.heappop(heap)
        if isinstance(node, tuple):  # centroid arrival ("dest", zone)
            zone = node[1]
            if zone in results:
                continue
            results[zone] = TripSummary(cost, t_inv, t_wal, max(0, k - 1))
            if parents is not None:
                parents[node] = (prev_state, edge)
            if remaining is not None:
                remaining.discard(zone)
                if not remaining:
                    break
            continue
        if cap is None:
            if (node, carrier) in settled:
                continue
            settled.add((node, carrier))
        else:
            best = min_k.get((node, carrier))
            if best is not None and best <= k:
                continue
            min_k[(node, carrier)] = k
        state = (node, carrier, k)
        if parents is not None:
            parents[state] = (prev_state, edge)

        att = attach_in.get(node)
        if att is not None:
            zone, t_eg = att
            if zone not in results:
                heapq.heappush(
                    heap,
                    (
                        cost + t_eg,
                        counter,
                        ("dest", zone),
                        carrier,
                        k,
                        t_inv,
                        t_wal + t_eg,
                        state,
                        ("egress", node, t_eg),
                    ),
                )
                counter += 1
        for v, ecar, t in adjacency.get(node, ()):
            if ecar == WALK_CARRIER:
                pen = 0.0 if carrier == _NONE else penalty_s
                entry = (cost + t + pen, counter, v, _WALK, k, t_inv, t_wal + t)
            elif ecar == carrier:
                entry = (cost + t, counter, v, ecar, k, t_inv + t, t_wal)
            else:
                nk = k + 1
                if cap is not None and nk > cap + 1:
                    continue
                pen = 0.0 if carrier == _NONE else penalty_s
                entry = (cost + t + pen, counter, v, ecar, nk, t_inv + t, t_wal)
            counter += 1
            heapq.heappush(heap, entry + (state, ("edge", node, v, ecar, t)))
    return results


def _zone_attachments(
    positions: dict[int, tuple[float, float]],
    grid: ZoneGrid,
    walk_speed_kmh: float,
) -> tuple[dict[ZoneId, list[tuple[int, float]]], dict[int, tuple[ZoneId, float]]]:
    speed = kmh_to_ms(walk_speed_kmh)
    attach_out: dict[ZoneId, list[tuple[int, float]]] = {}
    attach_in: dict[int, tuple[ZoneId, float]] = {}
    for node, (lat, lon) in sorted(positions.items()):
        zone = grid.zone_of(lat, lon)
        clat, clon = grid.centroid(zone)
        t = haversine_m(lat, lon, clat, clon) / speed
        attach_out.setdefault(zone, []).append((node, t))
        attach_in[node] = (zone, t)
    return attach_out, attach_in


def _reconstruct_edges(parents: dict, dest_zone: ZoneId) -> list[tuple[int, int, object, float]]:
    entry = parents.get(("dest", dest_zone))
    edges: list[tuple[int, int, object, float]] = []
    state = entry[0] if entry else None
    while state is not None:
        prev_state, edge = parents[state]
        if edge[0] == "edge":
            edges.append((edge[1], edge[2], edge[3], edge[4]))
        state = prev_state
    edges.reverse()
    return edges


def stages_from_edges(
    edges: Sequence[tuple[int, int, object, float]]
) -> tuple[Stage, ...]:
    """Group consecutive same-carrier vehicle edges into stages; each walk
    edge is a stage of its own."""
    stages: list[Stage] = []
    cur: list[tuple[int, int, object]] = []
    cur_carrier: object = _NONE
    cur_time = 0.0

    def flush() -> None:
        nonlocal cur, cur_time
        if cur:
            label = cur[0][2]
            kind = (
                "walk"
                if label == WALK_CARRIER
                else ("bus" if isinstance(label, int) else "metro")
            )
            stages.append(Stage(kind=kind, triplets=tuple(cur), duration_s=cur_time))
            cur = []
            cur_time = 0.0

    for u, v, carrier, t in edges:
        if carrier == WALK_CARRIER or carrier != cur_carrier:
            flush()
        cur.append((u, v, carrier))
        cur_time += t
        cur_carrier = carrier
        if carrier == WALK_CARRIER:
            flush()
            cur_carrier = _NONE
    flush()
    return tuple(stages)


def plan_trip(
    net: CompleteNetwork,
    grid: ZoneGrid,
    s: ZoneId,
    t: ZoneId,
    penalty_s: float = DEFAULT_TRANSFER_PENALTY_S,
    max_transfers: int = DEFAULT_MAX_TRANSFERS,
    walk_speed_kmh: float = 5.0,
) -> PlanResult:
    """Minimum generalized-cost trip between two zones, or Uncovered.

    Reported times exclude the transfer penalty: the penalty shapes the
    choice of path only.
    """
    if s == t:
        raise ValueError("origin and destination zones must differ")
    adjacency: dict[int, list[tuple[int, object, float]]] = {}
    for e in net.edges:
        adjacency.setdefault(e.u, []).append((e.v, e.carrier, e.time_s))
        adjacency.setdefault(e.v, [])
    attach_out, attach_in = _zone_attachments(net.positions, grid, walk_speed_kmh)
    access = attach_out.get(s, [])

    parents: dict = {}
    found = _generic_sweep(adjacency, access, attach_in, penalty_s, None, {t}, parents)
    res = found.get(t)
    if res is None:
        return Uncovered(s, t, "no_path")
    if res.transfers > max_transfers:
        parents = {}
        capped = _generic_sweep(
            adjacency, access, attach_in, penalty_s, max_transfers, {t}, parents
        )
        res = capped.get(t)
        if res is None:
            return Uncovered(s, t, "too_many_transfers")
    edges = _reconstruct_edges(parents, t)
    return Trip(
        origin=s,
        destination=t,
        stages=stages_from_edges(edges),
        t_inv_s=res.t_inv_s,
        t_wal_s=res.t_wal_s,
        generalized_cost_s=res.generalized_cost_s,
    )


# -- evaluation context (dense fast path) ------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    transfer_penalty_s: float = DEFAULT_TRANSFER_PENALTY_S
    max_transfers: int = DEFAULT_MAX_TRANSFERS
    walk_speed_kmh: float = 5.0
    tl_include_fixed: bool = True


class EvalContext:
    """Immutable evaluation state shared across candidates: substrate layers,
    zone attachments, demand, and a cache of evaluated genomes.

    Node and carrier identifiers are compiled to dense integers once so the
    per-candidate sweep runs on flat int-keyed structures.
    """

    def __init__(
        self,
        road: RoadGraph,
        pool: RoutePool,
        metro: MetroNetwork,
        walk: WalkNetwork,
        grid: ZoneGrid,
        demand: DemandMatrix,
        config: EvalConfig = EvalConfig(),
    ):
        if demand.total() <= 0:
            raise ValueError("demand total must be positive")
        self.road = road
        self.pool = pool
        self.metro = metro
        self.walk = walk
        self.grid = grid
        self.demand = demand
        self.config = config

        positions: dict[int, tuple[float, float]] = {
            nid: road.position(nid) for nid in road.stop_ids
        }
        for sid, st in metro.stations.items():
            positions[sid] = (st.lat, st.lon)
        self.positions = positions

        node_ids = sorted(positions)
        self._node_index = {nid: i for i, nid in enumerate(node_ids)}
        n_nodes = len(node_ids)

        # dense carrier codes: 0 walk, 1 "not boarded yet", metro lines, routes
        lines = sorted({e.line for e in metro.edges})
        self._code_walk = 0
        self._code_none = 1
        line_code = {line: 2 + i for i, line in enumerate(lines)}
        route_code = {
            rid: 2 + len(lines) + i for i, rid in enumerate(sorted(pool.routes))
        }
        self._n_codes = 2 + len(lines) + len(pool.routes)
        c = self._n_codes

        static_adj: list[list[tuple[int, int, float]]] = [[] for _ in range(n_nodes)]
        for me in metro.edges:
            static_adj[self._node_index[me.u]].append(
                (self._node_index[me.v] * c, line_code[me.line], metro.edge_time_s(me))
            )
        for we in walk.edges:
            static_adj[self._node_index[we.u]].append(
                (self._node_index[we.v] * c, self._code_walk, walk.edge_time_s(we))
            )
        self._static_adj = static_adj

        self._route_adds: dict[int, list[tuple[int, tuple[int, int, float]]]] = {}
        for rid, route in pool.routes.items():
            code = route_code[rid]
            self._route_adds[rid] = [
                (
                    self._node_index[u],
                    (self._node_index[v] * c, code, t),
                )
                for (u, v), t in zip(route.legs, route.leg_times_s)
            ]
        self._fixed_ids = pool.fixed_ids()
        self._fixed_length = pool.fixed_length_m()

        speed = kmh_to_ms(config.walk_speed_kmh)
        self._access: dict[ZoneId, list[tuple[int, float]]] = {}
        self._egress_zone = [-1] * n_nodes
        self._egress_time = [0.0] * n_nodes
        for nid in node_ids:
            lat, lon = positions[nid]
            zone = grid.zone_of(lat, lon)
            clat, clon = grid.centroid(zone)
            t = haversine_m(lat, lon, clat, clon) / speed
            dense = self._node_index[nid]
            self._access.setdefault(zone, []).append((dense, t))
            self._egress_zone[dense] = zone
            self._egress_time[dense] = t

        self._od: dict[ZoneId, list[tuple[ZoneId, float]]] = {}
        self.total_demand = 0.0
        for s, t, q in demand.pairs():
            if s == t:
                continue
            self._od.setdefault(s, []).append((t, q))
            self.total_demand += q
        if self.total_demand <= 0:
            raise ValueError("demand total over distinct zone pairs must be positive")

        self._cache: dict[frozenset, ObjectiveVector] = {}

    # -- assembly ------------------------------------------------------------

    def _adjacency_for(self, bus: BusNetwork) -> list[list[tuple[int, int, float]]]:
        adj = [lst[:] for lst in self._static_adj]
        ids = set(bus.route_ids)
        ids.update(self._fixed_ids)
        for rid in sorted(ids):
            if rid not in self._route_adds:
                from .graphs import UnknownRouteError

                raise UnknownRouteError(rid)
            for u, entry in self._route_adds[rid]:
                adj[u].append(entry)
        return adj

    def _dense_sweep(
        self,
        adj: list[list[tuple[int, int, float]]],
        origin: ZoneId,
        cap: Optional[int],
        targets: Optional[set[ZoneId]],
    ) -> dict[ZoneId, TripSummary]:
        access = self._access.get(origin)
        results: dict[ZoneId, TripSummary] = {}
        if not access:
            return results
        c = self._n_codes
        code_none = self._code_none
        penalty = self.config.transfer_penalty_s
        egress_zone = self._egress_zone
        egress_time = self._egress_time
        remaining = set(targets) if targets is not None else None

        heap: list[tuple] = [
            (t_ac, dense * c + code_none, 0, 0.0, t_ac) for dense, t_ac in access
        ]
        heapq.heapify(heap)
        settled = bytearray(len(adj) * c)
        push = heapq.heappush
        pop = heapq.heappop

        while heap:
            cost, state, k, t_inv, t_wal = pop(heap)
            if state < 0:
                zone = -state - 1
                if zone in results:
                    continue
                results[zone] = TripSummary(cost, t_inv, t_wal, max(0, k - 1))
                if remaining is not None:
                    remaining.discard(zone)
                    if not remaining:
                        break
                continue
            if cap is None:
                if settled[state]:
                    continue
                settled[state] = 1
            else:
                prev = settled[state]
                if prev and prev <= k + 1:
                    continue
                settled[state] = k + 1
            node, code = divmod(state, c)

            zone = egress_zone[node]
            if zone >= 0 and zone not in results:
                push(heap, (cost + egress_time[node], -zone - 1, k, t_inv, t_wal + egress_time[node]))
            for v_base, ecode, t in adj[node]:
                if ecode == 0:  # walk
                    pen = 0.0 if code == code_none else penalty
                    push(heap, (cost + t + pen, v_base, k, t_inv, t_wal + t))
                elif ecode == code:
                    push(heap, (cost + t, v_base + ecode, k, t_inv + t, t_wal))
                else:
                    nk = k + 1
                    if cap is not None and nk > cap + 1:
                        continue
                    pen = 0.0 if code == code_none else penalty
                    push(heap, (cost + t + pen, v_base + ecode, nk, t_inv + t, t_wal))
        return results

    def _from_zone(
        self,
        adj: list[list[tuple[int, int, float]]],
        origin: ZoneId,
        targets: set[ZoneId],
    ) -> dict[ZoneId, TripSummary]:
        """Two-phase search: plain Dijkstra, then a transfer-capped pass for
        destinations whose optimum exceeded the cap."""
        cap = self.config.max_transfers
        free = self._dense_sweep(adj, origin, None, targets)
        over = {z for z, r in free.items() if r.transfers > cap}
        ok = {z: r for z, r in free.items() if z not in over and z != origin}
        if over:
            for z, r in self._dense_sweep(adj, origin, cap, over).items():
                if z != origin:
                    ok[z] = r
        return ok

    # -- evaluation ----------------------------------------------------------

    def od_results(self, bus: BusNetwork) -> dict[tuple[ZoneId, ZoneId], Optional[TripSummary]]:
        """Planning outcome for every demand pair; None marks uncovered."""
        adj = self._adjacency_for(bus)
        out: dict[tuple[ZoneId, ZoneId], Optional[TripSummary]] = {}
        for s, dests in self._od.items():
            found = self._from_zone(adj, s, {t for t, _ in dests})
            for t, _ in dests:
                out[(s, t)] = found.get(t)
        return out

    def total_length(self, bus: BusNetwork) -> float:
        tl = sum(self.pool.routes[rid].length_m for rid in bus.route_ids)
        if self.config.tl_include_fixed:
            tl += self._fixed_length
        return tl

    def objectives(self, bus: BusNetwork) -> ObjectiveVector:
        cached = self._cache.get(bus.route_ids)
        if cached is not None:
            return cached
        results = self.od_results(bus)
        covered_q = 0.0
        ivt = 0.0
        transfers_q = 0.0
        for s, dests in self._od.items():
            for t, q in dests:
                r = results[(s, t)]
                if r is None:
                    continue
                covered_q += q
                ivt += r.t_inv_s * q
                transfers_q += r.transfers * q
        ud = 1.0 - covered_q / self.total_demand
        ant = transfers_q / covered_q if covered_q > 0 else 0.0
        vec = ObjectiveVector(
            total_length_m=self.total_length(bus),
            unsatisfied_demand=min(max(ud, 0.0), 1.0),
            in_vehicle_time_s=ivt,
            transfers_per_passenger=ant,
        )
        self._cache[bus.route_ids] = vec
        return vec

    def od_pairs(self) -> list[tuple[ZoneId, ZoneId, float]]:
        return [(s, t, q) for s, dests in sorted(self._od.items()) for t, q in dests]

    def plan_all_trips(self, bus: BusNetwork) -> list[PlanResult]:
        """Full trips (with stages) for every demand pair; slow path used for
        trip dumps and inspection."""
        from .graphs import assemble_complete

        net = assemble_complete(bus, self.metro, self.walk, self.pool, road=self.road)
        return [
            plan_trip(
                net,
                self.grid,
                s,
                t,
                self.config.transfer_penalty_s,
                self.config.max_transfers,
                self.config.walk_speed_kmh,
            )
            for s, t, _ in self.od_pairs()
        ]


def evaluate(bus: BusNetwork, ctx: EvalContext) -> ObjectiveVector:
    """Objective vector of a candidate network under the shared context."""
    return ctx.objectives(bus)
