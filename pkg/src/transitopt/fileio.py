"""Readers/writers for the on-disk dataset and artifact formats.

All JSON is UTF-8 with lowercase snake_case keys; artifact JSON is written
canonically (sorted keys, fixed separators) so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Optional

from .graphs import (
    GraphError,
    MetroEdge,
    MetroNetwork,
    Node,
    RoadEdge,
    RoadGraph,
    Route,
    RouteKind,
    WalkEdge,
    WalkNetwork,
    route_leg_metrics,
)
from .preprocess import ClusterMap, DemandMatrix

LENGTH_MATCH_RTOL = 1e-6


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def write_json(path: Path, obj: Any) -> None:
    path.write_text(canonical_json(obj), encoding="utf-8")


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- road graph -------------------------------------------------------------


def write_road_graph(road: RoadGraph, nodes_path: Path, edges_path: Path) -> None:
    with nodes_path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["id", "lat", "lon", "is_stop"])
        for nid in sorted(road.nodes):
            n = road.nodes[nid]
            w.writerow([nid, repr(n.lat), repr(n.lon), int(n.is_stop)])
    with edges_path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["u", "v", "length_m", "time_s"])
        for e in road.edges:
            w.writerow([e.u, e.v, repr(e.length_m), repr(e.time_s)])


def read_road_graph(nodes_path: Path, edges_path: Path) -> RoadGraph:
    try:
        with nodes_path.open(newline="", encoding="utf-8") as f:
            nodes = [
                Node(int(r["id"]), float(r["lat"]), float(r["lon"]), bool(int(r["is_stop"])))
                for r in csv.DictReader(f)
            ]
        with edges_path.open(newline="", encoding="utf-8") as f:
            edges = [
                RoadEdge(int(r["u"]), int(r["v"]), float(r["length_m"]), float(r["time_s"]))
                for r in csv.DictReader(f)
            ]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad road graph data: {exc}") from exc
    try:
        return RoadGraph(nodes, edges)
    except GraphError as exc:
        raise DataError(str(exc)) from exc


# -- metro / walk -----------------------------------------------------------


def write_metro(metro: MetroNetwork, path: Path) -> None:
    obj = {
        "speed_kmh": metro.speed_kmh,
        "stations": [
            {"id": sid, "lat": s.lat, "lon": s.lon} for sid, s in sorted(metro.stations.items())
        ],
        "edges": [
            {"u": e.u, "v": e.v, "line": e.line, "length_m": e.length_m} for e in metro.edges
        ],
    }
    write_json(path, obj)


def read_metro(path: Path) -> MetroNetwork:
    obj = read_json(path)
    try:
        stations = [Node(int(s["id"]), float(s["lat"]), float(s["lon"])) for s in obj["stations"]]
        edges = [
            MetroEdge(int(e["u"]), int(e["v"]), str(e["line"]), float(e["length_m"]))
            for e in obj["edges"]
        ]
        return MetroNetwork(stations, edges, speed_kmh=float(obj.get("speed_kmh", 60.0)))
    except (KeyError, TypeError, ValueError, GraphError) as exc:
        raise DataError(f"bad metro data in {path.name}: {exc}") from exc


def write_walk(walk: WalkNetwork, path: Path) -> None:
    obj = {
        "max_length_m": walk.max_length_m,
        "speed_kmh": walk.speed_kmh,
        "edges": [{"u": e.u, "v": e.v, "length_m": e.length_m} for e in walk.edges],
    }
    write_json(path, obj)


def read_walk(path: Path) -> WalkNetwork:
    obj = read_json(path)
    try:
        edges = [WalkEdge(int(e["u"]), int(e["v"]), float(e["length_m"])) for e in obj["edges"]]
        return WalkNetwork(
            edges,
            max_length_m=float(obj.get("max_length_m", 300.0)),
            speed_kmh=float(obj.get("speed_kmh", 5.0)),
        )
    except (KeyError, TypeError, ValueError, GraphError) as exc:
        raise DataError(f"bad walk data in {path.name}: {exc}") from exc


# -- routes -----------------------------------------------------------------


def write_routes(routes: Iterable[Route], path: Path) -> None:
    obj = {
        "routes": [
            {
                "route_id": r.route_id,
                "kind": r.kind.value,
                "stops": list(r.stops),
                "length_m": r.length_m,
                "leg_times_s": list(r.leg_times_s),
            }
            for r in sorted(routes, key=lambda r: r.route_id)
        ]
    }
    write_json(path, obj)


def read_routes(path: Path, road: Optional[RoadGraph] = None) -> list[Route]:
    """Load the route pool; with a road graph, recompute each length and
    require agreement within 1e-6 relative."""
    obj = read_json(path)
    routes: list[Route] = []
    for r in obj["routes"]:
        try:
            route = Route(
                route_id=int(r["route_id"]),
                kind=RouteKind(r["kind"]),
                stops=tuple(int(s) for s in r["stops"]),
                length_m=float(r["length_m"]),
                leg_times_s=tuple(float(t) for t in r["leg_times_s"]),
            )
        except (KeyError, TypeError, ValueError, GraphError) as exc:
            raise DataError(f"bad route record in {path.name}: {exc}") from exc
        if road is not None:
            lengths, _ = route_leg_metrics(route.stops, road)
            recomputed = sum(lengths)
            if abs(recomputed - route.length_m) > LENGTH_MATCH_RTOL * max(recomputed, 1.0):
                raise DataError(
                    f"route {route.route_id}: stored length {route.length_m} does not match "
                    f"recomputed {recomputed}"
                )
        routes.append(route)
    return routes


# -- demand -----------------------------------------------------------------


def write_demand(demand: DemandMatrix, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["origin_zone", "dest_zone", "passengers"])
        for s, t, q in demand.pairs():
            w.writerow([s, t, repr(q)])


def read_demand(path: Path) -> DemandMatrix:
    try:
        with path.open(newline="", encoding="utf-8") as f:
            entries = [
                (int(r["origin_zone"]), int(r["dest_zone"]), float(r["passengers"]))
                for r in csv.DictReader(f)
            ]
        return DemandMatrix(entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad demand data in {path.name}: {exc}") from exc


# -- cluster map ------------------------------------------------------------


def write_cluster_map(cmap: ClusterMap, path: Path) -> None:
    obj = {
        "assignment": {str(raw): rep for raw, rep in sorted(cmap.assignment.items())},
        "representatives": {
            str(rep): {"lat": pos[0], "lon": pos[1]}
            for rep, pos in sorted(cmap.representatives.items())
        },
        "merges": [[u, v] for u, v in cmap.merges],
    }
    write_json(path, obj)


def read_cluster_map(path: Path) -> ClusterMap:
    obj = read_json(path)
    return ClusterMap(
        assignment={int(k): int(v) for k, v in obj["assignment"].items()},
        representatives={
            int(k): (float(v["lat"]), float(v["lon"]))
            for k, v in obj["representatives"].items()
        },
        merges=[(int(u), int(v)) for u, v in obj["merges"]],
    )
