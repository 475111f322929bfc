"""Local HTTP/JSON API serving Pareto samples and collecting ratings for the
companion browser UI. Stateless apart from an append-only ratings log."""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import fileio
from .evaluation import OBJECTIVE_NAMES, ObjectiveVector
from .report import routes_geojson
from .routegen import RouteLengthBounds, build_pool
from .weightfit import RatingRecord, aggregate_ratings


class RatingIn(BaseModel):
    network_id: str
    rater_id: str
    rating: int


class RatingsStore:
    """Append-only JSON-lines store; the aggregate view takes the latest
    record per (network, rater), so re-submitting is idempotent."""

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()
        self._records: list[RatingRecord] = []
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                row = json.loads(line)
                self._records.append(
                    RatingRecord(str(row["network_id"]), str(row["rater_id"]), float(row["rating"]))
                )

    def append(self, rec: RatingRecord) -> None:
        with self._lock:
            with self.path.open("a", encoding="utf-8") as f:
                f.write(
                    json.dumps(
                        {
                            "network_id": rec.network_id,
                            "rater_id": rec.rater_id,
                            "rating": rec.rating,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
            self._records.append(rec)

    def aggregate(self) -> dict[str, dict]:
        means = aggregate_ratings(self._records)
        counts: dict[str, set] = {}
        latest: dict[tuple[str, str], float] = {}
        for rec in self._records:
            latest[(rec.network_id, rec.rater_id)] = rec.rating
        for (nid, rater), _ in latest.items():
            counts.setdefault(nid, set()).add(rater)
        return {
            nid: {"mean": means[nid], "count": len(counts[nid])} for nid in sorted(means)
        }


def create_app(
    run_dir: Path,
    pareto_path: Optional[Path] = None,
    ratings_path: Optional[Path] = None,
    max_rating: int = 10,
    default_sample_n: int = 9,
    static_dir: Optional[Path] = None,
) -> FastAPI:
    run_dir = Path(run_dir)
    pareto_path = pareto_path or run_dir / "pareto.json"
    ratings_path = ratings_path or run_dir / "ratings.jsonl"
    if not pareto_path.exists():
        raise fileio.DataError(f"pareto archive {pareto_path} not found; run optimize-mo first")
    pareto = fileio.read_json(pareto_path)
    networks: dict[str, dict] = {n["network_id"]: n for n in pareto["networks"]}
    order: list[str] = [n["network_id"] for n in pareto["networks"]]
    vectors = [ObjectiveVector.from_dict(n["objectives"]) for n in pareto["networks"]]
    bounds = {
        name: {
            "min": min(v.as_tuple()[i] for v in vectors),
            "max": max(v.as_tuple()[i] for v in vectors),
        }
        for i, name in enumerate(OBJECTIVE_NAMES)
    }

    baseline_path = run_dir / "baseline.json"
    baseline = fileio.read_json(baseline_path) if baseline_path.exists() else None

    road = pool = None
    nodes_csv = run_dir / "preprocessed" / "nodes.csv"
    pool_json = run_dir / "routes.json"
    if nodes_csv.exists() and pool_json.exists():
        road = fileio.read_road_graph(nodes_csv, run_dir / "preprocessed" / "edges.csv")
        routes = fileio.read_routes(pool_json)
        pool = build_pool(routes, RouteLengthBounds(0.0, float("inf")))

    store = RatingsStore(ratings_path)
    app = FastAPI(title="transitopt rating service")
    geo_cache: dict[str, dict] = {}

    def network_or_404(network_id: str) -> dict:
        net = networks.get(network_id)
        if net is None:
            raise HTTPException(status_code=404, detail=f"unknown network {network_id!r}")
        return net

    def geojson_for(route_ids: list[int], label: str) -> dict:
        if road is None or pool is None:
            raise HTTPException(
                status_code=404,
                detail="route geometries unavailable: run directory lacks preprocessed "
                "graph or pool artifacts",
            )
        selected = [pool.routes[rid] for rid in route_ids if rid in pool.routes]
        selected += [pool.routes[rid] for rid in pool.fixed_ids()]
        return routes_geojson(selected, road, label)

    @app.get("/api/sample")
    def api_sample(n: int = default_sample_n):
        if n < 1:
            raise HTTPException(status_code=422, detail="n must be >= 1")
        big_n = len(order)
        if n == 1 or big_n == 1:
            picks = [0]
        else:
            picks = sorted({i * (big_n - 1) // (n - 1) for i in range(n)})
        return {
            "max_rating": max_rating,
            "bounds": bounds,
            "networks": [networks[order[i]] for i in picks],
        }

    @app.get("/api/network/{network_id}/geojson")
    def api_network_geojson(network_id: str):
        net = network_or_404(network_id)
        if network_id not in geo_cache:
            geo = geojson_for(net["route_ids"], network_id)
            geo["properties"] = {
                "network_id": network_id,
                "objectives": net["objectives"],
                "route_count": net["route_count"],
            }
            geo_cache[network_id] = geo
        return geo_cache[network_id]

    @app.get("/api/baseline/geojson")
    def api_baseline_geojson():
        if baseline is None:
            raise HTTPException(status_code=404, detail="no baseline network recorded")
        key = "__baseline__"
        if key not in geo_cache:
            geo = geojson_for(baseline["route_ids"], "baseline")
            geo["properties"] = {
                "network_id": "baseline",
                "objectives": baseline["objectives"],
                "route_count": baseline["route_count"],
            }
            geo_cache[key] = geo
        return geo_cache[key]

    @app.post("/api/ratings", status_code=201)
    def api_post_rating(payload: RatingIn):
        network_or_404(payload.network_id)
        if not (1 <= payload.rating <= max_rating):
            raise HTTPException(
                status_code=422,
                detail=f"rating must lie in [1, {max_rating}]",
            )
        if not payload.rater_id.strip():
            raise HTTPException(status_code=422, detail="rater_id must be non-empty")
        store.append(
            RatingRecord(payload.network_id, payload.rater_id.strip(), float(payload.rating))
        )
        agg = store.aggregate()[payload.network_id]
        return JSONResponse(
            status_code=201,
            content={
                "network_id": payload.network_id,
                "mean": agg["mean"],
                "count": agg["count"],
            },
        )

    @app.get("/api/ratings")
    def api_get_ratings():
        return {"max_rating": max_rating, "networks": store.aggregate()}

    static = static_dir or _default_static_dir()
    if static is not None and static.exists():
        app.mount("/", StaticFiles(directory=str(static), html=True), name="ui")
    return app


def _default_static_dir() -> Optional[Path]:
    here = Path(__file__).resolve()
    for parent in here.parents:
        candidate = parent / "frontend" / "dist"
        if candidate.exists():
            return candidate
    return None
