import random
from pathlib import Path

import pytest

from transitopt import fileio
from transitopt.evaluation import EvalConfig, EvalContext
from transitopt.graphs import (
    MetroNetwork,
    Node,
    RoadEdge,
    RoadGraph,
    WalkNetwork,
    build_walk_network,
)
from transitopt.preprocess import DemandMatrix, build_grid, synth_city
from transitopt.routegen import (
    RouteLengthBounds,
    build_pool,
    gen_hub_connectors,
    gen_traversal,
)

DATA = Path(__file__).parent / "data"


def grid_road(coords, stop_ids=None, edges=()):
    """Road graph from {node: (lat, lon)} plus (u, v, length, time) edges,
    both directions added."""
    stop_ids = set(stop_ids if stop_ids is not None else coords)
    nodes = [Node(n, lat, lon, is_stop=n in stop_ids) for n, (lat, lon) in coords.items()]
    road_edges = []
    for u, v, length, time in edges:
        road_edges.append(RoadEdge(u, v, length, time))
        road_edges.append(RoadEdge(v, u, length, time))
    return RoadGraph(nodes, road_edges)


def directed_road(coords, stop_ids=None, edges=()):
    stop_ids = set(stop_ids if stop_ids is not None else coords)
    nodes = [Node(n, lat, lon, is_stop=n in stop_ids) for n, (lat, lon) in coords.items()]
    return RoadGraph(nodes, [RoadEdge(u, v, length, time) for u, v, length, time in edges])


@pytest.fixture(scope="session")
def mandl15():
    """Hand-built 15-stop benchmark city: road, metro, walk, routes, demand."""
    base = DATA / "mandl15"
    road = fileio.read_road_graph(base / "nodes.csv", base / "edges.csv")
    metro = fileio.read_metro(base / "metro.json")
    walk = fileio.read_walk(base / "walk.json")
    routes = fileio.read_routes(base / "routes.json", road=road)
    demand = fileio.read_demand(base / "demand.csv")
    return {"road": road, "metro": metro, "walk": walk, "routes": routes, "demand": demand}


@pytest.fixture(scope="session")
def mandl15_pool(mandl15):
    return build_pool(mandl15["routes"], RouteLengthBounds(1000.0, 10000.0))


def build_fixture_city(seed, n_junctions=60, n_stops=14, grid_n=3, pool_seed=5):
    """Small synthetic city with a generated route pool and eval context."""
    road, metro, demand = synth_city(seed, n_junctions, n_stops, grid_n)
    grid = build_grid(road, grid_n, grid_n, metro)
    walk = build_walk_network(road, metro)
    bounds = RouteLengthBounds(400.0, 40000.0)
    hubs, _ = gen_hub_connectors(road, demand, grid, top_k=8, max_pairs=16, bounds=bounds)
    trav, _ = gen_traversal(road, 4, 1500.0, pool_seed, bounds, start_id=1000)
    pool = build_pool(hubs + trav, bounds)
    ctx = EvalContext(
        road, pool, metro, walk, grid, demand, EvalConfig(transfer_penalty_s=300.0, max_transfers=8)
    )
    return ctx


@pytest.fixture(scope="session")
def small_city_ctx():
    return build_fixture_city(11)


def random_stop_graph(rng: random.Random, n_nodes=None):
    """Random directed road graph with stop flags, for clustering tests.
    Edge lengths straddle the 100 m clustering threshold."""
    n = n_nodes or rng.randint(6, 28)
    coords = {
        i: (38.7 + rng.uniform(0, 0.02), -9.2 + rng.uniform(0, 0.02)) for i in range(n)
    }
    stop_ids = {i for i in range(n) if rng.random() < 0.7}
    edges = []
    seen = set()
    n_edges = rng.randint(n, 3 * n)
    for _ in range(n_edges):
        u, v = rng.randrange(n), rng.randrange(n)
        if u == v or (u, v) in seen:
            continue
        seen.add((u, v))
        length = rng.choice([rng.uniform(20, 99), rng.uniform(101, 400)])
        edges.append(RoadEdge(u, v, length, length / 5.0))
    nodes = [Node(i, *coords[i], is_stop=i in stop_ids) for i in range(n)]
    return RoadGraph(nodes, edges)
