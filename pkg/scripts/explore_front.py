"""Approximate the Pareto front on a synthetic city and print the
crowding-ordered sample table (ids, route counts, objectives).

Usage: python scripts/explore_front.py [--seed 1] [--stops 60] [--pop 40] [--iters 100]
"""

import argparse
import sys

from transitopt.evaluation import EvalContext
from transitopt.graphs import build_walk_network
from transitopt.moea import GAConfig, run_nsga2, sample_by_crowding
from transitopt.preprocess import build_grid, synth_city
from transitopt.routegen import RouteLengthBounds, build_pool, gen_hub_connectors, gen_traversal


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--stops", type=int, default=60)
    ap.add_argument("--pop", type=int, default=40)
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--sample", type=int, default=9)
    args = ap.parse_args()

    road, metro, demand = synth_city(7, 200, args.stops, 5)
    grid = build_grid(road, 5, 5, metro)
    walk = build_walk_network(road, metro)
    bounds = RouteLengthBounds(1000.0, 30000.0)
    hubs, _ = gen_hub_connectors(road, demand, grid, top_k=14, max_pairs=40, bounds=bounds)
    trav, _ = gen_traversal(road, 10, 3000.0, 42, bounds, start_id=1000)
    ctx = EvalContext(road, build_pool(hubs + trav, bounds), metro, walk, grid, demand)

    cfg = GAConfig(
        population_size=args.pop,
        iterations=args.iters,
        mutation_prob=0.1,
        crossover_prob=0.8,
        min_routes=6,
        max_routes=14,
        seed=args.seed,
    )
    archive, history = run_nsga2(cfg, ctx)
    print(f"archive: {len(archive)} non-dominated networks after {args.iters} iterations")
    print(f"{'id':>6} {'routes':>6} {'length km':>10} {'unsat %':>8} {'ivt pax-h':>10} {'transfers':>9}")
    for nid, member in sample_by_crowding(archive, args.sample):
        o = member.objectives
        print(
            f"{nid:>6} {len(member.genome):>6} {o.total_length_m / 1000:>10.1f} "
            f"{o.unsatisfied_demand * 100:>8.1f} {o.in_vehicle_time_s / 3600:>10.1f} "
            f"{o.transfers_per_passenger:>9.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
