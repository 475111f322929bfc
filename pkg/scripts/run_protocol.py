"""Run the full redesign protocol on a desk-scale synthetic city and print
the headline comparison.

Usage: python scripts/run_protocol.py [--seed 1] [--out runs/protocol]
"""

import argparse
import sys
from pathlib import Path

from transitopt import fileio
from transitopt.pipeline import PipelineRun, RunConfig, load_config

CONFIG = """
[dataset]
synth_seed = 7
synth_junctions = 200
synth_stops = 60
baseline_routes = 14
baseline_trams = 2
baseline_seed = 99

[preprocess]
grid_rows = 5
grid_cols = 5

[routegen]
top_k = 14
max_pairs = 40
n_traversal = 10
traversal_min_len_m = 3000.0
seed = 42
min_route_len_m = 1000.0
max_route_len_m = 30000.0

[moea]
population_size = 40
iterations = 100
mutation_prob = 0.1
crossover_prob = 0.8
min_routes = 6
max_routes = 14
seed = {seed}

[so]
iterations = 100
seed = {so_seed}

[rating]
sample_n = 9
max_rating = 10
"""


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="runs/protocol")
    args = ap.parse_args()

    out = Path(args.out) / f"seed{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / "config.toml"
    cfg_path.write_text(CONFIG.format(seed=args.seed, so_seed=args.seed + 100))
    cfg = load_config(cfg_path)

    run = PipelineRun(cfg, out, log=lambda msg: print(f"  {msg}"))
    report_path = run.run()
    report = fileio.read_json(report_path)

    print("\n=== objective comparison (baseline -> optimized) ===")
    base = report["baseline"]["objectives"]
    opt = report["optimized"]["objectives"]
    for name, delta in report["objective_deltas_pct"].items():
        print(f"  {name:28s} {base[name]:14.2f} -> {opt[name]:14.2f}  ({delta:+.1f}%)")
    print(
        f"  route count                  {report['baseline']['route_count']:14d} -> "
        f"{report['optimized']['route_count']:14d}"
    )
    sv = report["scalar_values"]
    print("\n=== scalarized objective ===")
    print(f"  best Pareto archive member : {sv['best_archive_member']:.4f}")
    print(f"  single-objective optimum   : {sv['optimized']:.4f}")
    print(f"\nartifacts in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
