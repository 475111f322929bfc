"""Command-line entry points for the full pipeline and its individual stages.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 infeasible
optimization.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

from . import fileio
from .evaluation import ObjectiveVector, Trip, Uncovered
from .fileio import DataError
from .graphs import BusNetwork
from .moea import InfeasiblePoolError
from .pipeline import (
    ConfigError,
    PipelineRun,
    RunConfig,
    load_config,
    read_ratings,
)
from .weightfit import FitError, aggregate_ratings, fit_weights

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


def _echo(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_cfg(args: argparse.Namespace) -> RunConfig:
    if args.config is None:
        return RunConfig()
    return load_config(Path(args.config))


def _runner(args: argparse.Namespace, cfg: RunConfig) -> PipelineRun:
    return PipelineRun(
        cfg,
        Path(args.out),
        skip_rating=getattr(args, "skip_rating", False),
        uniform_only=getattr(args, "uniform", False),
        ratings_file=Path(args.ratings) if getattr(args, "ratings", None) else None,
        log=_echo,
    )


def _override_moea(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    moea = cfg.moea
    mapping = {
        "seed": "seed",
        "pop": "population_size",
        "iters": "iterations",
        "mut": "mutation_prob",
        "cx": "crossover_prob",
        "min_routes": "min_routes",
        "max_routes": "max_routes",
    }
    changes = {
        field: getattr(args, arg)
        for arg, field in mapping.items()
        if getattr(args, arg, None) is not None
    }
    if changes:
        moea = dataclasses.replace(moea, **changes)
    return dataclasses.replace(cfg, moea=moea)


# -- subcommand handlers -------------------------------------------------------


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    run = _runner(args, cfg)
    report = run.run()
    _echo(f"pipeline complete; report at {report}")
    print(str(report))
    return EXIT_OK


def cmd_synth_city(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    ds = dataclasses.replace(
        cfg.dataset,
        dir=None,
        synth_seed=args.seed,
        synth_junctions=args.junctions,
        synth_stops=args.stops,
    )
    pp = dataclasses.replace(cfg.preprocess, grid_rows=args.grid, grid_cols=args.grid)
    run = _runner(args, dataclasses.replace(cfg, dataset=ds, preprocess=pp))
    run.ensure_dataset()
    _echo(f"synthetic dataset written under {run.data_dir}")
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    pp = cfg.preprocess
    if args.threshold_m is not None:
        pp = dataclasses.replace(pp, cluster_threshold_m=args.threshold_m)
    if args.grid is not None:
        pp = dataclasses.replace(pp, grid_rows=args.grid, grid_cols=args.grid)
    run = _runner(args, dataclasses.replace(cfg, preprocess=pp))
    run.ensure_dataset()
    run.ensure_preprocess()
    _echo(f"preprocessed artifacts under {run.prep_dir}")
    return EXIT_OK


def cmd_genroutes(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    rg = cfg.routegen
    if args.top_k is not None:
        rg = dataclasses.replace(rg, top_k=args.top_k)
    if args.traversal is not None:
        rg = dataclasses.replace(rg, n_traversal=args.traversal)
    if args.seed is not None:
        rg = dataclasses.replace(rg, seed=args.seed)
    run = _runner(args, dataclasses.replace(cfg, routegen=rg))
    run.ensure_dataset()
    run.ensure_preprocess()
    run.ensure_pool()
    _echo(f"route pool at {run.path('routes.json')}")
    return EXIT_OK


def cmd_optimize_mo(args: argparse.Namespace) -> int:
    cfg = _override_moea(_load_cfg(args), args)
    run = _runner(args, cfg)
    run.ensure_dataset()
    run.ensure_pareto()
    _echo(f"pareto archive at {run.path('pareto.json')}")
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    if args.n is not None:
        cfg = dataclasses.replace(cfg, rating=dataclasses.replace(cfg.rating, sample_n=args.n))
    run = _runner(args, cfg)
    run.ensure_dataset()
    run.ensure_sample()
    _echo(f"rating sample at {run.path('sample.json')}")
    return EXIT_OK


def cmd_fit_weights(args: argparse.Namespace) -> int:
    if args.pareto is not None:
        records = read_ratings(Path(args.ratings))
        means = aggregate_ratings(records)
        pareto = fileio.read_json(Path(args.pareto))
        by_id = {
            n["network_id"]: ObjectiveVector.from_dict(n["objectives"])
            for n in pareto["networks"]
        }
        samples = [(by_id[nid], mean) for nid, mean in sorted(means.items()) if nid in by_id]
        fit = fit_weights(samples, args.max_rating)
        out = Path(args.out or "weights.json")
        fileio.write_json(
            out,
            {
                **fit.weights.as_dict(),
                "residual_norm": fit.residual_norm,
                "n_samples": fit.n_samples,
                "max_rating": args.max_rating,
            },
        )
        _echo(f"weights written to {out}")
        return EXIT_OK
    cfg = _load_cfg(args)
    run = _runner(args, cfg)
    run.ensure_dataset()
    run.ensure_weights()
    _echo(f"weights at {run.path('weights.json')}")
    return EXIT_OK


def cmd_optimize_so(args: argparse.Namespace) -> int:
    cfg = _override_moea(_load_cfg(args), args)
    run = _runner(args, cfg)
    run.ensure_dataset()
    run.ensure_so(args.scalarizer)
    _echo(f"single-objective result at {run.path('so_' + args.scalarizer + '.json')}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    run = _runner(args, cfg)
    run.ensure_dataset()
    path = run.ensure_report()
    _echo(f"report at {path}")
    print(str(path))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    if getattr(args, "tl_exclude_fixed", False):
        cfg = dataclasses.replace(
            cfg, evaluation=dataclasses.replace(cfg.evaluation, tl_include_fixed=False)
        )
    run = PipelineRun(cfg, Path(args.run_dir), log=_echo, mutating=False)
    run.ensure_dataset()
    run.ensure_preprocess()
    run.ensure_pool()
    ctx = run.context()
    net_obj = fileio.read_json(Path(args.network))
    bus = BusNetwork.of(net_obj["route_ids"])
    vec = ctx.objectives(bus)
    fileio.write_json(Path(args.out), {"objectives": vec.as_dict()})
    if args.trips:
        with Path(args.trips).open("w", encoding="utf-8") as f:
            for result in ctx.plan_all_trips(bus):
                f.write(json.dumps(_trip_row(result), sort_keys=True) + "\n")
    _echo(f"objectives written to {args.out}")
    return EXIT_OK


def _trip_row(result) -> dict:
    if isinstance(result, Uncovered):
        return {
            "origin": result.origin,
            "destination": result.destination,
            "covered": False,
            "reason": result.reason,
        }
    trip: Trip = result
    return {
        "origin": trip.origin,
        "destination": trip.destination,
        "covered": True,
        "t_inv_s": trip.t_inv_s,
        "t_wal_s": trip.t_wal_s,
        "t_wai_s": trip.t_wai_s,
        "generalized_cost_s": trip.generalized_cost_s,
        "transfers": trip.transfers,
        "stages": [
            {
                "kind": st.kind,
                "carrier": st.triplets[0][2],
                "duration_s": st.duration_s,
                "hops": [[u, v] for u, v, _ in st.triplets],
            }
            for st in trip.stages
        ],
    }


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import create_app

    run_dir = Path(args.run_dir) if args.run_dir else Path(args.pareto).parent
    app = create_app(
        run_dir,
        pareto_path=Path(args.pareto) if args.pareto else None,
        ratings_path=Path(args.ratings) if args.ratings else None,
        max_rating=args.max_rating,
    )
    import uvicorn

    _echo(f"serving rating API on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="transitopt",
        description="Bus network redesign: multi-objective search, rating-driven "
        "weight inference, single-objective refinement.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--out", required=True, help="run directory")

    sp = sub.add_parser("pipeline", help="run the full protocol end to end")
    common(sp)
    sp.add_argument("--skip-rating", action="store_true", help="skip rating and weight fitting")
    sp.add_argument("--uniform", action="store_true", help="use only the uniform scalarizer")
    sp.add_argument("--ratings", help="pre-collected ratings file (JSON lines)")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("synth-city", help="generate a synthetic dataset")
    common(sp)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--junctions", type=int, default=200)
    sp.add_argument("--stops", type=int, default=60)
    sp.add_argument("--grid", type=int, default=5)
    sp.set_defaults(func=cmd_synth_city)

    sp = sub.add_parser("preprocess", help="cluster stops, build walk layer and grid")
    common(sp)
    sp.add_argument("--threshold-m", type=float, default=None)
    sp.add_argument("--grid", type=int, default=None)
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("genroutes", help="build the route pool")
    common(sp)
    sp.add_argument("--top-k", type=int, default=None)
    sp.add_argument("--traversal", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_genroutes)

    sp = sub.add_parser("optimize-mo", help="approximate the Pareto front")
    common(sp)
    for flag, typ in (
        ("--seed", int),
        ("--pop", int),
        ("--iters", int),
        ("--mut", float),
        ("--cx", float),
        ("--min-routes", int),
        ("--max-routes", int),
    ):
        sp.add_argument(flag, type=typ, default=None)
    sp.set_defaults(func=cmd_optimize_mo)

    sp = sub.add_parser("sample", help="pick networks for the rating session")
    common(sp)
    sp.add_argument("--n", type=int, default=None)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("fit-weights", help="infer scalarization weights from ratings")
    sp.add_argument("--config", help="TOML run configuration")
    sp.add_argument("--out", help="run directory (or weights output with --pareto)")
    sp.add_argument("--ratings", help="ratings file")
    sp.add_argument("--pareto", help="pareto/sample JSON with rated networks")
    sp.add_argument("--max-rating", type=float, default=10.0)
    sp.set_defaults(func=cmd_fit_weights)

    sp = sub.add_parser("optimize-so", help="single-objective run under a scalarizer")
    common(sp)
    sp.add_argument("--scalarizer", choices=("weighted", "uniform"), default="weighted")
    sp.add_argument("--skip-rating", action="store_true")
    for flag, typ in (
        ("--seed", int),
        ("--pop", int),
        ("--iters", int),
        ("--mut", float),
        ("--cx", float),
        ("--min-routes", int),
        ("--max-routes", int),
    ):
        sp.add_argument(flag, type=typ, default=None)
    sp.set_defaults(func=cmd_optimize_so)

    sp = sub.add_parser("report", help="baseline vs optimized comparison bundle")
    common(sp)
    sp.add_argument("--skip-rating", action="store_true")
    sp.add_argument("--uniform", action="store_true")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("evaluate", help="evaluate one network file")
    sp.add_argument("--config", help="TOML run configuration")
    sp.add_argument("--run-dir", required=True, help="run directory with the dataset artifacts")
    sp.add_argument("--network", required=True, help="JSON with route_ids")
    sp.add_argument("--out", default="objectives.json", help="objectives output path")
    sp.add_argument("--trips", help="optional per-OD trip dump (JSON lines)")
    sp.add_argument(
        "--tl-exclude-fixed",
        action="store_true",
        help="report total length over selectable routes only",
    )
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("serve", help="serve the rating API and UI")
    sp.add_argument("--run-dir", help="pipeline run directory")
    sp.add_argument("--pareto", help="pareto.json path (run dir inferred)")
    sp.add_argument("--ratings", help="ratings output path")
    sp.add_argument("--max-rating", type=int, default=10)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.set_defaults(func=cmd_serve)

    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve" and not (args.run_dir or args.pareto):
        parser.error("serve requires --run-dir or --pareto")
    try:
        return args.func(args)
    except ConfigError as exc:
        _echo(f"config error: {exc}")
        return EXIT_CONFIG
    except (DataError, FitError, FileNotFoundError) as exc:
        _echo(f"data error: {exc}")
        return EXIT_DATA
    except InfeasiblePoolError as exc:
        _echo(f"infeasible optimization: {exc}")
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
