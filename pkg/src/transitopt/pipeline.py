"""End-to-end pipeline: preprocess -> genroutes -> optimize-mo -> sample ->
(rate) -> fit-weights -> optimize-so -> report, staged over a run directory
with a manifest tying every artifact to the configuration that produced it."""

from __future__ import annotations

import datetime as _dt
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import fileio
from .evaluation import OBJECTIVE_NAMES, EvalConfig, EvalContext, ObjectiveVector
from .fileio import DataError, canonical_json, read_json, write_json
from .graphs import BusNetwork, MetroNetwork, Route, RouteKind, build_walk_network
from .moea import (
    ArchiveMember,
    GAConfig,
    ParetoArchive,
    crowding_order,
    run_classic_ga,
    run_nsga2,
    sample_by_crowding,
)
from .preprocess import build_grid, cluster_stops, remap_route_stops, synth_city
from .report import compare_networks, network_geojson
from .routegen import (
    RouteLengthBounds,
    build_pool,
    gen_baseline,
    gen_hub_connectors,
    gen_traversal,
    stop_busyness,
)
from .weightfit import (
    RatingRecord,
    WeightVector,
    aggregate_ratings,
    fit_weights,
    objective_bounds,
    scalarize_uniform,
    scalarize_weighted,
)


class ConfigError(ValueError):
    """Invalid or missing configuration."""


class StageDependencyError(DataError):
    def __init__(self, missing: Path, producer: str):
        self.producer = producer
        super().__init__(
            f"missing artifact {missing.name}: run stage '{producer}' first"
        )


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class DatasetConfig:
    dir: Optional[str] = None
    synth_seed: int = 7
    synth_junctions: int = 200
    synth_stops: int = 60
    baseline_routes: int = 12
    baseline_trams: int = 2
    baseline_seed: int = 99

    @property
    def synthetic(self) -> bool:
        return self.dir is None


@dataclass(frozen=True)
class PreprocessConfig:
    cluster_threshold_m: float = 100.0
    grid_rows: int = 30
    grid_cols: int = 30


@dataclass(frozen=True)
class RoutegenConfig:
    top_k: int = 40
    max_pairs: int = 60
    n_traversal: int = 50
    traversal_min_len_m: float = 3000.0
    seed: int = 1
    min_route_len_m: float = 1000.0
    max_route_len_m: float = 30000.0


@dataclass(frozen=True)
class EvalSettings:
    transfer_penalty_s: float = 300.0
    max_transfers: int = 3
    walk_radius_m: float = 300.0
    walk_speed_kmh: float = 5.0
    metro_speed_kmh: float = 60.0
    tl_include_fixed: bool = True


@dataclass(frozen=True)
class RatingSettings:
    sample_n: int = 9
    max_rating: float = 10.0
    n_raters: int = 4


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig = DatasetConfig()
    preprocess: PreprocessConfig = PreprocessConfig()
    routegen: RoutegenConfig = RoutegenConfig()
    evaluation: EvalSettings = EvalSettings()
    rating: RatingSettings = RatingSettings()
    moea: GAConfig = GAConfig()
    so_iterations: int = 300
    so_seed: int = 2

    def snapshot(self) -> dict:
        return {
            "dataset": asdict(self.dataset),
            "preprocess": asdict(self.preprocess),
            "routegen": asdict(self.routegen),
            "evaluation": asdict(self.evaluation),
            "rating": asdict(self.rating),
            "moea": asdict(self.moea),
            "so_iterations": self.so_iterations,
            "so_seed": self.so_seed,
        }


_SECTIONS: dict[str, type] = {
    "dataset": DatasetConfig,
    "preprocess": PreprocessConfig,
    "routegen": RoutegenConfig,
    "evaluation": EvalSettings,
    "rating": RatingSettings,
    "moea": GAConfig,
}


def load_config(path: Path) -> RunConfig:
    """Parse the TOML run configuration; unknown sections or keys are errors."""
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    kwargs: dict = {}
    top = dict(raw)
    so = top.pop("so", {})
    for section, cls in _SECTIONS.items():
        data = top.pop(section, {})
        if not isinstance(data, dict):
            raise ConfigError(f"section [{section}] must be a table")
        valid = set(cls.__dataclass_fields__)
        unknown = set(data) - valid
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        try:
            kwargs[section if section != "preprocess" else "preprocess"] = cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [{section}] config: {exc}") from exc
    if top:
        raise ConfigError(f"unknown config sections: {sorted(top)}")
    moea = kwargs.pop("moea")
    cfg = RunConfig(
        dataset=kwargs["dataset"],
        preprocess=kwargs["preprocess"],
        routegen=kwargs["routegen"],
        evaluation=kwargs["evaluation"],
        rating=kwargs["rating"],
        moea=moea,
        so_iterations=int(so.get("iterations", moea.iterations)),
        so_seed=int(so.get("seed", moea.seed + 1)),
    )
    if cfg.dataset.synthetic and cfg.preprocess.grid_rows != cfg.preprocess.grid_cols:
        raise ConfigError("synthetic datasets require a square grid (grid_rows == grid_cols)")
    return cfg


# -- manifest -------------------------------------------------------------------


@dataclass
class RunManifest:
    config_snapshot: dict
    dataset_hashes: dict[str, str] = field(default_factory=dict)
    created_at: str = ""
    stages: dict[str, dict] = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return fileio.sha256_text(
            canonical_json({"config": self.config_snapshot, "dataset": self.dataset_hashes})
        )

    def to_dict(self) -> dict:
        return {
            "manifest_hash": self.hash,
            "config": self.config_snapshot,
            "dataset_hashes": self.dataset_hashes,
            "created_at": self.created_at,
            "stages": self.stages,
        }

    def record_stage(self, name: str, outputs: dict[str, str]) -> None:
        self.stages[name] = {
            "completed_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "outputs": outputs,
        }


DATASET_FILES = ("nodes.csv", "edges.csv", "metro.json", "demand.csv", "routes.json")


def require_artifact(path: Path, producer: str) -> Path:
    if not path.exists():
        raise StageDependencyError(path, producer)
    return path


def check_lineage(obj: dict, expected_hash: str, name: str) -> None:
    found = obj.get("manifest_hash")
    if found != expected_hash:
        raise DataError(
            f"{name} was produced under manifest {found!r}, current manifest is "
            f"{expected_hash!r}; rerun the upstream stages"
        )


# -- scripted rating stand-in ----------------------------------------------------


def auto_ratings(
    samples: list[tuple[str, ObjectiveVector]],
    bounds,
    max_rating: float,
    n_raters: int = 4,
) -> list[RatingRecord]:
    """Deterministic simulated rating session: raters score each sampled
    network by its uniform-normalized objective sum, mapped onto the rating
    scale with small per-rater offsets and rounded to integers. Desk-scale
    stand-in for the human session behind `serve`."""
    offsets = [(-0.6 + 1.2 * j / max(n_raters - 1, 1)) for j in range(n_raters)]
    records: list[RatingRecord] = []
    for network_id, vec in samples:
        score = scalarize_uniform(vec, bounds)  # 0 (best) .. len(bounds) (worst)
        quality = 1.0 - score / max(len(bounds), 1)
        target = 1.0 + (max_rating - 1.0) * quality
        for j, off in enumerate(offsets):
            r = min(max(round(target + off), 1), int(max_rating))
            records.append(RatingRecord(network_id, f"sim{j}", float(r)))
    return records


# -- pipeline -------------------------------------------------------------------


class PipelineRun:
    """Stage runner over an output directory; finished stages are skipped when
    their artifacts exist under the same manifest hash."""

    def __init__(
        self,
        cfg: RunConfig,
        out_dir: Path,
        skip_rating: bool = False,
        uniform_only: bool = False,
        ratings_file: Optional[Path] = None,
        log: Callable[[str], None] = lambda s: None,
        mutating: bool = True,
    ):
        if uniform_only:
            skip_rating = True
        self.cfg = cfg
        self.out = Path(out_dir)
        self.skip_rating = skip_rating
        self.uniform_only = uniform_only
        self.ratings_file = ratings_file
        self.log = log
        # analysis commands open a run read-only: existing artifacts are used
        # as found and never discarded, and manifest.json is left untouched
        self.mutating = mutating
        self.data_dir = self.out / "dataset"
        self.prep_dir = self.out / "preprocessed"
        self.manifest: Optional[RunManifest] = None
        self._ctx: Optional[EvalContext] = None

    # paths -------------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.out / name

    def _require_manifest(self) -> RunManifest:
        if self.manifest is None:
            self.ensure_dataset()
        return self.manifest

    # dataset -------------------------------------------------------------

    def ensure_dataset(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        self.data_dir.mkdir(exist_ok=True)
        for _attempt in range(2):
            self._sync_dataset_files()
            hashes = {n: fileio.sha256_file(self.data_dir / n) for n in DATASET_FILES}
            if (self.data_dir / "walk.json").exists():
                hashes["walk.json"] = fileio.sha256_file(self.data_dir / "walk.json")
            self.manifest = RunManifest(
                config_snapshot=self.cfg.snapshot(),
                dataset_hashes=hashes,
                created_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
            )
            stored = self.path("manifest.json")
            if _attempt == 0 and stored.exists() and self.mutating:
                old_hash = read_json(stored).get("manifest_hash")
                if old_hash != self.manifest.hash:
                    self.log(
                        "configuration changed since the last run; discarding "
                        "derived artifacts"
                    )
                    self._invalidate_derived(str(old_hash))
                    continue
            break

    def _sync_dataset_files(self) -> None:
        cfg = self.cfg.dataset
        if cfg.synthetic:
            if any(not (self.data_dir / n).exists() for n in DATASET_FILES):
                self.log("stage dataset: generating synthetic city")
                self._generate_synthetic()
            return
        src = Path(cfg.dir)
        for name in DATASET_FILES + ("walk.json",):
            src_file = src / name
            dst = self.data_dir / name
            if not src_file.exists():
                if name == "walk.json":
                    continue
                raise DataError(f"dataset file {src_file} not found")
            if not dst.exists() or fileio.sha256_file(dst) != fileio.sha256_file(src_file):
                dst.write_bytes(src_file.read_bytes())

    def _invalidate_derived(self, old_hash: str = "old") -> None:
        """Drop everything derived from a previous configuration. Collected
        ratings are renamed aside, never deleted: their network ids reference
        the stale archive and must not be joined against a fresh sample."""
        if self.cfg.dataset.synthetic:
            for name in DATASET_FILES + ("walk.json",):
                (self.data_dir / name).unlink(missing_ok=True)
        for name in (
            "nodes.csv",
            "edges.csv",
            "cluster_map.json",
            "routes.json",
            "walk.json",
        ):
            (self.prep_dir / name).unlink(missing_ok=True)
        for name in (
            "routes.json",
            "pareto.json",
            "history.csv",
            "sample.json",
            "baseline.json",
            "weights.json",
            "so_weighted.json",
            "so_uniform.json",
            "so_weighted_history.csv",
            "so_uniform_history.csv",
            "report.json",
            "baseline.geojson",
            "optimized.geojson",
            "manifest.json",
        ):
            self.path(name).unlink(missing_ok=True)
        ratings = self.path("ratings.jsonl")
        if ratings.exists():
            ratings.rename(self.path(f"ratings.stale-{old_hash[:8]}.jsonl"))

    def _generate_synthetic(self) -> None:
        cfg = self.cfg.dataset
        road, metro, demand = synth_city(
            cfg.synth_seed,
            cfg.synth_junctions,
            cfg.synth_stops,
            self.cfg.preprocess.grid_rows,
        )
        grid = build_grid(
            road, self.cfg.preprocess.grid_rows, self.cfg.preprocess.grid_cols, metro
        )
        bounds = self._bounds()
        baseline, _ = gen_baseline(
            road, demand, grid, cfg.baseline_routes, cfg.baseline_seed, bounds
        )
        routes: list[Route] = []
        for i, r in enumerate(baseline):
            kind = RouteKind.TRAM_FIXED if i < cfg.baseline_trams else RouteKind.ORIGINAL
            routes.append(replace(r, kind=kind))
        fileio.write_road_graph(road, self.data_dir / "nodes.csv", self.data_dir / "edges.csv")
        fileio.write_metro(metro, self.data_dir / "metro.json")
        fileio.write_demand(demand, self.data_dir / "demand.csv")
        fileio.write_routes(routes, self.data_dir / "routes.json")

    def _bounds(self) -> RouteLengthBounds:
        return RouteLengthBounds(
            self.cfg.routegen.min_route_len_m, self.cfg.routegen.max_route_len_m
        )

    # preprocess ----------------------------------------------------------

    def ensure_preprocess(self) -> None:
        self._require_manifest()
        self.prep_dir.mkdir(exist_ok=True)
        outputs = [
            self.prep_dir / "nodes.csv",
            self.prep_dir / "edges.csv",
            self.prep_dir / "cluster_map.json",
            self.prep_dir / "routes.json",
            self.prep_dir / "walk.json",
        ]
        if all(p.exists() for p in outputs):
            return
        self.log("stage preprocess: clustering stops and building walk layer")
        road = fileio.read_road_graph(self.data_dir / "nodes.csv", self.data_dir / "edges.csv")
        metro = fileio.read_metro(self.data_dir / "metro.json")
        clustered, cmap = cluster_stops(road, self.cfg.preprocess.cluster_threshold_m)
        fileio.write_road_graph(
            clustered, self.prep_dir / "nodes.csv", self.prep_dir / "edges.csv"
        )
        fileio.write_cluster_map(cmap, self.prep_dir / "cluster_map.json")

        raw_routes = fileio.read_routes(self.data_dir / "routes.json", road=road)
        remapped: list[Route] = []
        for r in raw_routes:
            stops = remap_route_stops(r.stops, cmap)
            if len(stops) < 2:
                continue
            from .graphs import make_route

            remapped.append(make_route(r.route_id, r.kind, stops, clustered))
        fileio.write_routes(remapped, self.prep_dir / "routes.json")

        walk_src = self.data_dir / "walk.json"
        if walk_src.exists() and cmap.is_identity:
            (self.prep_dir / "walk.json").write_bytes(walk_src.read_bytes())
        else:
            walk = build_walk_network(
                clustered,
                metro,
                self.cfg.evaluation.walk_radius_m,
                self.cfg.evaluation.walk_speed_kmh,
            )
            fileio.write_walk(walk, self.prep_dir / "walk.json")
        self.manifest.record_stage(
            "preprocess", {p.name: fileio.sha256_file(p) for p in outputs}
        )
        self._write_manifest()

    # route pool ----------------------------------------------------------

    def ensure_pool(self) -> None:
        self._require_manifest()
        pool_path = self.path("routes.json")
        if pool_path.exists():
            return
        self.log("stage genroutes: building the route pool")
        road = self._road()
        metro = self._metro()
        demand = fileio.read_demand(self.data_dir / "demand.csv")
        grid = build_grid(road, self.cfg.preprocess.grid_rows, self.cfg.preprocess.grid_cols, metro)
        originals = fileio.read_routes(
            require_artifact(self.prep_dir / "routes.json", "preprocess"), road=road
        )
        bounds = self._bounds()
        next_id = max((r.route_id for r in originals), default=-1) + 1
        hubs, _ = gen_hub_connectors(
            road,
            demand,
            grid,
            self.cfg.routegen.top_k,
            self.cfg.routegen.max_pairs,
            bounds,
            start_id=next_id,
        )
        next_id += len(hubs)
        traversals, _ = gen_traversal(
            road,
            self.cfg.routegen.n_traversal,
            self.cfg.routegen.traversal_min_len_m,
            self.cfg.routegen.seed,
            bounds,
            start_id=next_id,
        )
        all_routes = originals + hubs + traversals
        busy = stop_busyness(road, demand, grid)
        pool = build_pool(all_routes, bounds, busyness=busy)
        fileio.write_routes(pool.routes.values(), pool_path)
        self.manifest.record_stage("genroutes", {"routes.json": fileio.sha256_file(pool_path)})
        self._write_manifest()

    # shared loaders -------------------------------------------------------

    def _road(self):
        return fileio.read_road_graph(
            require_artifact(self.prep_dir / "nodes.csv", "preprocess"),
            self.prep_dir / "edges.csv",
        )

    def _metro(self) -> MetroNetwork:
        return fileio.read_metro(require_artifact(self.data_dir / "metro.json", "dataset"))

    def context(self) -> EvalContext:
        if self._ctx is not None:
            return self._ctx
        road = self._road()
        metro = self._metro()
        walk = fileio.read_walk(require_artifact(self.prep_dir / "walk.json", "preprocess"))
        demand = fileio.read_demand(require_artifact(self.data_dir / "demand.csv", "dataset"))
        grid = build_grid(road, self.cfg.preprocess.grid_rows, self.cfg.preprocess.grid_cols, metro)
        routes = fileio.read_routes(require_artifact(self.path("routes.json"), "genroutes"), road=road)
        pool = build_pool(routes, self._bounds())
        ev = self.cfg.evaluation
        self._ctx = EvalContext(
            road,
            pool,
            metro,
            walk,
            grid,
            demand,
            EvalConfig(
                transfer_penalty_s=ev.transfer_penalty_s,
                max_transfers=ev.max_transfers,
                walk_speed_kmh=ev.walk_speed_kmh,
                tl_include_fixed=ev.tl_include_fixed,
            ),
        )
        return self._ctx

    def baseline_network(self) -> BusNetwork:
        ctx = self.context()
        return BusNetwork.of(
            rid
            for rid, r in ctx.pool.routes.items()
            if r.kind is RouteKind.ORIGINAL
        )

    # optimize-mo -----------------------------------------------------------

    def ensure_pareto(self) -> None:
        self._require_manifest()
        path = self.path("pareto.json")
        if path.exists():
            obj = read_json(path)
            if obj.get("manifest_hash") == self.manifest.hash:
                return
        self.log("stage optimize-mo: running the multi-objective search")
        ctx = self.context()
        archive, history = run_nsga2(self.cfg.moea, ctx)
        ordered = crowding_order(archive.members)
        obj = {
            "manifest_hash": self.manifest.hash,
            "networks": [
                {
                    "network_id": f"n{i}",
                    "route_ids": m.genome.sorted_ids(),
                    "route_count": len(m.genome),
                    "objectives": m.objectives.as_dict(),
                }
                for i, m in enumerate(ordered)
            ],
        }
        write_json(path, obj)
        hist_path = self.path("history.csv")
        with hist_path.open("w", encoding="utf-8") as f:
            f.write("iteration,archive_size,best_total_length_m,best_unsatisfied_demand,"
                    "best_in_vehicle_time_s,best_transfers_per_passenger\n")
            for row in history:
                f.write(
                    f"{row.iteration},{row.archive_size},"
                    + ",".join(repr(v) for v in row.best)
                    + "\n"
                )
        self.manifest.record_stage(
            "optimize-mo",
            {p.name: fileio.sha256_file(p) for p in (path, hist_path)},
        )
        self._write_manifest()

    def load_archive(self) -> list[ArchiveMember]:
        self._require_manifest()
        obj = read_json(require_artifact(self.path("pareto.json"), "optimize-mo"))
        check_lineage(obj, self.manifest.hash, "pareto.json")
        return [
            ArchiveMember(
                genome=BusNetwork.of(n["route_ids"]),
                objectives=ObjectiveVector.from_dict(n["objectives"]),
            )
            for n in obj["networks"]
        ]

    # sample ------------------------------------------------------------------

    def ensure_sample(self) -> None:
        self._require_manifest()
        path = self.path("sample.json")
        base_path = self.path("baseline.json")
        if path.exists() and base_path.exists():
            obj = read_json(path)
            if obj.get("manifest_hash") == self.manifest.hash:
                return
        self.log("stage sample: picking networks for rating")
        members = self.load_archive()
        archive = ParetoArchive()
        for m in members:
            archive.update(m.genome, m.objectives)
        picks = sample_by_crowding(archive, self.cfg.rating.sample_n)
        bounds = objective_bounds([m.objectives for m in members])
        obj = {
            "manifest_hash": self.manifest.hash,
            "bounds": {
                name: {"min": lo, "max": hi}
                for name, (lo, hi) in zip(OBJECTIVE_NAMES, bounds)
            },
            "networks": [
                {
                    "network_id": nid,
                    "route_ids": m.genome.sorted_ids(),
                    "route_count": len(m.genome),
                    "objectives": m.objectives.as_dict(),
                }
                for nid, m in picks
            ],
        }
        write_json(path, obj)

        ctx = self.context()
        baseline = self.baseline_network()
        write_json(
            base_path,
            {
                "manifest_hash": self.manifest.hash,
                "route_ids": baseline.sorted_ids(),
                "route_count": len(baseline),
                "objectives": ctx.objectives(baseline).as_dict(),
            },
        )
        self.manifest.record_stage(
            "sample", {p.name: fileio.sha256_file(p) for p in (path, base_path)}
        )
        self._write_manifest()

    # ratings -------------------------------------------------------------------

    def ensure_ratings(self) -> Optional[Path]:
        self._require_manifest()
        if self.skip_rating:
            return None
        path = self.path("ratings.jsonl")
        if self.ratings_file is not None:
            if not self.ratings_file.exists():
                raise DataError(f"ratings file {self.ratings_file} not found")
            if path.resolve() != self.ratings_file.resolve():
                path.write_bytes(self.ratings_file.read_bytes())
            return path
        if path.exists():
            return path
        self.log("stage rate: no collected ratings; simulating the rating session")
        sample = read_json(require_artifact(self.path("sample.json"), "sample"))
        check_lineage(sample, self.manifest.hash, "sample.json")
        bounds = [
            (sample["bounds"][name]["min"], sample["bounds"][name]["max"])
            for name in OBJECTIVE_NAMES
        ]
        samples = [
            (n["network_id"], ObjectiveVector.from_dict(n["objectives"]))
            for n in sample["networks"]
        ]
        records = auto_ratings(
            samples, bounds, self.cfg.rating.max_rating, self.cfg.rating.n_raters
        )
        with path.open("w", encoding="utf-8") as f:
            for rec in records:
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
        return path

    # fit-weights ------------------------------------------------------------------

    def ensure_weights(self) -> Optional[WeightVector]:
        self._require_manifest()
        if self.skip_rating:
            return None
        path = self.path("weights.json")
        if path.exists():
            obj = read_json(path)
            if obj.get("manifest_hash") == self.manifest.hash:
                return WeightVector.from_dict(obj)
        ratings_path = self.ensure_ratings()
        self.log("stage fit-weights: regressing ratings onto objectives")
        sample = read_json(require_artifact(self.path("sample.json"), "sample"))
        check_lineage(sample, self.manifest.hash, "sample.json")
        records = read_ratings(ratings_path)
        means = aggregate_ratings(records)
        by_id = {n["network_id"]: ObjectiveVector.from_dict(n["objectives"]) for n in sample["networks"]}
        samples = [
            (by_id[nid], mean) for nid, mean in sorted(means.items()) if nid in by_id
        ]
        fit = fit_weights(samples, self.cfg.rating.max_rating)
        obj = {
            "manifest_hash": self.manifest.hash,
            **fit.weights.as_dict(),
            "residual_norm": fit.residual_norm,
            "n_samples": fit.n_samples,
            "max_rating": self.cfg.rating.max_rating,
        }
        write_json(path, obj)
        self.manifest.record_stage("fit-weights", {"weights.json": fileio.sha256_file(path)})
        self._write_manifest()
        return fit.weights

    # optimize-so ---------------------------------------------------------------------

    def ensure_so(self, kind: str) -> dict:
        """kind: 'weighted' (fitted weights) or 'uniform' (min-max normalized sum)."""
        self._require_manifest()
        path = self.path(f"so_{kind}.json")
        if path.exists():
            obj = read_json(path)
            if obj.get("manifest_hash") == self.manifest.hash:
                return obj
        ctx = self.context()
        members = self.load_archive()
        if kind == "weighted":
            weights = self.ensure_weights()
            if weights is None:
                raise ConfigError("weighted optimization requires ratings (or drop --skip-rating)")
            scalarizer = lambda v: scalarize_weighted(v, weights)  # noqa: E731
            extra = {"weights": weights.as_dict()}
        elif kind == "uniform":
            bounds = objective_bounds([m.objectives for m in members])
            scalarizer = lambda v: scalarize_uniform(v, bounds)  # noqa: E731
            extra = {"bounds": [[lo, hi] for lo, hi in bounds]}
        else:
            raise ValueError(f"unknown scalarizer kind {kind!r}")
        self.log(f"stage optimize-so ({kind}): running the single-objective search")
        cfg = replace(
            self.cfg.moea,
            iterations=self.so_iterations(),
            seed=self.cfg.so_seed if kind == "weighted" else self.cfg.so_seed + 1,
        )
        best, history = run_classic_ga(cfg, scalarizer, ctx)
        obj = {
            "manifest_hash": self.manifest.hash,
            "scalarizer": kind,
            "route_ids": best.genome.sorted_ids(),
            "route_count": len(best.genome),
            "objectives": best.objectives.as_dict(),
            "scalar_value": best.fitness,
            "best_archive_scalar": min(scalarizer(m.objectives) for m in members),
            **extra,
        }
        write_json(path, obj)
        hist_path = self.path(f"so_{kind}_history.csv")
        with hist_path.open("w", encoding="utf-8") as f:
            f.write("iteration,best,mean\n")
            for row in history:
                f.write(f"{row.iteration},{repr(row.best)},{repr(row.mean)}\n")
        self.manifest.record_stage(
            f"optimize-so-{kind}",
            {p.name: fileio.sha256_file(p) for p in (path, hist_path)},
        )
        self._write_manifest()
        return obj

    def so_iterations(self) -> int:
        return self.cfg.so_iterations

    # report --------------------------------------------------------------------------

    def ensure_report(self) -> Path:
        self._require_manifest()
        path = self.path("report.json")
        if path.exists():
            obj = read_json(path)
            if obj.get("manifest_hash") == self.manifest.hash:
                return path
        self.log("stage report: comparing baseline and optimized networks")
        ctx = self.context()
        base_obj = read_json(require_artifact(self.path("baseline.json"), "sample"))
        check_lineage(base_obj, self.manifest.hash, "baseline.json")
        baseline = BusNetwork.of(base_obj["route_ids"])

        kind = "uniform" if self.skip_rating else "weighted"
        so = read_json(require_artifact(self.path(f"so_{kind}.json"), "optimize-so"))
        check_lineage(so, self.manifest.hash, f"so_{kind}.json")
        optimized = BusNetwork.of(so["route_ids"])

        report = compare_networks(baseline, optimized, ctx)
        report["manifest_hash"] = self.manifest.hash
        report["scalarizer"] = kind
        report["scalar_values"] = {
            "optimized": so["scalar_value"],
            "best_archive_member": so["best_archive_scalar"],
        }
        write_json(path, report)

        base_geo = network_geojson(baseline, ctx, "baseline")
        opt_geo = network_geojson(optimized, ctx, "optimized")
        write_json(self.path("baseline.geojson"), base_geo)
        write_json(self.path("optimized.geojson"), opt_geo)
        self.manifest.record_stage("report", {"report.json": fileio.sha256_file(path)})
        self._write_manifest()
        return path

    # orchestration ---------------------------------------------------------------------

    def run(self) -> Path:
        self.ensure_dataset()
        self.ensure_preprocess()
        self.ensure_pool()
        self.ensure_pareto()
        self.ensure_sample()
        if not self.skip_rating:
            self.ensure_weights()
            self.ensure_so("weighted")
        self.ensure_so("uniform")
        report = self.ensure_report()
        self._write_manifest()
        return report

    def _write_manifest(self) -> None:
        if self.mutating:
            write_json(self.path("manifest.json"), self.manifest.to_dict())


def read_ratings(path: Path) -> list[RatingRecord]:
    """Ratings as JSON lines, a JSON array, or an object with a 'ratings' key."""
    text = path.read_text(encoding="utf-8").strip()
    records: list[RatingRecord] = []
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError:
        parsed = None
    if isinstance(parsed, list):
        rows = parsed
    elif isinstance(parsed, dict) and "ratings" in parsed:
        rows = parsed["ratings"]
    elif isinstance(parsed, dict):
        rows = [parsed]
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    for row in rows:
        records.append(
            RatingRecord(
                network_id=str(row["network_id"]),
                rater_id=str(row["rater_id"]),
                rating=float(row["rating"]),
            )
        )
    return records
