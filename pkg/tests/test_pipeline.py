import json
from pathlib import Path

import pytest

from transitopt import fileio
from transitopt.cli import main
from transitopt.evaluation import EvalConfig, EvalContext
from transitopt.graphs import BusNetwork
from transitopt.pipeline import (
    ConfigError,
    PipelineRun,
    RunConfig,
    auto_ratings,
    load_config,
    read_ratings,
)
from transitopt.report import compare_networks, network_geojson, travel_time_histogram
from transitopt.weightfit import WeightVector

SMALL_CFG = """
[dataset]
synth_seed = 3
synth_junctions = 80
synth_stops = 24
baseline_routes = 8
baseline_trams = 1
baseline_seed = 99

[preprocess]
grid_rows = 4
grid_cols = 4

[routegen]
top_k = 10
max_pairs = 20
n_traversal = 6
traversal_min_len_m = 2000.0
seed = 1
min_route_len_m = 800.0
max_route_len_m = 25000.0

[moea]
population_size = 16
iterations = 10
mutation_prob = 0.1
crossover_prob = 0.8
min_routes = 4
max_routes = 8
seed = 1

[so]
iterations = 10
seed = 5

[rating]
sample_n = 9
max_rating = 10
"""


@pytest.fixture(scope="session")
def small_cfg_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "cfg.toml"
    path.write_text(SMALL_CFG)
    return path


@pytest.fixture(scope="session")
def finished_run(small_cfg_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "r"
    cfg = load_config(small_cfg_file)
    run = PipelineRun(cfg, out)
    run.run()
    return run


class TestConfig:
    def test_defaults_match_protocol_constants(self):
        cfg = RunConfig()
        assert cfg.moea.population_size == 200
        assert cfg.moea.iterations == 300
        assert cfg.moea.mutation_prob == 0.1
        assert cfg.moea.crossover_prob == 0.8
        assert cfg.moea.min_routes == 200
        assert cfg.moea.max_routes == 400
        assert cfg.preprocess.grid_rows == 30
        assert cfg.preprocess.cluster_threshold_m == 100.0
        assert cfg.evaluation.walk_radius_m == 300.0
        assert cfg.evaluation.walk_speed_kmh == 5.0
        assert cfg.evaluation.metro_speed_kmh == 60.0
        assert cfg.evaluation.transfer_penalty_s == 300.0
        assert cfg.evaluation.max_transfers == 3
        assert cfg.rating.sample_n == 9
        assert cfg.rating.max_rating == 10.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[moea]\nbogus = 3\n")
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[nonsense]\nx = 1\n")
        with pytest.raises(ConfigError, match="unknown config sections"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")


class TestPipelineArtifacts:
    def test_all_artifacts_exist(self, finished_run):
        for name in (
            "manifest.json",
            "pareto.json",
            "history.csv",
            "sample.json",
            "baseline.json",
            "ratings.jsonl",
            "weights.json",
            "so_weighted.json",
            "so_uniform.json",
            "report.json",
            "baseline.geojson",
            "optimized.geojson",
        ):
            assert finished_run.path(name).exists(), name

    def test_artifacts_carry_manifest_hash(self, finished_run):
        h = finished_run.manifest.hash
        for name in ("pareto.json", "sample.json", "weights.json", "report.json"):
            assert fileio.read_json(finished_run.path(name))["manifest_hash"] == h

    def test_rerun_skips_and_keeps_bytes(self, finished_run):
        before = finished_run.path("pareto.json").read_bytes()
        run2 = PipelineRun(finished_run.cfg, finished_run.out)
        run2.run()
        assert finished_run.path("pareto.json").read_bytes() == before

    def test_sample_has_nine_networks_and_bounds(self, finished_run):
        sample = fileio.read_json(finished_run.path("sample.json"))
        assert len(sample["networks"]) <= 9
        assert len(sample["networks"]) >= 6
        assert set(sample["bounds"]) == {
            "total_length_m",
            "unsatisfied_demand",
            "in_vehicle_time_s",
            "transfers_per_passenger",
        }

    def test_weights_json_layout(self, finished_run):
        w = fileio.read_json(finished_run.path("weights.json"))
        for key in ("w0", "w1", "w2", "w3", "w4", "residual_norm", "n_samples"):
            assert key in w
        WeightVector.from_dict(w)  # parses

    def test_lineage_mismatch_refused(self, finished_run, tmp_path):
        tampered = fileio.read_json(finished_run.path("pareto.json"))
        tampered["manifest_hash"] = "bogus"
        fileio.write_json(finished_run.path("pareto.json"), tampered)
        try:
            run2 = PipelineRun(finished_run.cfg, finished_run.out)
            run2.ensure_dataset()
            with pytest.raises(fileio.DataError, match="manifest"):
                run2.load_archive()
        finally:
            tampered["manifest_hash"] = finished_run.manifest.hash
            fileio.write_json(finished_run.path("pareto.json"), tampered)

    def test_missing_upstream_names_stage(self, small_cfg_file, tmp_path):
        cfg = load_config(small_cfg_file)
        run = PipelineRun(cfg, tmp_path / "partial")
        run.ensure_dataset()
        with pytest.raises(fileio.DataError, match="optimize-mo"):
            run.load_archive()

    def test_config_change_invalidates_stale_artifacts(self, small_cfg_file, tmp_path):
        import dataclasses

        cfg = load_config(small_cfg_file)
        out = tmp_path / "both"
        run1 = PipelineRun(cfg, out)
        run1.run()
        old_pareto = run1.path("pareto.json").read_bytes()
        old_hash = run1.manifest.hash

        changed = dataclasses.replace(
            cfg, moea=dataclasses.replace(cfg.moea, seed=cfg.moea.seed + 7)
        )
        run2 = PipelineRun(changed, out)
        run2.run()
        assert run2.manifest.hash != old_hash
        new_pareto = fileio.read_json(run2.path("pareto.json"))
        assert new_pareto["manifest_hash"] == run2.manifest.hash
        assert run2.path("pareto.json").read_bytes() != old_pareto
        # ratings from the stale run were moved aside, not silently reused
        stale = list(out.glob("ratings.stale-*.jsonl"))
        assert len(stale) == 1 and stale[0].name.startswith(
            f"ratings.stale-{old_hash[:8]}"
        )
        assert fileio.read_json(run2.path("weights.json"))["manifest_hash"] == run2.manifest.hash

    def test_skip_rating_uniform_path(self, small_cfg_file, tmp_path):
        cfg = load_config(small_cfg_file)
        run = PipelineRun(cfg, tmp_path / "uni", skip_rating=True, uniform_only=True)
        report_path = run.run()
        report = fileio.read_json(report_path)
        assert report["scalarizer"] == "uniform"
        assert not run.path("weights.json").exists()

    def test_auto_ratings_are_valid_and_deterministic(self, finished_run):
        records = read_ratings(finished_run.path("ratings.jsonl"))
        assert records
        for rec in records:
            rec.validate(10.0)
        sample = fileio.read_json(finished_run.path("sample.json"))
        from transitopt.evaluation import OBJECTIVE_NAMES, ObjectiveVector

        bounds = [
            (sample["bounds"][n]["min"], sample["bounds"][n]["max"]) for n in OBJECTIVE_NAMES
        ]
        again = auto_ratings(
            [
                (n["network_id"], ObjectiveVector.from_dict(n["objectives"]))
                for n in sample["networks"]
            ],
            bounds,
            10.0,
        )
        assert [(r.network_id, r.rater_id, r.rating) for r in again] == [
            (r.network_id, r.rater_id, r.rating) for r in records
        ]


class TestReport:
    def test_identical_networks_zero_deltas(self, finished_run):
        ctx = finished_run.context()
        base = finished_run.baseline_network()
        report = compare_networks(base, base, ctx)
        assert report["travel_time_histogram_min"] == []
        assert report["transfer_histogram"] == []
        for v in report["objective_deltas_pct"].values():
            assert v == 0.0

    def test_dropping_coverage_moves_ud_by_demand_share(self, finished_run):
        ctx = finished_run.context()
        so = fileio.read_json(finished_run.path("so_uniform.json"))
        opt = BusNetwork.of(so["route_ids"])
        results = ctx.od_results(opt)
        covered = [(s, t) for (s, t), r in results.items() if r is not None]
        assert covered
        base_vec = ctx.objectives(opt)
        # removing one covered pair from demand raises coverage share; the UD
        # delta equals that pair's demand share
        s0, t0 = covered[0]
        q0 = dict(((s, t), q) for s, t, q in ctx.demand.pairs())[(s0, t0)]
        from transitopt.preprocess import DemandMatrix

        demand2 = DemandMatrix(
            [(s, t, q) for s, t, q in ctx.demand.pairs() if (s, t) != (s0, t0)]
        )
        ctx2 = EvalContext(
            ctx.road, ctx.pool, ctx.metro, ctx.walk, ctx.grid, demand2, ctx.config
        )
        vec2 = ctx2.objectives(opt)
        total = ctx.total_demand
        covered_q = (1.0 - base_vec.unsatisfied_demand) * total
        expected_ud = 1.0 - (covered_q - q0) / (total - q0)
        assert vec2.unsatisfied_demand == pytest.approx(expected_ud, abs=1e-9)

    def test_histogram_mass_matches_oracle_recount(self, finished_run):
        ctx = finished_run.context()
        base = finished_run.baseline_network()
        so = fileio.read_json(finished_run.path("so_weighted.json"))
        opt = BusNetwork.of(so["route_ids"])
        base_od = ctx.od_results(base)
        opt_od = ctx.od_results(opt)
        pairs = ctx.od_pairs()
        bars = travel_time_histogram(base_od, opt_od, pairs)
        mass = sum(b.pairs for b in bars)
        # oracle: independent re-evaluation pass counting |dt| > 2.5 min
        count = 0
        for s, t, q in pairs:
            rb, ro = base_od.get((s, t)), opt_od.get((s, t))
            if rb is None or ro is None:
                continue
            dt_min = abs(ro.total_time_s - rb.total_time_s) / 60.0
            if dt_min > 2.5:
                count += 1
        assert mass == count

    def test_geojson_features(self, finished_run):
        ctx = finished_run.context()
        base = finished_run.baseline_network()
        geo = network_geojson(base, ctx, "baseline")
        assert geo["type"] == "FeatureCollection"
        assert len(geo["features"]) == len(base) + len(ctx.pool.fixed_ids())
        for f in geo["features"]:
            assert f["geometry"]["type"] == "LineString"
            assert len(f["geometry"]["coordinates"]) >= 2

    def test_report_scalar_section(self, finished_run):
        report = fileio.read_json(finished_run.path("report.json"))
        assert report["scalarizer"] == "weighted"
        sv = report["scalar_values"]
        assert sv["optimized"] <= sv["best_archive_member"] + 1e-9


class TestCli:
    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[moea]\nbogus = 1\n")
        assert main(["pipeline", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_data_error_exit_code(self, small_cfg_file, tmp_path):
        cfg_text = small_cfg_file.read_text().replace(
            "[dataset]\nsynth_seed = 3",
            f"[dataset]\ndir = \"{tmp_path / 'nowhere'}\"\nsynth_seed = 3",
        )
        bad = tmp_path / "ext.toml"
        bad.write_text(cfg_text)
        assert main(["pipeline", "--config", str(bad), "--out", str(tmp_path / "o")]) == 3

    def test_infeasible_pool_exit_code(self, small_cfg_file, tmp_path):
        text = small_cfg_file.read_text().replace("min_routes = 4", "min_routes = 400")
        text = text.replace("max_routes = 8", "max_routes = 500")
        cfg = tmp_path / "inf.toml"
        cfg.write_text(text)
        assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4

    def test_evaluate_command_with_trips(self, small_cfg_file, finished_run, tmp_path):
        out_obj = tmp_path / "objectives.json"
        trips = tmp_path / "trips.jsonl"
        code = main(
            [
                "evaluate",
                "--config",
                str(small_cfg_file),
                "--run-dir",
                str(finished_run.out),
                "--network",
                str(finished_run.path("baseline.json")),
                "--out",
                str(out_obj),
                "--trips",
                str(trips),
            ]
        )
        assert code == 0
        objectives = fileio.read_json(out_obj)["objectives"]
        baseline = fileio.read_json(finished_run.path("baseline.json"))["objectives"]
        assert objectives == baseline
        rows = [json.loads(line) for line in trips.read_text().splitlines()]
        assert rows and any(r["covered"] for r in rows)
        covered = [r for r in rows if r["covered"]]
        for r in covered[:5]:
            assert r["t_inv_s"] >= 0 and "stages" in r

    def test_evaluate_is_non_mutating_under_config_overrides(
        self, small_cfg_file, finished_run, tmp_path
    ):
        # an analysis flag changes the config snapshot; the run directory and
        # its manifest must survive untouched
        manifest_before = finished_run.path("manifest.json").read_bytes()
        out_obj = tmp_path / "obj.json"
        code = main(
            [
                "evaluate",
                "--config",
                str(small_cfg_file),
                "--run-dir",
                str(finished_run.out),
                "--network",
                str(finished_run.path("baseline.json")),
                "--out",
                str(out_obj),
                "--tl-exclude-fixed",
            ]
        )
        assert code == 0
        assert finished_run.path("manifest.json").read_bytes() == manifest_before
        assert finished_run.path("pareto.json").exists()
        base_tl = fileio.read_json(finished_run.path("baseline.json"))["objectives"][
            "total_length_m"
        ]
        excl_tl = fileio.read_json(out_obj)["objectives"]["total_length_m"]
        assert excl_tl < base_tl  # fixed tram length removed

    def test_preprocess_command(self, small_cfg_file, tmp_path):
        out = tmp_path / "pp"
        assert (
            main(["preprocess", "--config", str(small_cfg_file), "--out", str(out)]) == 0
        )
        assert (out / "preprocessed" / "cluster_map.json").exists()
        assert (out / "preprocessed" / "walk.json").exists()
