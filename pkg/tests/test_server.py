import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from transitopt import fileio
from transitopt.evaluation import ObjectiveVector
from transitopt.graphs import BusNetwork
from transitopt.moea import ArchiveMember, ParetoArchive, sample_by_crowding
from transitopt.server import create_app


def write_pareto(path: Path, n=9):
    networks = []
    for i in range(n):
        networks.append(
            {
                "network_id": f"n{i}",
                "route_ids": [i, i + 1],
                "route_count": 2,
                "objectives": {
                    "total_length_m": 1000.0 + 100.0 * i,
                    "unsatisfied_demand": (n - 1 - i) / (n - 1),
                    "in_vehicle_time_s": 500.0 + 10.0 * i,
                    "transfers_per_passenger": 0.1 * i,
                },
            }
        )
    fileio.write_json(path, {"manifest_hash": "t", "networks": networks})
    return networks


@pytest.fixture
def client(tmp_path):
    write_pareto(tmp_path / "pareto.json")
    app = create_app(tmp_path, max_rating=10)
    return TestClient(app)


class TestSampleEndpoint:
    def test_full_sample_in_crowding_order(self, client):
        res = client.get("/api/sample", params={"n": 9})
        assert res.status_code == 200
        body = res.json()
        assert [n["network_id"] for n in body["networks"]] == [f"n{i}" for i in range(9)]
        assert set(body["bounds"]) == {
            "total_length_m",
            "unsatisfied_demand",
            "in_vehicle_time_s",
            "transfers_per_passenger",
        }

    def test_sample_subset(self, client):
        res = client.get("/api/sample", params={"n": 3})
        ids = [n["network_id"] for n in res.json()["networks"]]
        assert ids == ["n0", "n4", "n8"]

    def test_sample_matches_moea_sampler(self, tmp_path):
        # pareto.json stores the archive in crowding order (ids fixed at write
        # time), exactly as the pipeline writes it
        archive = ParetoArchive()
        for i in range(12):
            archive.update(
                BusNetwork.of([i, i + 1]),
                ObjectiveVector(
                    1000.0 + 137.0 * ((i * 5) % 12),
                    (11 - ((i * 5) % 12)) / 11.0,
                    500.0 + 31.0 * i,
                    0.05 * ((i * 7) % 12),
                ),
            )
        from transitopt.moea import crowding_order

        ordered = crowding_order(archive.members)
        fileio.write_json(
            tmp_path / "p.json",
            {
                "networks": [
                    {
                        "network_id": f"n{i}",
                        "route_ids": m.genome.sorted_ids(),
                        "route_count": len(m.genome),
                        "objectives": m.objectives.as_dict(),
                    }
                    for i, m in enumerate(ordered)
                ]
            },
        )
        picks = sample_by_crowding(archive, 9)
        app = create_app(tmp_path, pareto_path=tmp_path / "p.json")
        res = TestClient(app).get("/api/sample", params={"n": 9})
        got = [
            (n["network_id"], tuple(sorted(n["route_ids"]))) for n in res.json()["networks"]
        ]
        want = [(nid, tuple(m.genome.sorted_ids())) for nid, m in picks]
        assert got == want

    def test_bad_n(self, client):
        assert client.get("/api/sample", params={"n": 0}).status_code == 422


class TestRatings:
    def test_rating_round_trip_mean(self, client):
        r1 = client.post(
            "/api/ratings", json={"network_id": "n0", "rater_id": "alice", "rating": 7}
        )
        assert r1.status_code == 201
        r2 = client.post(
            "/api/ratings", json={"network_id": "n0", "rater_id": "bob", "rating": 8}
        )
        assert r2.status_code == 201
        agg = client.get("/api/ratings").json()
        assert agg["networks"]["n0"] == {"mean": 7.5, "count": 2}

    def test_out_of_scale_rejected(self, client):
        res = client.post(
            "/api/ratings", json={"network_id": "n0", "rater_id": "alice", "rating": 11}
        )
        assert res.status_code == 422
        res = client.post(
            "/api/ratings", json={"network_id": "n0", "rater_id": "alice", "rating": 0}
        )
        assert res.status_code == 422

    def test_unknown_network_404(self, client):
        res = client.post(
            "/api/ratings", json={"network_id": "nope", "rater_id": "alice", "rating": 5}
        )
        assert res.status_code == 404

    def test_resubmission_idempotent(self, client):
        for rating in (4, 4, 9):
            client.post(
                "/api/ratings", json={"network_id": "n1", "rater_id": "alice", "rating": rating}
            )
        agg = client.get("/api/ratings").json()["networks"]["n1"]
        assert agg == {"mean": 9.0, "count": 1}

    def test_restart_loses_nothing(self, tmp_path):
        write_pareto(tmp_path / "pareto.json")
        app1 = create_app(tmp_path)
        TestClient(app1).post(
            "/api/ratings", json={"network_id": "n2", "rater_id": "x", "rating": 6}
        )
        app2 = create_app(tmp_path)
        agg = TestClient(app2).get("/api/ratings").json()["networks"]
        assert agg["n2"]["mean"] == 6.0
        lines = (tmp_path / "ratings.jsonl").read_text().strip().splitlines()
        assert len(lines) == 1 and json.loads(lines[0])["network_id"] == "n2"


class TestGeojson:
    def test_unknown_network(self, client):
        assert client.get("/api/network/zzz/geojson").status_code == 404

    def test_geometry_unavailable_without_graph(self, client):
        # the bare pareto-only run dir has no preprocessed graph artifacts
        assert client.get("/api/network/n0/geojson").status_code == 404

    def test_baseline_absent(self, client):
        assert client.get("/api/baseline/geojson").status_code == 404


class TestStaticUi:
    def test_built_bundle_served(self, tmp_path):
        dist = Path(__file__).resolve().parents[1] / "frontend" / "dist"
        if not dist.exists():
            pytest.skip("frontend bundle not built (run `npm run build` in frontend/)")
        write_pareto(tmp_path / "pareto.json")
        client = TestClient(create_app(tmp_path, static_dir=dist))
        res = client.get("/")
        assert res.status_code == 200
        assert "Network rating session" in res.text
        assert client.get("/assets/app.js").status_code == 200
