import json

import jsonschema
import pytest
from fastapi.testclient import TestClient

from ossa import schemas, service
from ossa import corpus

client = TestClient(service.app)


def space_payload(space) -> dict:
    return json.loads(schemas.SpaceFile.from_space(space).model_dump_json())


def small_config(**over) -> dict:
    cfg = {"max_level": 1, "samples": 40}
    cfg.update(over)
    return cfg


def test_healthz_and_schema():
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"
    r = client.get("/schema/report")
    assert r.status_code == 200
    assert r.json()["title"] == "Report"


def test_check_endpoint_intro():
    req = {"space": space_payload(corpus.intro_space(0.5)),
           "questions": ["embedding"], "config": small_config()}
    r = client.post("/check", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["exit_code"] == 1
    verdict = body["verdicts"][0]
    assert verdict["question"] == "embedding"
    assert verdict["status"] == "fail"
    assert verdict["gap"] == pytest.approx(0.5, abs=5e-4)
    assert verdict["witness_coords"] is not None


def test_check_endpoint_pass_certified():
    req = {"space": space_payload(corpus.m2_space()),
           "questions": ["embedding"], "config": small_config()}
    body = client.post("/check", json=req).json()
    assert body["exit_code"] == 0
    assert body["verdicts"][0]["theorem"] == "subalgebra-inclusion"


def test_check_all_runs_audit():
    req = {"space": space_payload(corpus.nonemb_space()),
           "questions": ["all"], "config": small_config()}
    body = client.post("/check", json=req).json()
    questions = {v["question"] for v in body["verdicts"]}
    assert {"embedding", "approx_positive_generation", "separating"} <= questions
    assert "inconsistent-theorems" not in body["flags"]


def test_check_rejects_bad_space():
    bad = space_payload(corpus.intro_space(0.5))
    bad["basis"][0][0][1] = [1.0, 0.0]  # E12 entry without its adjoint
    req = {"space": bad, "questions": ["embedding"]}
    r = client.post("/check", json=req)
    assert r.status_code == 422


def test_check_rejects_unknown_question():
    req = {"space": space_payload(corpus.intro_space(0.5)), "questions": ["bogus"]}
    assert client.post("/check", json=req).status_code == 422


def test_dist_endpoint():
    req = {"space": space_payload(corpus.intro_space(0.5)),
           "coords": [1.0], "level": 1, "config": small_config()}
    body = client.post("/dist", json=req).json()
    values = {q["name"]: q.get("value") for q in body["quantities"]}
    assert values["dist_to_cone"] == pytest.approx(1.0, abs=1e-3)
    assert values["neg_part_norm"] == pytest.approx(0.5)
    assert values["pos_part_norm"] == pytest.approx(1.0)
    assert values["nu_max"] == pytest.approx(1.0, abs=1e-3)
    assert values["gauge_gap"] == pytest.approx(0.5, abs=1e-3)


def test_dist_zero_coords():
    req = {"space": space_payload(corpus.intro_space(0.5)),
           "coords": [0.0], "level": 1, "config": small_config()}
    body = client.post("/dist", json=req).json()
    values = {q["name"]: q.get("value") for q in body["quantities"]}
    assert values["dist_to_cone"] == pytest.approx(0.0, abs=1e-3)
    assert values["pos_part_norm"] == 0.0


def test_dist_wrong_coord_count():
    req = {"space": space_payload(corpus.intro_space(0.5)), "coords": [1.0, 2.0]}
    assert client.post("/dist", json=req).status_code == 422


def test_unitise_endpoint():
    req = {"space": space_payload(corpus.intro_space(0.5)),
           "coords": [1.0],
           "scalar_part": [[[-0.25, 0.0]]],
           "level": 1, "config": small_config()}
    body = client.post("/unitise", json=req).json()
    values = {q["name"]: q.get("value") for q in body["quantities"]}
    assert values["unitised_norm"] == pytest.approx(1.25, abs=1e-3)
    assert values["concrete_unitised_norm"] == pytest.approx(0.75, abs=1e-9)
    assert values["russell_norm"] == pytest.approx(1.25, abs=2e-3)
    member = [q for q in body["quantities"] if q["name"] == "werner_membership"][0]
    assert "grid-verified" in member["flags"]
    assert member["text"] == "not-positive"   # scalar part fails PSD outright

    # with a PD scalar part, every grid epsilon (plus eps = 0) is reported
    req["scalar_part"] = [[[1.0, 0.0]]]
    body = client.post("/unitise", json=req).json()
    member = [q for q in body["quantities"] if q["name"] == "werner_membership"][0]
    assert member["text"] == "positive"
    assert len(member["method"]["grid"]) >= 10


def test_unitise_identity_probe():
    # (0, I) has norm 1 in every convention
    req = {"space": space_payload(corpus.intro_space(0.5)),
           "coords": [0.0],
           "scalar_part": [[[1.0, 0.0]]],
           "level": 1, "config": small_config()}
    body = client.post("/unitise", json=req).json()
    values = {q["name"]: q.get("value") for q in body["quantities"]}
    assert values["unitised_norm"] == pytest.approx(1.0, abs=1e-3)
    assert values["concrete_unitised_norm"] == pytest.approx(1.0, abs=1e-9)
    assert values["russell_norm"] == pytest.approx(1.0, abs=2e-3)


def test_corpus_endpoint_filtered():
    body = client.post("/corpus", json={"filter": "m2-full",
                                        "config": small_config()}).json()
    assert body["exit_code"] == 0
    assert body["corpus_rows"]
    assert all(r["passed"] for r in body["corpus_rows"])


def test_reports_validate_against_schema():
    schema = client.get("/schema/report").json()
    req = {"space": space_payload(corpus.intro_space(0.5)),
           "questions": ["embedding"], "config": small_config()}
    report = client.post("/check", json=req).json()
    jsonschema.validate(report, schema)
    report2 = client.post("/dist", json={"space": space_payload(corpus.intro_space(0.5)),
                                         "coords": [1.0], "config": small_config()}).json()
    jsonschema.validate(report2, schema)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("OSSA_THREADS", "3")
    assert service.worker_count() == 3
    monkeypatch.setenv("OSSA_THREADS", "junk")
    assert service.worker_count() >= 1
    monkeypatch.delenv("OSSA_THREADS")
    assert service.worker_count() >= 1


def test_config_echo_includes_grid():
    req = {"space": space_payload(corpus.intro_space(0.5)),
           "questions": ["embedding"], "config": small_config()}
    body = client.post("/check", json=req).json()
    grid = body["config"]["epsilon_grid"]
    assert len(grid) == 9 and grid[0] == 1.0
