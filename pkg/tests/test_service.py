import json

import pytest
from fastapi.testclient import TestClient

from greencrete.service import ModelRegistry, create_app


@pytest.fixture(scope="module")
def models_dir(tmp_path_factory, tiny_models, small_dataset):
    out = tmp_path_factory.mktemp("models")
    cvae, impacts, strengths = tiny_models
    cvae.save(out / "cvae.json")
    impacts.save(out / "impact_predictor.json")
    strengths.save_dir(out)
    small_dataset.save(out / "dataset.json")
    return out


@pytest.fixture(scope="module")
def registry(models_dir):
    return ModelRegistry.load(models_dir)


@pytest.fixture()
def client(registry, tmp_path):
    app = create_app(registry=registry, artifacts_dir=tmp_path, on_demand_spectrum=20)
    return TestClient(app)


VALID_FORMULA = {
    "cement": 300, "blast_furnace_slag": 50, "fly_ash": 10, "water": 180,
    "superplasticizer": 5, "coarse_aggregate": 1000, "fine_aggregate": 780,
}


def test_health_ok(client, registry):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["model_version"] == registry.version == "1"


def test_health_degraded_without_models():
    app = create_app(registry=None)
    body = TestClient(app).get("/health").json()
    assert body == {"status": "degraded", "model_version": None}


def test_predict_valid(client):
    r = client.post("/predict", json={"formula": VALID_FORMULA, "age_days": 28})
    assert r.status_code == 200
    body = r.json()
    assert body["bucket"] == "D28"
    assert body["strength_mpa"] > 0
    assert all(body["impacts"][k] >= 0 for k in ("gwp", "ap", "cbw"))


def test_predict_repeatable(client):
    payload = {"formula": VALID_FORMULA, "age_days": 7}
    a = client.post("/predict", json=payload)
    b = client.post("/predict", json=payload)
    assert a.text == b.text


def test_predict_negative_amount_400_names_field(client):
    bad = dict(VALID_FORMULA, cement=-1)
    r = client.post("/predict", json={"formula": bad, "age_days": 28})
    assert r.status_code == 400
    assert r.json()["error"]["field"] == "cement"


def test_predict_missing_field_400(client):
    incomplete = {k: v for k, v in VALID_FORMULA.items() if k != "water"}
    r = client.post("/predict", json={"formula": incomplete, "age_days": 28})
    assert r.status_code == 400
    assert r.json()["error"]["field"] == "water"
    r = client.post("/predict", json={"age_days": 28})
    assert r.status_code == 400


def test_predict_non_finite_422(client):
    raw = json.dumps({"formula": VALID_FORMULA, "age_days": 28}).replace("300", "NaN", 1)
    r = client.post("/predict", content=raw,
                    headers={"content-type": "application/json"})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "non_finite"


def test_generate_count_zero(client):
    r = client.post("/generate", json={"bucket": "D7", "strength_target_mpa": 30.0,
                                       "count": 0})
    assert r.status_code == 200
    assert r.json()["candidates"] == []


def test_generate_seeded_identical(client):
    payload = {"bucket": "D7", "strength_target_mpa": 30.0, "count": 5, "seed": 4}
    a = client.post("/generate", json=payload)
    b = client.post("/generate", json=payload)
    assert a.status_code == 200
    assert a.text == b.text


def test_generate_concurrent_seeded_identical(client):
    from concurrent.futures import ThreadPoolExecutor

    payload = {"bucket": "D28", "strength_target_mpa": 42.0, "count": 6, "seed": 17}
    with ThreadPoolExecutor(max_workers=8) as pool:
        bodies = list(pool.map(
            lambda _: client.post("/generate", json=payload).text, range(8)))
    assert len(set(bodies)) == 1


def test_generate_sorted_by_gwp_and_in_ranges(client, small_dataset):
    r = client.post("/generate", json={"bucket": "D28", "strength_target_mpa": 40.0,
                                       "count": 8, "seed": 1})
    cands = r.json()["candidates"]
    gwps = [c["predicted_impacts"]["gwp"] for c in cands]
    assert gwps == sorted(gwps)
    for c in cands:
        for name, v in c["formula"].items():
            lo, hi = small_dataset.normalization.ranges[name]
            assert lo - 1e-9 <= v <= hi + 1e-9


def test_generate_impact_targets_accepted(client):
    r = client.post("/generate", json={
        "bucket": "D7", "strength_target_mpa": 30.0, "count": 2, "seed": 2,
        "impact_targets": {"gwp": 250.0},
    })
    assert r.status_code == 200


def test_generate_unknown_bucket_400(client):
    r = client.post("/generate", json={"bucket": "D29", "strength_target_mpa": 30.0,
                                       "count": 1})
    assert r.status_code == 400


def test_generate_over_cap_413(client):
    r = client.post("/generate", json={"bucket": "D7", "strength_target_mpa": 30.0,
                                       "count": 10_001})
    assert r.status_code == 413


def test_spectrum_unknown_bucket_404(client):
    assert client.get("/explore/spectrum", params={"bucket": "D29"}).status_code == 404


def test_spectrum_on_demand(client):
    r = client.get("/explore/spectrum", params={"bucket": "D7"})
    assert r.status_code == 200
    body = r.json()
    assert body["schema"] == "greencrete.spectrum/1"
    assert body["count"] == 20


def test_spectrum_prefers_precomputed_file(registry, tmp_path):
    doc = {"schema": "greencrete.spectrum/1", "bucket": "D7", "count": 0,
           "axes": {}, "records": []}
    path = tmp_path / "spectrum_D7.json"
    path.write_text(json.dumps(doc))
    app = create_app(registry=registry, artifacts_dir=tmp_path)
    r = TestClient(app).get("/explore/spectrum", params={"bucket": "D7"})
    assert r.content == path.read_bytes()


def test_reports_404_before_pipeline(client):
    assert client.get("/discover/reduction").status_code == 404
    assert client.get("/progression/D7").status_code == 404


def test_reports_served_byte_for_byte(registry, tmp_path):
    reduction = tmp_path / "reduction.json"
    reduction.write_text('{"schema": "greencrete.reduction/1", "rows": []}\n')
    progression = tmp_path / "progression_D14.json"
    progression.write_text('{"schema": "greencrete.progression/1", "pairs": []}\n')
    client = TestClient(create_app(registry=registry, artifacts_dir=tmp_path))
    assert client.get("/discover/reduction").content == reduction.read_bytes()
    assert client.get("/progression/D14").content == progression.read_bytes()


def test_error_envelope_shape(client):
    r = client.post("/predict", json={"formula": VALID_FORMULA})
    assert r.status_code == 400
    err = r.json()["error"]
    assert set(err) <= {"code", "message", "field"}
    assert err["code"] == "missing_field"


def test_endpoints_do_not_mutate_registry(client, registry):
    before = registry.cvae.decoder.weights[0].copy()
    client.post("/generate", json={"bucket": "D7", "strength_target_mpa": 30.0,
                                   "count": 4, "seed": 0})
    client.post("/predict", json={"formula": VALID_FORMULA, "age_days": 3})
    assert (registry.cvae.decoder.weights[0] == before).all()


def test_admin_reload_swaps_registry(models_dir):
    app = create_app(registry=None, models_dir=models_dir)
    client = TestClient(app)
    assert client.get("/health").json()["status"] == "degraded"
    assert client.post("/admin/reload").status_code == 200
    assert client.get("/health").json()["status"] == "ok"
