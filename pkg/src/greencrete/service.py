"""JSON API over the trained models and pipeline artifacts.

All endpoints are read-only against an immutable registry snapshot; an
admin reload swaps the whole registry atomically so in-flight requests see
exactly one snapshot.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import CHECKPOINT_FORMAT_VERSION
from .cvae import CvaeParams
from .dataset import CONSTITUENTS, IMPACT_NAMES, AgeBucket, Formula, bucket_age
from .discovery import CandidateSet, generate_candidates, strength_spectrum_export
from .predictors import (
    ImpactPredictor,
    StrengthPredictorSet,
    predict_impacts,
    predict_strength,
)

GENERATE_CAP_DEFAULT = 10_000


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, fieldname: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.fieldname = fieldname

    def body(self) -> dict:
        err: dict = {"code": self.code, "message": self.message}
        if self.fieldname is not None:
            err["field"] = self.fieldname
        return {"error": err}


@dataclass(frozen=True)
class ModelRegistry:
    """Immutable model snapshot; every component shares one normalization."""

    cvae: CvaeParams
    impacts: ImpactPredictor
    strengths: StrengthPredictorSet
    version: str = CHECKPOINT_FORMAT_VERSION

    def __post_init__(self) -> None:
        norm = self.cvae.normalization
        if self.impacts.normalization != norm or self.strengths.normalization != norm:
            raise ValueError("model checkpoints disagree on normalization")

    @classmethod
    def load(cls, models_dir: str | Path) -> "ModelRegistry":
        models_dir = Path(models_dir)
        return cls(
            cvae=CvaeParams.load(models_dir / "cvae.json"),
            impacts=ImpactPredictor.load(models_dir / "impact_predictor.json"),
            strengths=StrengthPredictorSet.load_dir(models_dir),
        )


def _number(body: dict, name: str, *, minimum: float | None = None) -> float:
    if name not in body:
        raise ApiError(400, "missing_field", f"missing field {name!r}", name)
    value = body[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ApiError(400, "bad_type", f"{name} must be a number", name)
    value = float(value)
    if not math.isfinite(value):
        raise ApiError(422, "non_finite", f"{name} must be finite", name)
    if minimum is not None and value < minimum:
        raise ApiError(400, "out_of_range", f"{name} must be >= {minimum:g}", name)
    return value


def _parse_bucket(name: object, status: int) -> AgeBucket:
    try:
        return AgeBucket[str(name)]
    except KeyError:
        raise ApiError(status, "unknown_bucket", f"unknown bucket {name!r}", "bucket") from None


def _formula_from_body(body: dict) -> Formula:
    if "formula" not in body or not isinstance(body["formula"], dict):
        raise ApiError(400, "missing_field", "missing field 'formula'", "formula")
    doc = body["formula"]
    amounts = {}
    for name in CONSTITUENTS:
        amounts[name] = _number(doc, name, minimum=0.0)
    unknown = set(doc) - set(CONSTITUENTS)
    if unknown:
        raise ApiError(400, "unknown_field",
                       f"unknown constituents {sorted(unknown)}", sorted(unknown)[0])
    return Formula(**amounts)


def create_app(
    registry: ModelRegistry | None = None,
    artifacts_dir: str | Path | None = None,
    models_dir: str | Path | None = None,
    generate_cap: int = GENERATE_CAP_DEFAULT,
    on_demand_spectrum: int = 0,
) -> FastAPI:
    """Build the API app around an optional registry snapshot.

    ``artifacts_dir`` holds pipeline outputs (reduction/spectrum/progression
    documents) served verbatim.  ``on_demand_spectrum`` > 0 enables computing
    a spectrum of that many candidates when no export file exists.
    """
    app = FastAPI(title="greencrete", docs_url=None, redoc_url=None)
    state = {"registry": registry}  # swapped atomically on reload
    lock = threading.Lock()
    artifacts = Path(artifacts_dir) if artifacts_dir is not None else None

    @app.exception_handler(ApiError)
    async def handle_api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    def current_registry() -> ModelRegistry:
        reg = state["registry"]
        if reg is None:
            raise ApiError(503, "models_unavailable", "no models loaded")
        return reg

    @app.get("/health")
    async def health():
        reg = state["registry"]
        return {
            "status": "ok" if reg is not None else "degraded",
            "model_version": reg.version if reg is not None else None,
        }

    @app.post("/admin/reload")
    async def reload_models():
        if models_dir is None:
            raise ApiError(503, "models_unavailable", "no models directory configured")
        try:
            fresh = ModelRegistry.load(models_dir)
        except Exception as exc:
            raise ApiError(503, "reload_failed", str(exc)) from exc
        with lock:
            state["registry"] = fresh
        return {"status": "ok", "model_version": fresh.version}

    @app.post("/predict")
    async def predict(request: Request):
        reg = current_registry()
        body = await _json_body(request)
        formula = _formula_from_body(body)
        age = _number(body, "age_days", minimum=1.0)
        if not float(age).is_integer():
            raise ApiError(400, "bad_type", "age_days must be an integer", "age_days")
        bucket = bucket_age(int(age))
        impacts = predict_impacts(reg.impacts, formula)
        strength = predict_strength(reg.strengths, formula, bucket)
        return {
            "schema": "greencrete.predict/1",
            "bucket": bucket.name,
            "strength_mpa": strength,
            "impacts": {k: getattr(impacts, k) for k in IMPACT_NAMES},
        }

    @app.post("/generate")
    async def generate(request: Request):
        reg = current_registry()
        body = await _json_body(request)
        bucket = _parse_bucket(body.get("bucket"), 400)
        count = _number(body, "count", minimum=0.0)
        if not count.is_integer():
            raise ApiError(400, "bad_type", "count must be an integer", "count")
        count = int(count)
        if count > generate_cap:
            raise ApiError(413, "count_over_cap",
                           f"count {count} exceeds cap {generate_cap}", "count")
        strength_target = _number(body, "strength_target_mpa")
        seed = body.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ApiError(400, "bad_type", "seed must be an integer", "seed")
        effective_seed = seed if seed is not None else int(np.random.SeedSequence().entropy % 2**32)

        norm = reg.cvae.normalization
        X = np.empty((count, 5))
        X[:, 0] = norm.normalize(strength_target, "strength")
        X[:, 1] = norm.normalize(float(bucket.center_days), "age")
        targets = body.get("impact_targets") or {}
        if not isinstance(targets, dict):
            raise ApiError(400, "bad_type", "impact_targets must be an object", "impact_targets")
        unknown = set(targets) - set(IMPACT_NAMES)
        if unknown:
            raise ApiError(400, "unknown_field",
                           f"unknown impact targets {sorted(unknown)}", sorted(unknown)[0])
        rng = np.random.Generator(np.random.PCG64(effective_seed))
        uniform = rng.uniform(0.0, 1.0, size=(count, 3))
        for j, name in enumerate(IMPACT_NAMES):
            if name in targets:
                X[:, 2 + j] = norm.normalize(_number(targets, name, minimum=0.0), name)
            else:
                X[:, 2 + j] = uniform[:, j]
        cands = generate_candidates(
            reg.cvae, reg.impacts, reg.strengths, X, bucket,
            seed=int(rng.integers(0, 2**63)),
        )
        order = np.argsort(cands.impacts[:, 0], kind="stable")
        return {
            "schema": "greencrete.generate/1",
            "model_version": reg.version,
            "bucket": bucket.name,
            "seed": seed,
            "candidates": _candidate_payload(cands, order),
        }

    @app.get("/explore/spectrum")
    async def spectrum(bucket: str):
        b = _parse_bucket(bucket, 404)
        if artifacts is not None:
            path = artifacts / f"spectrum_{b.name}.json"
            if path.exists():
                return Response(content=path.read_bytes(), media_type="application/json")
        if on_demand_spectrum > 0 and state["registry"] is not None:
            reg = current_registry()
            X = _uniform_conditions(reg, b, on_demand_spectrum, seed=0)
            cands = generate_candidates(reg.cvae, reg.impacts, reg.strengths, X, b, seed=1)
            return strength_spectrum_export(cands)
        raise ApiError(404, "not_found", f"no spectrum for bucket {b.name}")

    @app.get("/discover/reduction")
    async def reduction():
        return _artifact_file("reduction.json")

    @app.get("/progression/{bucket}")
    async def progression(bucket: str):
        b = _parse_bucket(bucket, 404)
        return _artifact_file(f"progression_{b.name}.json")

    def _artifact_file(name: str) -> Response:
        if artifacts is None:
            raise ApiError(404, "not_found", f"no artifacts directory configured")
        path = artifacts / name
        if not path.exists():
            raise ApiError(404, "not_found", f"artifact {name} not found")
        return Response(content=path.read_bytes(), media_type="application/json")

    return app


def _uniform_conditions(reg: ModelRegistry, bucket: AgeBucket, n: int, seed: int) -> np.ndarray:
    from .discovery import sample_condition_array

    return sample_condition_array(n, bucket, reg.cvae.normalization, seed)


async def _json_body(request: Request) -> dict:
    try:
        body = json.loads(await request.body())
    except json.JSONDecodeError as exc:
        raise ApiError(400, "bad_json", f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ApiError(400, "bad_json", "request body must be a JSON object")
    return body


def _candidate_payload(cands: CandidateSet, order: np.ndarray) -> list[dict]:
    out = []
    for i in order:
        out.append(
            {
                "formula": {
                    name: float(cands.amounts[i, j]) for j, name in enumerate(CONSTITUENTS)
                },
                "predicted_strength_mpa": float(cands.strengths[i]),
                "predicted_impacts": {
                    name: float(cands.impacts[i, j]) for j, name in enumerate(IMPACT_NAMES)
                },
            }
        )
    return out
