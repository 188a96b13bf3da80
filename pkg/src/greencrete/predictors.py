"""Neural regressors for impacts and per-age-bucket strength, plus metrics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import CHECKPOINT_FORMAT_VERSION
from .dataset import (
    BUCKETS,
    CONSTITUENTS,
    IMPACT_NAMES,
    AgeBucket,
    Dataset,
    Formula,
    ImpactVector,
    NormalizationSpec,
)
from .neuralnet import (
    AdamState,
    LayerSpec,
    NetworkParams,
    ShapeError,
    adam_step,
    backward,
    forward,
    init_params,
    mse_loss,
    network_from_dict,
    network_to_dict,
)

IMPACT_SPECS = (
    LayerSpec(7, 32, "relu"),
    LayerSpec(32, 16, "relu"),
    LayerSpec(16, 3, "identity"),
)

STRENGTH_SPECS = (
    LayerSpec(7, 32, "relu"),
    LayerSpec(32, 16, "relu"),
    LayerSpec(16, 1, "identity"),
)


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 10
    epochs: int = 500
    seed: int = 0


@dataclass(frozen=True)
class RegressionMetrics:
    """MAE/RMSE in target units, R-squared, and range-normalized RMSE.

    r2 is None for zero-variance targets; nrmse is None for zero-range
    targets.
    """

    mae: float
    rmse: float
    r2: float | None
    nrmse: float | None

    def __post_init__(self) -> None:
        # rmse >= mae always holds in identical units (power-mean inequality)
        if self.rmse + 1e-12 < self.mae:
            raise ValueError(f"rmse {self.rmse} < mae {self.mae}")

    def to_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "r2": self.r2, "nrmse": self.nrmse}


def metrics(predictions, targets) -> RegressionMetrics:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if p.size == 0 or p.size != t.size:
        raise ValueError(f"need equal non-empty lengths, got {p.size} and {t.size}")
    err = p - t
    mae = float(np.mean(np.abs(err)))
    rmse = float(math.sqrt(np.mean(err * err)))
    sst = float(np.sum((t - t.mean()) ** 2))
    r2 = None if sst == 0.0 else 1.0 - float(np.sum(err * err)) / sst
    spread = float(t.max() - t.min())
    nrmse = None if spread == 0.0 else rmse / spread
    return RegressionMetrics(mae=mae, rmse=rmse, r2=r2, nrmse=nrmse)


def _train_regression(X: np.ndarray, Y: np.ndarray, specs, cfg: TrainConfig) -> NetworkParams:
    """Minibatch Adam on mean squared error; deterministic per seed."""
    params = init_params(specs, cfg.seed)
    state = AdamState.fresh(params, lr=cfg.lr)
    stream = np.random.Generator(np.random.PCG64(cfg.seed + 1))
    n = X.shape[0]
    for _ in range(cfg.epochs):
        order = stream.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            trace = forward(params, X[rows])
            _, grad = mse_loss(trace.post[-1], Y[rows])
            params, state = adam_step(params, backward(params, trace, grad), state)
    return params


@dataclass
class ImpactPredictor:
    """7 normalized amounts -> 3 normalized impacts."""

    network: NetworkParams
    normalization: NormalizationSpec

    def __post_init__(self) -> None:
        if self.network.input_width != 7 or self.network.output_width != 3:
            raise ShapeError("impact predictor must map 7 inputs to 3 outputs")

    def save(self, path: str | Path) -> None:
        doc = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "kind": "impact_predictor",
            "network": network_to_dict(self.network),
            "normalization": self.normalization.to_dict(),
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ImpactPredictor":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("kind") != "impact_predictor":
            raise ShapeError(f"not an impact predictor checkpoint: {doc.get('kind')!r}")
        return cls(
            network=network_from_dict(doc["network"]),
            normalization=NormalizationSpec.from_dict(doc["normalization"]),
        )


@dataclass
class StrengthPredictorSet:
    """One strength network per age bucket (7 normalized amounts -> strength)."""

    models: dict[AgeBucket, NetworkParams]
    normalization: NormalizationSpec
    # record indices each bucket model was trained on, for provenance checks
    provenance: dict[AgeBucket, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if set(self.models) != set(BUCKETS):
            raise ShapeError("strength predictor set must cover all six buckets")

    def save_dir(self, directory: str | Path) -> list[Path]:
        """One checkpoint file per bucket: strength_<bucket>.json."""
        directory = Path(directory)
        paths = []
        for bucket in BUCKETS:
            doc = {
                "format_version": CHECKPOINT_FORMAT_VERSION,
                "kind": "strength_predictor",
                "bucket": bucket.name,
                "network": network_to_dict(self.models[bucket]),
                "normalization": self.normalization.to_dict(),
            }
            path = directory / f"strength_{bucket.name}.json"
            path.write_text(json.dumps(doc), encoding="utf-8")
            paths.append(path)
        return paths

    @classmethod
    def load_dir(cls, directory: str | Path) -> "StrengthPredictorSet":
        directory = Path(directory)
        models: dict[AgeBucket, NetworkParams] = {}
        normalization = None
        for bucket in BUCKETS:
            doc = json.loads(
                (directory / f"strength_{bucket.name}.json").read_text(encoding="utf-8")
            )
            if doc.get("kind") != "strength_predictor" or doc.get("bucket") != bucket.name:
                raise ShapeError(f"bad strength checkpoint for {bucket.name}")
            models[bucket] = network_from_dict(doc["network"])
            norm = NormalizationSpec.from_dict(doc["normalization"])
            if normalization is None:
                normalization = norm
            elif normalization != norm:
                raise ShapeError("strength checkpoints disagree on normalization")
        return cls(models=models, normalization=normalization)


def _normalized_formula_matrix(dataset: Dataset, ids) -> np.ndarray:
    return dataset.normalization.normalize_array(
        dataset.matrix(CONSTITUENTS, ids), CONSTITUENTS
    )


def train_impact_predictor(dataset: Dataset, cfg: TrainConfig | None = None) -> ImpactPredictor:
    cfg = cfg or TrainConfig()
    if not dataset.train_ids:
        raise ValueError("train split is empty")
    X = _normalized_formula_matrix(dataset, dataset.train_ids)
    Y = dataset.normalization.normalize_array(
        dataset.matrix(IMPACT_NAMES, dataset.train_ids), IMPACT_NAMES
    )
    network = _train_regression(X, Y, IMPACT_SPECS, cfg)
    return ImpactPredictor(network=network, normalization=dataset.normalization)


def train_strength_predictors(dataset: Dataset, cfg: TrainConfig | None = None
                              ) -> StrengthPredictorSet:
    """Six independent models, each seeing only its own bucket's train rows."""
    cfg = cfg or TrainConfig()
    models: dict[AgeBucket, NetworkParams] = {}
    provenance: dict[AgeBucket, tuple[int, ...]] = {}
    for k, bucket in enumerate(BUCKETS):
        ids = dataset.bucket_ids(bucket, dataset.train_ids)
        if not ids:
            raise ValueError(f"no training records for bucket {bucket.name}")
        X = _normalized_formula_matrix(dataset, ids)
        y = np.array(
            [dataset.normalization.normalize(dataset.records[i].raw.strength_mpa, "strength")
             for i in ids]
        )[:, None]
        bucket_cfg = TrainConfig(lr=cfg.lr, batch_size=cfg.batch_size,
                                 epochs=cfg.epochs, seed=cfg.seed + k)
        models[bucket] = _train_regression(X, y, STRENGTH_SPECS, bucket_cfg)
        provenance[bucket] = tuple(ids)
    return StrengthPredictorSet(models=models, normalization=dataset.normalization,
                                provenance=provenance)


def predict_impacts_batch(predictor: ImpactPredictor, amounts: np.ndarray) -> np.ndarray:
    """(n, 7) physical amounts -> (n, 3) physical impacts, clamped at zero."""
    X = predictor.normalization.normalize_array(np.asarray(amounts, dtype=float), CONSTITUENTS)
    out01 = forward(predictor.network, X).post[-1]
    out = predictor.normalization.denormalize_array(out01, IMPACT_NAMES)
    return np.maximum(out, 0.0)


def predict_impacts(predictor: ImpactPredictor, formula: Formula) -> ImpactVector:
    X = predictor.normalization.normalize_array(formula.as_array(), CONSTITUENTS)
    out01 = forward(predictor.network, X).output
    out = predictor.normalization.denormalize_array(out01, IMPACT_NAMES)
    clamped = bool(np.any(out < 0))
    out = np.maximum(out, 0.0)
    return ImpactVector(gwp=float(out[0]), ap=float(out[1]), cbw=float(out[2]), clamped=clamped)


def predict_strength_batch(predictors: StrengthPredictorSet, amounts: np.ndarray,
                           bucket: AgeBucket) -> np.ndarray:
    """(n, 7) physical amounts -> (n,) strength MPa for one bucket's model."""
    if bucket not in predictors.models:
        raise KeyError(f"unknown bucket {bucket!r}")
    X = predictors.normalization.normalize_array(np.asarray(amounts, dtype=float), CONSTITUENTS)
    out01 = forward(predictors.models[bucket], X).post[-1][:, 0]
    out = np.array([predictors.normalization.denormalize(v, "strength") for v in out01])
    return np.maximum(out, 0.0)


def predict_strength(predictors: StrengthPredictorSet, formula: Formula,
                     bucket: AgeBucket) -> float:
    return float(predict_strength_batch(predictors, formula.as_array()[None, :], bucket)[0])


def evaluate_impact_predictor(predictor: ImpactPredictor, dataset: Dataset,
                              ids=None) -> dict[str, RegressionMetrics]:
    """Held-out metrics per impact dimension, in physical units."""
    ids = dataset.test_ids if ids is None else ids
    preds = predict_impacts_batch(predictor, dataset.matrix(CONSTITUENTS, ids))
    result = {}
    for j, name in enumerate(IMPACT_NAMES):
        result[name] = metrics(preds[:, j], dataset.column_array(name, ids))
    return result


def evaluate_strength_predictors(predictors: StrengthPredictorSet, dataset: Dataset,
                                 ids=None) -> dict[AgeBucket, RegressionMetrics]:
    """Held-out metrics per bucket, in MPa."""
    ids = dataset.test_ids if ids is None else ids
    result = {}
    for bucket in BUCKETS:
        bucket_ids = dataset.bucket_ids(bucket, ids)
        if not bucket_ids:
            continue
        preds = predict_strength_batch(
            predictors, dataset.matrix(CONSTITUENTS, bucket_ids), bucket
        )
        result[bucket] = metrics(preds, dataset.column_array("strength", bucket_ids))
    return result
