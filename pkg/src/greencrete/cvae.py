"""Conditional VAE over normalized concrete mixes.

The encoder maps (condition, mix) pairs to a 2-d Gaussian posterior, the
decoder reconstructs the 7 normalized constituent amounts from (condition,
latent).  Training maximizes the evidence lower bound: a sum-of-squares
reconstruction term plus a weighted KL penalty against the standard normal
prior.  The prior is independent of the condition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import CHECKPOINT_FORMAT_VERSION
from .dataset import CONSTITUENTS, Dataset, Formula, NormalizationSpec
from .neuralnet import (
    AdamState,
    Gradients,
    LayerSpec,
    NetworkParams,
    ShapeError,
    TrainingError,
    adam_step,
    backward,
    forward,
    init_params,
    network_from_dict,
    network_to_dict,
)

#: Condition vector layout (all normalized to [0, 1]).
CONDITION_COLUMNS = ("strength", "age", "gwp", "ap", "cbw")

LATENT_DIM = 2

# Encoder trunk 12 -> 25 -> 20 with a fused identity head of width 4: rows
# 0-1 are the mean head, rows 2-3 the log-variance head (two parallel
# width-2 layers sharing the trunk output).
ENCODER_SPECS = (
    LayerSpec(12, 25, "relu"),
    LayerSpec(25, 20, "relu"),
    LayerSpec(20, 2 * LATENT_DIM, "identity"),
)

# Decoder input is condition (5) + latent (2); sigmoid keeps outputs in (0,1).
DECODER_SPECS = (
    LayerSpec(5 + LATENT_DIM, 20, "relu"),
    LayerSpec(20, 25, "relu"),
    LayerSpec(25, 7, "sigmoid"),
)


@dataclass(frozen=True)
class Condition:
    """Normalized side information: strength, age and the three impacts."""

    strength01: float
    age01: float
    gwp01: float
    ap01: float
    cbw01: float

    def __post_init__(self) -> None:
        for name in ("strength01", "age01", "gwp01", "ap01", "cbw01"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.strength01, self.age01, self.gwp01, self.ap01, self.cbw01], dtype=float
        )


def condition_for_record(record, normalization: NormalizationSpec) -> Condition:
    """The condition vector of a labeled record under the given normalization."""
    values = [record.column_value(col) for col in CONDITION_COLUMNS]
    norm = [normalization.normalize(v, col) for v, col in zip(values, CONDITION_COLUMNS)]
    return Condition(*norm)


@dataclass
class CvaeHyper:
    lr: float = 0.001
    batch_size: int = 10
    epochs: int = 500
    kl_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class CvaeParams:
    """Trained encoder/decoder weights plus the normalization they assume."""

    encoder: NetworkParams
    decoder: NetworkParams
    normalization: NormalizationSpec

    def __post_init__(self) -> None:
        if self.encoder.specs != ENCODER_SPECS:
            raise ShapeError("encoder does not match the fixed architecture")
        if self.decoder.specs != DECODER_SPECS:
            raise ShapeError("decoder does not match the fixed architecture")

    def save(self, path: str | Path) -> None:
        doc = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "kind": "cvae",
            "condition_layout": list(CONDITION_COLUMNS),
            "encoder": network_to_dict(self.encoder),
            "decoder": network_to_dict(self.decoder),
            "normalization": self.normalization.to_dict(),
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CvaeParams":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("kind") != "cvae":
            raise ShapeError(f"not a cvae checkpoint: kind={doc.get('kind')!r}")
        if doc.get("condition_layout") != list(CONDITION_COLUMNS):
            raise ShapeError("condition layout mismatch in checkpoint")
        return cls(
            encoder=network_from_dict(doc["encoder"]),
            decoder=network_from_dict(doc["decoder"]),
            normalization=NormalizationSpec.from_dict(doc["normalization"]),
        )


def _as_condition_array(x) -> np.ndarray:
    return x.as_array() if isinstance(x, Condition) else np.asarray(x, dtype=float)


def encode(params: CvaeParams, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and log-variance for one (condition, mix) pair."""
    inputs = np.concatenate([_as_condition_array(x), np.asarray(y, dtype=float)])
    out = forward(params.encoder, inputs).output
    return out[:LATENT_DIM].copy(), out[LATENT_DIM:].copy()


def reparameterize(mu: np.ndarray, logvar: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """z = mu + exp(logvar / 2) * eps; eps is the caller's standard-normal draw."""
    return np.asarray(mu) + np.exp(0.5 * np.asarray(logvar)) * np.asarray(eps)


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> float:
    """Closed-form KL of a diagonal Gaussian against the standard normal."""
    mu = np.asarray(mu, dtype=float)
    logvar = np.asarray(logvar, dtype=float)
    return float(-0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar)))


def decode(params: CvaeParams, x, z: np.ndarray) -> np.ndarray:
    """Normalized mix reconstructed from condition and latent code."""
    inputs = np.concatenate([_as_condition_array(x), np.asarray(z, dtype=float)])
    return forward(params.decoder, inputs).output.copy()


def _elbo_batch(
    encoder: NetworkParams,
    decoder: NetworkParams,
    X: np.ndarray,
    Y: np.ndarray,
    EPS: np.ndarray,
    kl_weight: float,
) -> tuple[float, Gradients, Gradients, float, float]:
    """Mean per-example ELBO loss over a batch, with gradients for both nets.

    Returns (loss, encoder grads, decoder grads, mean reconstruction MSE,
    mean KL).  Gradients flow through the reparameterized latent.
    """
    n = X.shape[0]
    trace_e = forward(encoder, np.concatenate([X, Y], axis=1))
    heads = trace_e.post[-1]
    mu = heads[:, :LATENT_DIM]
    logvar = heads[:, LATENT_DIM:]
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * EPS

    trace_d = forward(decoder, np.concatenate([X, z], axis=1))
    yhat = trace_d.post[-1]
    diff = yhat - Y
    recon_rows = np.sum(diff * diff, axis=1)
    kl_rows = -0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar), axis=1)
    loss = float(np.mean(recon_rows) + kl_weight * np.mean(kl_rows))
    if not math.isfinite(loss):
        raise TrainingError("non-finite loss")

    dec_grads = backward(decoder, trace_d, 2.0 * diff / n)
    dz = dec_grads.dinput[:, len(CONDITION_COLUMNS):]
    dmu = dz + kl_weight * mu / n
    dlogvar = dz * 0.5 * sigma * EPS + kl_weight * 0.5 * (np.exp(logvar) - 1.0) / n
    enc_grads = backward(encoder, trace_e, np.concatenate([dmu, dlogvar], axis=1))

    recon_mse = float(np.mean(diff * diff))
    return loss, enc_grads, dec_grads, recon_mse, float(np.mean(kl_rows))


def elbo_loss(params: CvaeParams, x, y, eps: np.ndarray, kl_weight: float = 1.0
              ) -> tuple[float, Gradients, Gradients]:
    """Single-example ELBO loss and its gradients for encoder and decoder."""
    X = _as_condition_array(x)[None, :]
    Y = np.asarray(y, dtype=float)[None, :]
    EPS = np.asarray(eps, dtype=float)[None, :]
    loss, enc_grads, dec_grads, _, _ = _elbo_batch(
        params.encoder, params.decoder, X, Y, EPS, kl_weight
    )
    return loss, enc_grads, dec_grads


@dataclass
class TrainResult:
    params: CvaeParams
    epoch_losses: list[float] = field(default_factory=list)
    epoch_recon_mse: list[float] = field(default_factory=list)


def training_arrays(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """(conditions, mixes) for the train split, both normalized."""
    ids = dataset.train_ids
    X = dataset.normalization.normalize_array(
        dataset.matrix(CONDITION_COLUMNS, ids), CONDITION_COLUMNS
    )
    Y = dataset.normalization.normalize_array(
        dataset.matrix(CONSTITUENTS, ids), CONSTITUENTS
    )
    return X, Y


def train(dataset: Dataset, hyper: CvaeHyper | None = None) -> TrainResult:
    """Minibatch Adam training; deterministic for a given seed."""
    hyper = hyper or CvaeHyper()
    X, Y = training_arrays(dataset)
    if X.shape[0] == 0:
        raise TrainingError("train split is empty")
    encoder = init_params(ENCODER_SPECS, hyper.seed)
    decoder = init_params(DECODER_SPECS, hyper.seed + 1)
    enc_state = AdamState.fresh(encoder, lr=hyper.lr)
    dec_state = AdamState.fresh(decoder, lr=hyper.lr)
    stream = np.random.Generator(np.random.PCG64(hyper.seed + 2))
    n = X.shape[0]
    epoch_losses: list[float] = []
    epoch_recon: list[float] = []
    for epoch in range(hyper.epochs):
        order = stream.permutation(n)
        loss_sum = 0.0
        recon_sum = 0.0
        for start in range(0, n, hyper.batch_size):
            rows = order[start:start + hyper.batch_size]
            eps = stream.standard_normal((len(rows), LATENT_DIM))
            try:
                loss, eg, dg, recon, _ = _elbo_batch(
                    encoder, decoder, X[rows], Y[rows], eps, hyper.kl_weight
                )
            except TrainingError as exc:
                raise TrainingError(f"diverged at epoch {epoch}: {exc}") from None
            encoder, enc_state = adam_step(encoder, eg, enc_state)
            decoder, dec_state = adam_step(decoder, dg, dec_state)
            loss_sum += loss * len(rows)
            recon_sum += recon * len(rows)
        epoch_losses.append(loss_sum / n)
        epoch_recon.append(recon_sum / n)
    params = CvaeParams(encoder=encoder, decoder=decoder,
                        normalization=dataset.normalization)
    return TrainResult(params=params, epoch_losses=epoch_losses, epoch_recon_mse=epoch_recon)


def generate(params: CvaeParams, x, z: np.ndarray) -> Formula:
    """Decode and denormalize to physical constituent amounts (kg/m3)."""
    y01 = decode(params, x, z)
    amounts = params.normalization.denormalize_array(y01, CONSTITUENTS)
    return Formula.from_array(amounts)


def generate_batch(params: CvaeParams, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Vectorized generate: (n, 5) conditions + (n, 2) latents -> (n, 7) kg/m3."""
    out = forward(params.decoder, np.concatenate([X, Z], axis=1)).post[-1]
    return params.normalization.denormalize_array(out, CONSTITUENTS)
