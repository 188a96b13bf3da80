"""Dense feed-forward networks with manual backprop and Adam, in float64.

Small enough to verify layer by layer: the largest network in this project
is 12 -> 25 -> 20 -> 4.  Inputs may be single vectors (shape ``(in,)``) or
batches (shape ``(n, in)``); batch gradients are summed over rows, so the
scalar loss backed by ``backward`` is the sum of per-row losses.

Randomness everywhere comes from numpy's PCG64 generator seeded explicitly,
which is a documented, platform-independent algorithm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import CHECKPOINT_FORMAT_VERSION

ACTIVATIONS = ("relu", "sigmoid", "identity")

# Smallest/largest doubles inside (0, 1); sigmoid outputs are clipped into
# the open interval so downstream code may rely on strict bounds.
_SIGMOID_LO = np.nextafter(0.0, 1.0)
_SIGMOID_HI = np.nextafter(1.0, 0.0)


class ShapeError(ValueError):
    """Layer chain or array shape mismatch."""


class TrainingError(RuntimeError):
    """Non-finite values encountered during optimization."""


@dataclass(frozen=True)
class LayerSpec:
    input_width: int
    output_width: int
    activation: str

    def __post_init__(self) -> None:
        if self.input_width < 1 or self.output_width < 1:
            raise ShapeError(f"layer widths must be >= 1: {self}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")


@dataclass
class NetworkParams:
    """Weight matrices (out x in) and bias vectors for a layer chain."""

    specs: tuple[LayerSpec, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        _check_chain(self.specs)
        if len(self.weights) != len(self.specs) or len(self.biases) != len(self.specs):
            raise ShapeError("weights/biases count must match layer specs")
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            if w.shape != (spec.output_width, spec.input_width):
                raise ShapeError(f"weight shape {w.shape} does not match {spec}")
            if b.shape != (spec.output_width,):
                raise ShapeError(f"bias shape {b.shape} does not match {spec}")

    @property
    def input_width(self) -> int:
        return self.specs[0].input_width

    @property
    def output_width(self) -> int:
        return self.specs[-1].output_width

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            specs=self.specs,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def _check_chain(specs: Sequence[LayerSpec]) -> None:
    if not specs:
        raise ShapeError("need at least one layer")
    for k in range(len(specs) - 1):
        if specs[k].output_width != specs[k + 1].input_width:
            raise ShapeError(
                f"layer {k} output width {specs[k].output_width} does not feed "
                f"layer {k + 1} input width {specs[k + 1].input_width}"
            )


def init_params(specs: Sequence[LayerSpec], seed: int) -> NetworkParams:
    """Fan-in scaled uniform weights (+-sqrt(6/fan_in)), zero biases."""
    specs = tuple(specs)
    _check_chain(specs)
    rng = np.random.Generator(np.random.PCG64(seed))
    weights = []
    biases = []
    for spec in specs:
        bound = math.sqrt(6.0 / spec.input_width)
        weights.append(rng.uniform(-bound, bound, size=(spec.output_width, spec.input_width)))
        biases.append(np.zeros(spec.output_width))
    return NetworkParams(specs=specs, weights=weights, biases=biases)


@dataclass
class ForwardTrace:
    """Input plus per-layer pre/post activations, kept for backprop."""

    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]
    single: bool

    @property
    def output(self) -> np.ndarray:
        out = self.post[-1]
        return out[0] if self.single else out


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "sigmoid":
        out = np.empty_like(pre)
        pos = pre >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-pre[pos]))
        e = np.exp(pre[~pos])
        out[~pos] = e / (1.0 + e)
        return np.clip(out, _SIGMOID_LO, _SIGMOID_HI)
    return pre


def _activation_gradient(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (pre > 0).astype(float)
    if name == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(pre)


def forward(params: NetworkParams, x: np.ndarray) -> ForwardTrace:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_width:
        raise ShapeError(f"input shape {x.shape} does not match width {params.input_width}")
    pre_list: list[np.ndarray] = []
    post_list: list[np.ndarray] = []
    activation = x
    for spec, w, b in zip(params.specs, params.weights, params.biases):
        pre = activation @ w.T + b
        activation = _activate(spec.activation, pre)
        pre_list.append(pre)
        post_list.append(activation)
    return ForwardTrace(inputs=x, pre=pre_list, post=post_list, single=single)


@dataclass
class Gradients:
    """Loss gradients shaped like NetworkParams, plus the input gradient."""

    dweights: list[np.ndarray]
    dbiases: list[np.ndarray]
    dinput: np.ndarray | None = None

    def arrays(self):
        yield from self.dweights
        yield from self.dbiases


def backward(params: NetworkParams, trace: ForwardTrace, output_gradient: np.ndarray) -> Gradients:
    """Backpropagate d(loss)/d(output) into weight, bias and input gradients."""
    g = np.asarray(output_gradient, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != trace.post[-1].shape:
        raise ShapeError(
            f"output gradient shape {g.shape} does not match output {trace.post[-1].shape}"
        )
    dweights: list[np.ndarray] = [np.empty(0)] * len(params.specs)
    dbiases: list[np.ndarray] = [np.empty(0)] * len(params.specs)
    delta = g
    for k in range(len(params.specs) - 1, -1, -1):
        spec = params.specs[k]
        delta = delta * _activation_gradient(spec.activation, trace.pre[k], trace.post[k])
        below = trace.inputs if k == 0 else trace.post[k - 1]
        dweights[k] = delta.T @ below
        dbiases[k] = delta.sum(axis=0)
        delta = delta @ params.weights[k]
    dinput = delta[0] if trace.single else delta
    return Gradients(dweights=dweights, dbiases=dbiases, dinput=dinput)


@dataclass
class AdamState:
    """Adam moment accumulators; shapes mirror the parameters they update."""

    t: int
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, params: NetworkParams, lr: float = 0.001,
              beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(
            t=0,
            m_weights=[np.zeros_like(w) for w in params.weights],
            v_weights=[np.zeros_like(w) for w in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_biases=[np.zeros_like(b) for b in params.biases],
            lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon,
        )


def adam_step(params: NetworkParams, grads: Gradients, state: AdamState
              ) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    for g in grads.arrays():
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient; aborting instead of poisoning weights")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t

    def update(value, grad, m, v):
        m_new = b1 * m + (1.0 - b1) * grad
        v_new = b2 * v + (1.0 - b2) * grad * grad
        step = state.lr * (m_new / corr1) / (np.sqrt(v_new / corr2) + state.epsilon)
        return value - step, m_new, v_new

    new_weights, new_m_w, new_v_w = [], [], []
    for w, g, m, v in zip(params.weights, grads.dweights, state.m_weights, state.v_weights):
        if g.shape != w.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match weights {w.shape}")
        w2, m2, v2 = update(w, g, m, v)
        new_weights.append(w2)
        new_m_w.append(m2)
        new_v_w.append(v2)
    new_biases, new_m_b, new_v_b = [], [], []
    for b, g, m, v in zip(params.biases, grads.dbiases, state.m_biases, state.v_biases):
        if g.shape != b.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match biases {b.shape}")
        bias2, m2, v2 = update(b, g, m, v)
        new_biases.append(bias2)
        new_m_b.append(m2)
        new_v_b.append(v2)
    new_params = NetworkParams(specs=params.specs, weights=new_weights, biases=new_biases)
    new_state = AdamState(
        t=t, m_weights=new_m_w, v_weights=new_v_w, m_biases=new_m_b, v_biases=new_v_b,
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, epsilon=state.epsilon,
    )
    return new_params, new_state


def finite_diff_grad(loss_fn: Callable[[NetworkParams], float], params: NetworkParams,
                     h: float = 1e-5) -> Gradients:
    """Central-difference gradient of a deterministic scalar loss."""
    work = params.copy()

    def central(array: np.ndarray) -> np.ndarray:
        out = np.empty_like(array)
        flat = array.ravel()
        out_flat = out.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(work)
            flat[i] = orig - h
            down = loss_fn(work)
            flat[i] = orig
            out_flat[i] = (up - down) / (2.0 * h)
        return out

    return Gradients(
        dweights=[central(w) for w in work.weights],
        dbiases=[central(b) for b in work.biases],
    )


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all components and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


# --- checkpoints ----------------------------------------------------------

def network_to_dict(params: NetworkParams, seed: int | None = None) -> dict:
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "layers": [
            {"input_width": s.input_width, "output_width": s.output_width,
             "activation": s.activation}
            for s in params.specs
        ],
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    if seed is not None:
        doc["seed"] = seed
    return doc


def network_from_dict(doc: dict) -> NetworkParams:
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ShapeError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    specs = tuple(
        LayerSpec(int(l["input_width"]), int(l["output_width"]), l["activation"])
        for l in doc["layers"]
    )
    weights = [np.asarray(w, dtype=float) for w in doc["weights"]]
    biases = [np.asarray(b, dtype=float) for b in doc["biases"]]
    return NetworkParams(specs=specs, weights=weights, biases=biases)


def save_checkpoint(params: NetworkParams, path: str | Path, seed: int | None = None) -> None:
    Path(path).write_text(json.dumps(network_to_dict(params, seed)), encoding="utf-8")


def load_checkpoint(path: str | Path) -> NetworkParams:
    return network_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
