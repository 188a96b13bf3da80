import json

import numpy as np
import pytest

from greencrete.neuralnet import (
    AdamState,
    LayerSpec,
    NetworkParams,
    ShapeError,
    TrainingError,
    adam_step,
    backward,
    finite_diff_grad,
    forward,
    init_params,
    load_checkpoint,
    mse_loss,
    save_checkpoint,
)


def random_net(rng, max_layers=3, max_width=8):
    n_layers = int(rng.integers(1, max_layers + 1))
    widths = [int(rng.integers(1, max_width + 1)) for _ in range(n_layers + 1)]
    acts = [str(rng.choice(["relu", "sigmoid", "identity"])) for _ in range(n_layers)]
    specs = [LayerSpec(widths[i], widths[i + 1], acts[i]) for i in range(n_layers)]
    return init_params(specs, seed=int(rng.integers(0, 2**31)))


def max_rel_error(got, want, floor=1e-6):
    num = abs(got - want)
    den = np.maximum(np.maximum(abs(got), abs(want)), floor)
    return float((num / den).max())


# --- init ---------------------------------------------------------------------

def test_init_deterministic():
    specs = [LayerSpec(4, 6, "relu"), LayerSpec(6, 2, "identity")]
    a = init_params(specs, seed=12)
    b = init_params(specs, seed=12)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_init_shapes_and_zero_bias():
    params = init_params([LayerSpec(3, 2, "relu")], seed=0)
    assert params.weights[0].shape == (2, 3)
    assert params.biases[0].shape == (2,)
    assert np.all(params.biases[0] == 0)


def test_init_rejects_mismatched_chain():
    with pytest.raises(ShapeError):
        init_params([LayerSpec(3, 2, "relu"), LayerSpec(3, 2, "relu")], seed=0)


def test_init_weight_mean_near_zero():
    # uniform(-b, b) with b = sqrt(6/fan_in); mean over 10000 draws within 3 SE
    params = init_params([LayerSpec(100, 100, "relu")], seed=77)
    w = params.weights[0].ravel()
    bound = np.sqrt(6.0 / 100)
    se = bound / np.sqrt(3 * w.size)
    assert abs(w.mean()) < 3 * se
    assert np.all(np.abs(w) <= bound)


# --- forward ---------------------------------------------------------------------

def test_forward_identity_passthrough():
    params = NetworkParams(
        specs=(LayerSpec(3, 3, "identity"),),
        weights=[np.eye(3)], biases=[np.zeros(3)],
    )
    x = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(forward(params, x).output, x)


def test_forward_relu_clamps():
    params = NetworkParams(
        specs=(LayerSpec(2, 2, "relu"),),
        weights=[np.eye(2)], biases=[np.zeros(2)],
    )
    out = forward(params, np.array([-1.0, 2.0])).output
    assert out.tolist() == [0.0, 2.0]


def test_forward_matches_matrix_oracle():
    rng = np.random.Generator(np.random.PCG64(21))
    specs = [LayerSpec(4, 5, "relu"), LayerSpec(5, 3, "sigmoid")]
    params = init_params(specs, seed=8)
    x = rng.standard_normal(4)
    # hand-rolled forward pass
    h = np.maximum(params.weights[0] @ x + params.biases[0], 0.0)
    pre = params.weights[1] @ h + params.biases[1]
    want = 1.0 / (1.0 + np.exp(-pre))
    got = forward(params, x).output
    assert got == pytest.approx(want, rel=1e-12)


def test_forward_rejects_wrong_width():
    params = init_params([LayerSpec(3, 2, "relu")], seed=0)
    with pytest.raises(ShapeError):
        forward(params, np.zeros(4))


def test_forward_never_nan_and_sigmoid_open_interval():
    rng = np.random.Generator(np.random.PCG64(3))
    for _ in range(20):
        params = init_params(
            [LayerSpec(4, 6, "relu"), LayerSpec(6, 3, "sigmoid")],
            seed=int(rng.integers(0, 2**31)),
        )
        x = rng.standard_normal(4) * 1e3  # large inputs stress the sigmoid
        out = forward(params, x).output
        assert np.all(np.isfinite(out))
        assert np.all((out > 0.0) & (out < 1.0))


# --- backward -----------------------------------------------------------------

def test_backward_zero_gradient():
    params = init_params([LayerSpec(3, 2, "relu")], seed=1)
    trace = forward(params, np.ones(3))
    grads = backward(params, trace, np.zeros(2))
    assert all(np.all(g == 0) for g in grads.arrays())


def test_backward_linear_outer_product():
    # single identity layer, loss = output . g  =>  dW = outer(g, x), db = g
    params = NetworkParams(
        specs=(LayerSpec(3, 2, "identity"),),
        weights=[np.zeros((2, 3))], biases=[np.zeros(2)],
    )
    x = np.array([1.0, 2.0, 3.0])
    g = np.array([0.5, -1.5])
    grads = backward(params, forward(params, x), g)
    assert np.array_equal(grads.dweights[0], np.outer(g, x))
    assert np.array_equal(grads.dbiases[0], g)


def test_backward_matches_finite_differences():
    rng = np.random.Generator(np.random.PCG64(17))
    for _ in range(10):
        params = random_net(rng)
        x = rng.standard_normal(params.input_width)
        target = rng.standard_normal(params.output_width)

        def loss_fn(p):
            out = forward(p, x).output
            return mse_loss(out, target)[0]

        trace = forward(params, x)
        _, grad_out = mse_loss(trace.output, target)
        got = backward(params, trace, grad_out)
        want = finite_diff_grad(loss_fn, params)
        for g, w in zip(got.arrays(), want.arrays()):
            assert max_rel_error(g, w) < 1e-4


def test_backward_batch_sums_rows():
    params = init_params([LayerSpec(3, 2, "identity")], seed=4)
    X = np.random.Generator(np.random.PCG64(5)).standard_normal((6, 3))
    G = np.ones((6, 2))
    batch = backward(params, forward(params, X), G)
    single_sum = np.zeros((2, 3))
    for row in X:
        single_sum += backward(params, forward(params, row), np.ones(2)).dweights[0]
    assert batch.dweights[0] == pytest.approx(single_sum, rel=1e-12)


# --- adam ------------------------------------------------------------------------

def zero_grads(params):
    from greencrete.neuralnet import Gradients
    return Gradients(
        dweights=[np.zeros_like(w) for w in params.weights],
        dbiases=[np.zeros_like(b) for b in params.biases],
    )


def test_adam_zero_gradient_keeps_params():
    params = init_params([LayerSpec(2, 2, "relu")], seed=2)
    new, state = adam_step(params, zero_grads(params), AdamState.fresh(params))
    for w0, w1 in zip(params.weights, new.weights):
        assert np.array_equal(w0, w1)
    assert state.t == 1


def test_adam_first_step_magnitude_bounded_by_lr():
    rng = np.random.Generator(np.random.PCG64(6))
    params = init_params([LayerSpec(3, 3, "relu")], seed=3)
    grads = zero_grads(params)
    grads.dweights[0] = rng.standard_normal((3, 3)) * 10
    new, _ = adam_step(params, grads, AdamState.fresh(params, lr=0.001))
    step = np.abs(new.weights[0] - params.weights[0])
    assert np.all(step <= 0.001 + 1e-15)
    assert np.all(step[grads.dweights[0] != 0] > 0)


def test_adam_three_step_trace_matches_scalar_reference():
    # independently coded scalar Adam, g = 1 at every step
    lr, b1, b2, eps = 0.001, 0.9, 0.999, 1e-8
    w, m, v = 0.5, 0.0, 0.0
    expected = []
    for t in range(1, 4):
        m = b1 * m + (1 - b1) * 1.0
        v = b2 * v + (1 - b2) * 1.0
        w = w - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        expected.append(w)

    params = NetworkParams(
        specs=(LayerSpec(1, 1, "identity"),),
        weights=[np.array([[0.5]])], biases=[np.array([0.0])],
    )
    state = AdamState.fresh(params, lr=lr)
    got = []
    for _ in range(3):
        grads = zero_grads(params)
        grads.dweights[0] = np.array([[1.0]])
        params, state = adam_step(params, grads, state)
        got.append(params.weights[0][0, 0])
    assert got == pytest.approx(expected, rel=1e-15)


def test_adam_rejects_non_finite_gradient():
    params = init_params([LayerSpec(2, 2, "relu")], seed=9)
    grads = zero_grads(params)
    grads.dweights[0][0, 0] = np.nan
    with pytest.raises(TrainingError):
        adam_step(params, grads, AdamState.fresh(params))


def test_training_determinism():
    def run():
        rng = np.random.Generator(np.random.PCG64(13))
        params = init_params([LayerSpec(3, 4, "relu"), LayerSpec(4, 1, "identity")], seed=13)
        state = AdamState.fresh(params)
        X = rng.standard_normal((20, 3))
        y = rng.standard_normal((20, 1))
        for _ in range(25):
            trace = forward(params, X)
            _, g = mse_loss(trace.post[-1], y)
            params, state = adam_step(params, backward(params, trace, g), state)
        return params

    a, b = run(), run()
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


# --- finite differences / losses ---------------------------------------------------

def test_finite_diff_on_quadratic():
    params = init_params([LayerSpec(2, 3, "identity")], seed=5)

    def loss_fn(p):
        return 0.5 * sum(float(np.sum(w * w)) for w in p.weights)

    grads = finite_diff_grad(loss_fn, params)
    assert grads.dweights[0] == pytest.approx(params.weights[0], abs=1e-6)


def test_finite_diff_on_linear():
    params = init_params([LayerSpec(2, 2, "identity")], seed=6)
    c = np.array([[1.0, -2.0], [3.0, 0.5]])

    def loss_fn(p):
        return float(np.sum(c * p.weights[0]))

    grads = finite_diff_grad(loss_fn, params)
    assert grads.dweights[0] == pytest.approx(c, rel=1e-9)


def test_finite_diff_two_step_sizes_agree():
    rng = np.random.Generator(np.random.PCG64(30))
    params = random_net(rng)
    x = rng.standard_normal(params.input_width)
    target = rng.standard_normal(params.output_width)

    def loss_fn(p):
        return mse_loss(forward(p, x).output, target)[0]

    g1 = finite_diff_grad(loss_fn, params, h=1e-5)
    g2 = finite_diff_grad(loss_fn, params, h=2e-5)
    for a, b in zip(g1.arrays(), g2.arrays()):
        assert max_rel_error(a, b) < 1e-4


def test_mse_loss_examples():
    loss, grad = mse_loss(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    assert loss == 0.0 and np.all(grad == 0)
    loss, grad = mse_loss(np.array([1.0, 0.0]), np.array([0.0, 0.0]))
    assert loss == 0.5
    assert grad.tolist() == [1.0, 0.0]
    with pytest.raises(ShapeError):
        mse_loss(np.zeros(2), np.zeros(3))


def test_mse_matches_bruteforce_sum():
    rng = np.random.Generator(np.random.PCG64(31))
    p = rng.standard_normal(9)
    t = rng.standard_normal(9)
    want = sum((a - b) ** 2 for a, b in zip(p, t)) / 9
    assert mse_loss(p, t)[0] == pytest.approx(want, rel=1e-12)


# --- checkpoints ---------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    params = init_params([LayerSpec(3, 4, "relu"), LayerSpec(4, 2, "sigmoid")], seed=42)
    path = tmp_path / "net.json"
    save_checkpoint(params, path, seed=42)
    again = load_checkpoint(path)
    assert again.specs == params.specs
    for a, b in zip(again.weights, params.weights):
        assert np.array_equal(a, b)
    assert json.loads(path.read_text())["seed"] == 42


def test_checkpoint_rejects_bad_shapes(tmp_path):
    params = init_params([LayerSpec(3, 2, "relu")], seed=1)
    path = tmp_path / "net.json"
    save_checkpoint(params, path)
    doc = json.loads(path.read_text())
    doc["weights"][0] = [[1.0, 2.0]]  # wrong shape for a 3->2 layer
    path.write_text(json.dumps(doc))
    with pytest.raises(ShapeError):
        load_checkpoint(path)
