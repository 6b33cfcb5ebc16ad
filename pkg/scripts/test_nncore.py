# test_nncore.py
import os
import sys

import numpy as np

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, project_root)
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from gradcheck import assert_grad_close, numeric_grad
from src.features.build_features import assemble_inputs, time_embedding
from src.models.mlp import (
    deserialize_params,
    init_params,
    layer_layout,
    make_spec,
    mlp_forward,
    mlp_grad,
    param_count,
    serialize_params,
)
from src.models.optim import AdamState, adam_step, clip_grad_norm, ema_update
from src.utils.errors import CheckpointError, ConfigError, NumericError
from src.utils.utils import make_rng


def _set_layer(spec, params, i, W, b):
    w_off, (fi, fo), b_off, n = layer_layout(spec)[i]
    params[w_off:w_off + fi * fo] = np.asarray(W, dtype=float).reshape(-1)
    params[b_off:b_off + n] = b


# === FORWARD ===

def test_zero_network_outputs_zero():
    spec = make_spec(input_dim=3, hidden_dims=(5, 4), output_dim=2)
    out = mlp_forward(spec, np.zeros(param_count(spec)), np.random.default_rng(0).normal(size=(7, 3)))
    assert out.shape == (7, 2)
    assert np.all(out == 0.0)


def test_identity_network():
    spec = make_spec(input_dim=3, hidden_dims=(3,), output_dim=3, activation="relu")
    params = np.zeros(param_count(spec))
    _set_layer(spec, params, 0, np.eye(3), 0.0)
    _set_layer(spec, params, 1, np.eye(3), 0.0)
    x = np.array([[0.5, 1.0, 2.0], [3.0, 0.1, 0.2]])
    assert np.array_equal(mlp_forward(spec, params, x), x)


def test_forward_matches_straight_line_evaluation():
    spec = make_spec(input_dim=2, hidden_dims=(4,), output_dim=1, activation="tanh")
    rng = make_rng(3)
    params = init_params(spec, rng)
    x = rng.normal(size=(5, 2))

    W1 = params[0:8].reshape(2, 4)
    b1 = params[8:12]
    W2 = params[12:16].reshape(4, 1)
    b2 = params[16]
    expected = np.tanh(x @ W1 + b1) @ W2 + b2
    assert np.allclose(mlp_forward(spec, params, x), expected, rtol=0, atol=1e-12)


def test_time_inputs_are_embedded():
    spec = make_spec(input_dim=2, hidden_dims=(3,), output_dim=1, time_embed_dim=6, n_time_inputs=2)
    assert spec.first_layer_width == 2 + 2 * 6
    x = np.ones((4, 2))
    t = np.array([0.1, 0.5, 1.0, 2.0])
    full = assemble_inputs(spec, x, [t, 0.3])
    assert full.shape == (4, 14)
    assert np.allclose(full[:, 2:8], time_embedding(t, 6))
    # sin(0) = 0, cos(0) = 1
    emb = time_embedding(np.zeros(1), 4)
    assert np.array_equal(emb, [[0.0, 0.0, 1.0, 1.0]])


def test_forward_is_deterministic():
    spec = make_spec(input_dim=3, hidden_dims=(8, 8), output_dim=2, time_embed_dim=4, n_time_inputs=1)
    rng = make_rng(1)
    params = init_params(spec, rng)
    x = rng.normal(size=(6, 3))
    t = rng.uniform(0.1, 5.0, size=6)
    a = mlp_forward(spec, params, x, t)
    b = mlp_forward(spec, params.copy(), x.copy(), t.copy())
    assert a.tobytes() == b.tobytes()


def test_forward_errors():
    spec = make_spec(input_dim=3, hidden_dims=(4,), output_dim=1)
    params = np.zeros(param_count(spec))
    for bad in (np.zeros((2, 4)), np.zeros(3)):
        try:
            mlp_forward(spec, params, bad)
            raise AssertionError("dimension mismatch not detected")
        except ConfigError:
            pass
    try:
        mlp_forward(spec, params, np.array([[0.0, np.nan, 1.0]]))
        raise AssertionError("non-finite input not detected")
    except NumericError:
        pass
    try:
        make_spec(input_dim=3, hidden_dims=(), output_dim=1)
        raise AssertionError("empty hidden dims accepted")
    except ConfigError:
        pass
    try:
        make_spec(input_dim=3, hidden_dims=(4,), output_dim=1, time_embed_dim=3)
        raise AssertionError("odd embedding width accepted")
    except ConfigError:
        pass


# === GRADIENTS ===

def test_zero_network_gradients():
    spec = make_spec(input_dim=3, hidden_dims=(5,), output_dim=2)
    params = np.zeros(param_count(spec))
    rng = make_rng(2)
    x = rng.normal(size=(6, 3))
    up = rng.normal(size=(6, 2))
    grad, _ = mlp_grad(spec, params, x, None, up)

    layout = layer_layout(spec)
    w0, (fi, fo), _, _ = layout[0]
    assert np.all(grad[w0:w0 + fi * fo] == 0.0)
    _, _, b1, n1 = layout[1]
    assert np.allclose(grad[b1:b1 + n1], up.sum(axis=0))


def test_linear_chain_input_gradient():
    spec = make_spec(input_dim=2, hidden_dims=(3,), output_dim=2, activation="relu")
    rng = make_rng(4)
    W1 = rng.uniform(0.1, 1.0, size=(2, 3))
    W2 = rng.normal(size=(3, 2))
    params = np.zeros(param_count(spec))
    _set_layer(spec, params, 0, W1, 0.5)
    _set_layer(spec, params, 1, W2, 0.0)
    x = rng.uniform(0.1, 1.0, size=(4, 2))
    up = rng.normal(size=(4, 2))
    _, input_grad = mlp_grad(spec, params, x, None, up)
    assert np.allclose(input_grad, up @ W2.T @ W1.T, rtol=0, atol=1e-12)


def test_gradients_match_finite_differences():
    for activation in ("mish", "tanh"):
        spec = make_spec(
            input_dim=3, hidden_dims=(8, 6), output_dim=2, activation=activation,
            time_embed_dim=4, n_time_inputs=2,
        )
        rng = make_rng(5)
        params = init_params(spec, rng)
        x = rng.normal(size=(5, 3))
        times = [rng.uniform(0.1, 3.0, size=5), rng.uniform(0.0, 0.1, size=5)]
        up = rng.normal(size=(5, 2))

        grad, input_grad = mlp_grad(spec, params, x, times, up)
        num_p = numeric_grad(lambda p: float(np.sum(up * mlp_forward(spec, p, x, times))), params.copy())
        num_x = numeric_grad(lambda xx: float(np.sum(up * mlp_forward(spec, params, xx, times))), x.copy())
        assert_grad_close(grad, num_p)
        assert_grad_close(input_grad, num_x)


def test_upstream_shape_checked():
    spec = make_spec(input_dim=2, hidden_dims=(3,), output_dim=2)
    params = np.zeros(param_count(spec))
    try:
        mlp_grad(spec, params, np.zeros((4, 2)), None, np.zeros((4, 3)))
        raise AssertionError("bad upstream accepted")
    except ConfigError:
        pass


# === OPTIMIZER ===

def test_adam_zero_gradient():
    p = np.array([1.0, -2.0, 3.0])
    state = AdamState.zeros(3, lr=1e-2)
    new_state, new_p = adam_step(state, p, np.zeros(3))
    assert np.array_equal(new_p, p)
    assert new_state.step_count == 1


def test_adam_first_step_closed_form():
    p = np.zeros(3)
    g = np.array([0.5, -2.0, 1e-3])
    state = AdamState.zeros(3, lr=1e-3)
    _, new_p = adam_step(state, p, g)
    expected = -1e-3 * g / (np.abs(g) + state.eps)
    assert np.allclose(new_p, expected, rtol=1e-12, atol=0)


def test_adam_constant_gradient_step_size():
    p = np.zeros(2)
    g = np.array([3.0, -0.2])
    state = AdamState.zeros(2, lr=1e-2)
    for _ in range(2000):
        prev = p
        state, p = adam_step(state, p, g)
    assert np.allclose(p - prev, -1e-2 * np.sign(g), rtol=1e-3)


def test_adam_rejects_non_finite():
    try:
        adam_step(AdamState.zeros(2), np.zeros(2), np.array([np.inf, 0.0]))
        raise AssertionError("non-finite gradient accepted")
    except NumericError:
        pass


def test_ema_update():
    online = np.array([1.0, 2.0])
    target = np.array([-1.0, 5.0])
    assert np.array_equal(ema_update(target, online, 1.0), online)
    assert np.allclose(ema_update(online, online.copy(), 0.3), online, rtol=1e-15, atol=0)
    assert ema_update(np.zeros(1), np.ones(1), 0.005)[0] == 0.005

    t = target.copy()
    for _ in range(50):
        t = ema_update(t, online, 0.1)
    assert np.allclose(online - t, (0.9 ** 50) * (online - target), rtol=1e-10, atol=1e-14)

    for bad in (0.0, 1.5):
        try:
            ema_update(target, online, bad)
            raise AssertionError(f"rate {bad} accepted")
        except ConfigError:
            pass


def test_clip_grad_norm():
    g, scale = clip_grad_norm(np.array([0.3, 0.4]), 1.0)
    assert scale == 1.0 and np.array_equal(g, [0.3, 0.4])
    g, scale = clip_grad_norm(np.array([3.0, 4.0]), 1.0)
    assert np.allclose(g, [0.6, 0.8]) and np.isclose(scale, 0.2)
    g, scale = clip_grad_norm(np.zeros(3), 1.0)
    assert scale == 1.0 and np.all(g == 0)


# === SERIALIZATION ===

def test_param_serialization():
    spec = make_spec(input_dim=4, hidden_dims=(6, 5), output_dim=2, time_embed_dim=8, n_time_inputs=2)
    params = init_params(spec, make_rng(7))
    blob = serialize_params(spec, params)
    spec2, params2 = deserialize_params(blob)
    assert spec2 == spec
    assert params2.tobytes() == params.tobytes()

    for bad in (b"XXXX" + blob[4:], blob[:-8]):
        try:
            deserialize_params(bad)
            raise AssertionError("corrupt block accepted")
        except CheckpointError:
            pass


def main():
    print("=== nncore: MLP, gradients, Adam, EMA, clipping ===")
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        fn()
        print(f"✅ {name}")
    print(f"\n✅ {len(tests)} nncore tests passed")


if __name__ == "__main__":
    main()
