import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oggn import nn
from oggn.errors import ConfigError, ParseError, ShapeError, ValidationError


def _fd_grads(net, x, target, eps=1e-4):
    """Central differences of mse(forward) w.r.t. every parameter and input, computed directly."""
    x = x.copy()

    def loss():
        out = nn.predict(net, x)
        return np.mean((out - target) ** 2)

    grads = []
    for arr in [*net.weights, *net.biases, x]:
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = loss()
            flat[i] = keep - eps
            down = loss()
            flat[i] = keep
            gflat[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def test_init_is_deterministic():
    a = nn.init_network([4, 1], ["identity"], seed=7)
    b = nn.init_network([4, 1], ["identity"], seed=7)
    assert all(np.array_equal(x, y) for x, y in zip(a.parameters(), b.parameters()))


def test_init_shapes_and_glorot_bounds():
    net = nn.init_network([4, 64, 64, 1], ["tanh", "tanh", "identity"], seed=0)
    assert [w.shape for w in net.weights] == [(4, 64), (64, 64), (64, 1)]
    assert all(np.all(b == 0) for b in net.biases)
    for w, (fi, fo) in zip(net.weights, [(4, 64), (64, 64), (64, 1)]):
        assert np.abs(w).max() <= np.sqrt(6 / (fi + fo))


@pytest.mark.parametrize("sizes", [[], [3], [3, 0, 1]])
def test_init_rejects_bad_sizes(sizes):
    with pytest.raises(ShapeError):
        nn.init_network(sizes, "tanh", seed=0)


def test_init_rejects_wrong_activation_count():
    with pytest.raises(ShapeError):
        nn.init_network([2, 3, 1], ["tanh"], seed=0)


def test_forward_identity_network_returns_input():
    net = nn.Network([3, 3, 3], [np.eye(3), np.eye(3)], [np.zeros(3), np.zeros(3)], ["identity"] * 2)
    x = np.array([[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]])
    out, _ = nn.forward(net, x)
    np.testing.assert_array_equal(out, x)


def test_forward_dot_product():
    net = nn.Network([2, 1], [np.array([[1.0], [1.0]])], [np.zeros(1)], ["identity"])
    out, _ = nn.forward(net, np.array([[3.0, 4.0]]))
    assert out.tolist() == [[7.0]]


def test_relu_clamps_negative_preactivation():
    net = nn.Network([1, 1], [np.array([[1.0]])], [np.zeros(1)], ["relu"])
    assert nn.predict(net, [[-5.0]]).tolist() == [[0.0]]


def test_forward_shape_mismatch():
    net = nn.init_network([3, 2], "tanh", seed=0)
    with pytest.raises(ShapeError):
        nn.forward(net, np.zeros((2, 4)))


def test_forward_deterministic(rng):
    net = nn.init_network([5, 8, 2], ["tanh", "relu"], seed=3)
    x = rng.normal(size=(6, 5))
    assert np.array_equal(nn.predict(net, x), nn.predict(net, x))


def test_backward_zero_upstream_gives_zero_grads(rng):
    net = nn.init_network([3, 5, 2], ["tanh", "identity"], seed=1)
    out, cache = nn.forward(net, rng.normal(size=(4, 3)))
    (dw, db), dx = nn.backward(net, cache, np.zeros_like(out))
    assert all(not g.any() for g in [*dw, *db, dx])


def test_backward_linear_layer_input_grad(rng):
    net = nn.init_network([3, 2], ["identity"], seed=2)
    out, cache = nn.forward(net, rng.normal(size=(4, 3)))
    d_out = rng.normal(size=out.shape)
    _, dx = nn.backward(net, cache, d_out)
    np.testing.assert_allclose(dx, d_out @ net.weights[0].T, rtol=0, atol=1e-15)


def test_backward_shape_errors(rng):
    net = nn.init_network([3, 2], ["identity"], seed=2)
    out, cache = nn.forward(net, rng.normal(size=(4, 3)))
    with pytest.raises(ShapeError):
        nn.backward(net, cache, np.zeros((3, 2)))
    other = nn.init_network([3, 4, 2], ["tanh", "identity"], seed=2)
    with pytest.raises(ShapeError):
        nn.backward(other, cache, out)


@pytest.mark.parametrize("seed", range(10))
def test_backward_matches_direct_finite_differences(seed):
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, 4))
    sizes = [int(s) for s in rng.integers(1, 9, size=depth + 1)]
    acts = [str(a) for a in rng.choice(["tanh", "identity"], size=depth)]
    net = nn.init_network(sizes, acts, seed=seed)
    x = rng.normal(size=(int(rng.integers(1, 6)), sizes[0]))
    target = rng.normal(size=(x.shape[0], sizes[-1]))
    out, cache = nn.forward(net, x)
    _, d_out = nn.mse_loss(out, target)
    (dw, db), dx = nn.backward(net, cache, d_out)
    for ana, num in zip([*dw, *db, dx], _fd_grads(net, x, target)):
        np.testing.assert_allclose(ana, num, rtol=1e-4, atol=1e-8)


def test_mse_examples():
    loss, grad = nn.mse_loss([[0.0]], [[2.0]])
    assert loss == 4.0 and grad.tolist() == [[-4.0]]
    loss, grad = nn.mse_loss([[1.0, 3.0]], [[1.0, 1.0]])
    assert loss == 2.0 and grad.tolist() == [[0.0, 2.0]]
    loss, grad = nn.mse_loss([[1.5, -2.0]], [[1.5, -2.0]])
    assert loss == 0.0 and not grad.any()


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        nn.mse_loss(np.zeros((2, 1)), np.zeros((1, 2)))


# dyadic grid: differences never underflow when squared
_grid = st.integers(-8000, 8000).map(lambda i: i / 8)


@given(st.lists(_grid, min_size=1, max_size=16), st.lists(_grid, min_size=1, max_size=16))
def test_mse_nonnegative_and_zero_iff_equal(a, b):
    n = min(len(a), len(b))
    p, t = np.array(a[:n]), np.array(b[:n])
    loss, _ = nn.mse_loss(p, t)
    assert loss >= 0
    assert (loss == 0) == bool(np.all(p == t))


def _grads_like(net, value):
    return [np.full_like(w, value) for w in net.weights], [np.full_like(b, value) for b in net.biases]


def test_adam_zero_gradient_leaves_params():
    net = nn.init_network([3, 4, 1], ["tanh", "identity"], seed=0)
    before = [p.copy() for p in net.parameters()]
    state = nn.AdamState.for_network(net)
    nn.adam_step(net, _grads_like(net, 0.0), state)
    assert state.step == 1
    assert all(np.array_equal(a, b) for a, b in zip(before, net.parameters()))


def test_adam_first_step_moves_by_lr_sign():
    net = nn.init_network([3, 4, 1], ["tanh", "identity"], seed=0)
    before = [p.copy() for p in net.parameters()]
    state = nn.AdamState.for_network(net, lr=1e-3)
    grads = ([np.full_like(w, 0.5) for w in net.weights], [np.full_like(b, -2.0) for b in net.biases])
    nn.adam_step(net, grads, state)
    n_w = net.n_layers
    for i, (a, b) in enumerate(zip(before, net.parameters())):
        expected = -1e-3 if i < n_w else 1e-3
        np.testing.assert_allclose(b - a, expected, rtol=1e-6)


def test_adam_is_deterministic():
    base = nn.init_network([3, 4, 1], ["tanh", "identity"], seed=0)
    grads = _grads_like(base, 0.3)
    results = []
    for _ in range(2):
        net = base.copy()
        state = nn.AdamState.for_network(net)
        for _ in range(3):
            nn.adam_step(net, grads, state)
        results.append(net)
    assert all(np.array_equal(a, b) for a, b in zip(results[0].parameters(), results[1].parameters()))


def test_adam_shape_mismatch():
    net = nn.init_network([3, 4, 1], ["tanh", "identity"], seed=0)
    other = nn.init_network([3, 5, 1], ["tanh", "identity"], seed=0)
    with pytest.raises(ShapeError):
        nn.adam_step(net, _grads_like(other, 1.0), nn.AdamState.for_network(net))


def test_sgd_step():
    net = nn.init_network([2, 1], ["identity"], seed=0)
    w0 = net.weights[0].copy()
    nn.sgd_step(net, _grads_like(net, 1.0), lr=0.1)
    np.testing.assert_allclose(net.weights[0], w0 - 0.1)


def test_grad_check_small_nets(rng):
    net = nn.init_network([4, 8, 3], ["tanh", "identity"], seed=4)
    assert nn.grad_check(net, rng.normal(size=(5, 4)), eps=1e-4) < 1e-4


def test_grad_check_linear_is_near_exact(rng):
    net = nn.init_network([3, 2], ["identity"], seed=4)
    assert nn.grad_check(net, rng.normal(size=(4, 3)), eps=1e-4) < 1e-8


def test_grad_check_rejects_zero_eps():
    net = nn.init_network([3, 2], ["identity"], seed=4)
    with pytest.raises(ConfigError):
        nn.grad_check(net, np.zeros((1, 3)), eps=0)


def test_grad_check_catches_a_wrong_gradient(rng, monkeypatch):
    net = nn.init_network([3, 4, 2], ["tanh", "identity"], seed=4)
    real = nn.backward

    def broken(*a, **k):
        (dw, db), dx = real(*a, **k)
        dw[0] = dw[0] * 1.01
        return (dw, db), dx

    monkeypatch.setattr(nn, "backward", broken)
    assert nn.grad_check(net, rng.normal(size=(3, 3))) > 1e-3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_save_load_round_trip_bit_exact(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    sizes = [int(s) for s in rng.integers(1, 7, size=int(rng.integers(2, 5)))]
    acts = [str(a) for a in rng.choice(nn.ACTIVATIONS, size=len(sizes) - 1)]
    net = nn.init_network(sizes, acts, seed=seed)
    for b in net.biases:
        b[:] = rng.normal(size=b.shape)
    path = tmp_path_factory.mktemp("net") / "net.json"
    nn.save_network(net, path)
    back = nn.load_network(path)
    assert back.layer_sizes == net.layer_sizes
    assert back.activations == net.activations
    assert back.seed == net.seed
    for a, b in zip(net.parameters(), back.parameters()):
        assert a.tobytes() == b.tobytes()


def test_load_truncated_file(tmp_path):
    net = nn.init_network([3, 2], ["tanh"], seed=0)
    path = tmp_path / "net.json"
    nn.save_network(net, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ParseError, match=r"net\.json:\d+:\d+"):
        nn.load_network(path)


def test_load_mismatched_shapes(tmp_path):
    d = nn.network_to_dict(nn.init_network([3, 2], ["tanh"], seed=0))
    d["layer_sizes"] = [3, 5]
    path = tmp_path / "net.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ValidationError, match="weight shape"):
        nn.load_network(path)


def test_load_missing_field(tmp_path):
    d = nn.network_to_dict(nn.init_network([3, 2], ["tanh"], seed=0))
    del d["biases"]
    path = tmp_path / "net.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ValidationError, match="biases"):
        nn.load_network(path)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_activation_ranges(values):
    z = np.array(values).reshape(1, -1)
    w = len(values)
    relu = nn.Network([w, w], [np.eye(w)], [np.zeros(w)], ["relu"])
    tanh = nn.Network([w, w], [np.eye(w)], [np.zeros(w)], ["tanh"])
    assert np.all(nn.predict(relu, z) >= 0)
    t = nn.predict(tanh, z)
    assert np.all((t >= -1) & (t <= 1))
