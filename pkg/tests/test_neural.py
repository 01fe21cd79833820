import math

import numpy as np
import pytest

from gradcheck import random_dense_case, random_lstm_case, worst_error
from risnoma.neural import (MLP, Adam, CheckpointError, ContractViolation, Dense, LSTMRegressor,
                            NonFiniteError, RMSprop, lstm_cell_forward, soft_update)
from risnoma.neural.checkpoint import assign, load_arrays, save_arrays


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def test_dense_identity():
    layer = Dense(3, 3, "identity")
    layer.W = np.eye(3)
    x = np.array([[1.0, -2.0, 3.0]])
    np.testing.assert_array_equal(layer.forward(x)[0], x)


def test_relu_zero_input():
    layer = Dense(4, 2, "relu", rng=np.random.default_rng(0))
    y, _ = layer.forward(np.zeros((1, 4)))
    np.testing.assert_array_equal(y, np.zeros((1, 2)))


def test_dense_matches_naive_loops():
    rng = np.random.default_rng(1)
    layer = Dense(5, 3, "tanh", rng=rng)
    layer.b = rng.normal(size=3)
    x = rng.normal(size=(4, 5))
    y, _ = layer.forward(x)
    for r in range(4):
        for o in range(3):
            z = math.fsum(layer.W[o, i] * x[r, i] for i in range(5)) + layer.b[o]
            assert y[r, o] == pytest.approx(math.tanh(z), rel=1e-13)


def test_unknown_activation():
    with pytest.raises(ValueError):
        Dense(2, 2, "softsign")


def test_dense_gradients_random_configs():
    rng = np.random.default_rng(10)
    assert max(worst_error(*random_dense_case(rng)) for _ in range(30)) < 1e-4


def test_lstm_gradients_random_configs():
    rng = np.random.default_rng(11)
    assert max(worst_error(*random_lstm_case(rng)) for _ in range(30)) < 1e-4


def test_least_squares_gradient_closed_form():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 4))
    y = rng.normal(size=(20, 1))
    net = MLP([4, 1], "identity", "identity", rng)
    pred, cache = net.forward(X)
    _, (dW, db) = net.backward(cache, 2.0 * (pred - y) / len(y))
    w = net.layers[0].W.T
    resid = X @ w + net.layers[0].b - y
    np.testing.assert_allclose(dW, (2.0 * X.T @ resid / len(y)).T, rtol=1e-12)
    np.testing.assert_allclose(db, 2.0 * resid.sum(axis=0) / len(y), rtol=1e-12)


def test_lstm_zero_parameters_closed_form():
    # all gates are sigmoid(0) = 1/2 and the candidate is tanh(0) = 0
    H = 3
    W, U, b = np.zeros((4 * H, 1)), np.zeros((4 * H, H)), np.zeros(4 * H)
    c_prev = np.array([[0.4, -1.0, 2.0]])
    h, c, _ = lstm_cell_forward(W, U, b, np.ones((1, 1)), np.zeros((1, H)), c_prev)
    np.testing.assert_allclose(c, 0.5 * c_prev, rtol=1e-15)
    np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c_prev), rtol=1e-15)


def test_saturated_forget_gate_carries_cell():
    H = 2
    W, U, b = np.zeros((4 * H, 1)), np.zeros((4 * H, H)), np.zeros(4 * H)
    b[:H] = 50.0      # forget gate fully open
    b[H:2 * H] = -50.0  # input gate shut
    c_prev = np.array([[0.7, -0.3]])
    _, c, _ = lstm_cell_forward(W, U, b, np.ones((1, 1)), np.zeros((1, H)), c_prev)
    np.testing.assert_allclose(c, c_prev, rtol=1e-15)


def test_lstm_cell_scalar_oracle():
    rng = np.random.default_rng(3)
    W, U, b = rng.normal(size=(4, 1)), rng.normal(size=(4, 1)), rng.normal(size=4)
    x, h0, c0 = 0.3, -0.2, 0.5
    h, c, _ = lstm_cell_forward(W, U, b, np.array([[x]]), np.array([[h0]]), np.array([[c0]]))
    z = [W[k, 0] * x + U[k, 0] * h0 + b[k] for k in range(4)]
    c_ref = _sig(z[0]) * c0 + _sig(z[1]) * math.tanh(z[2])
    assert c[0, 0] == pytest.approx(c_ref, rel=1e-14)
    assert h[0, 0] == pytest.approx(_sig(z[3]) * math.tanh(c_ref), rel=1e-14)


def test_recurrent_weights_unused_for_single_step():
    model = LSTMRegressor(hidden=3, n_layers=2, rng=np.random.default_rng(4), head_init_scale=0.5)
    windows = np.random.default_rng(5).random((6, 1))
    y, cache = model.forward(windows)
    grads = model.backward(cache, y - 0.5)
    # with one time step the recurrent input is the zero initial state
    assert np.all(grads[1] == 0.0) and np.all(grads[4] == 0.0)
    assert np.any(grads[0] != 0.0)


def test_residual_adds_last_input():
    rng = np.random.default_rng(6)
    a = LSTMRegressor(hidden=4, residual=True, rng=np.random.default_rng(7))
    b = LSTMRegressor(hidden=4, residual=False, rng=np.random.default_rng(7))
    w = rng.random((5, 5))
    np.testing.assert_allclose(a(w) - b(w), w[:, -1], rtol=1e-15)


def test_backward_without_forward():
    with pytest.raises(ContractViolation):
        Dense(2, 2).backward(None, np.zeros((1, 2)))
    with pytest.raises(ContractViolation):
        LSTMRegressor(hidden=2).backward(None, np.zeros(1))


def test_forward_is_deterministic():
    net = MLP([3, 8, 2], "relu", "tanh", np.random.default_rng(8))
    x = np.random.default_rng(9).normal(size=(10, 3))
    assert net(x).tobytes() == net(x).tobytes()
    twin = MLP([3, 8, 2], "relu", "tanh", np.random.default_rng(8))
    assert net(x).tobytes() == twin(x).tobytes()


def test_non_finite_is_hard_error():
    net = MLP([2, 2], "identity", "identity", np.random.default_rng(0))
    with pytest.raises(NonFiniteError):
        net(np.array([[np.nan, 1.0]]))
    with pytest.raises(NonFiniteError):
        LSTMRegressor(hidden=2)(np.array([[np.inf, 0.0]]))


def test_rmsprop_first_step_by_hand():
    p = np.array([1.0])
    RMSprop([p], lr=1e-3, rho=0.9, eps=1e-8).step([np.array([1.0])])
    assert p[0] == pytest.approx(1.0 - 1e-3 / math.sqrt(0.1 + 1e-8), rel=1e-15)


def test_adam_first_step_moves_by_lr():
    p = np.array([2.0, -1.0])
    Adam([p], lr=1e-3).step([np.array([5.0, -0.2])])
    np.testing.assert_allclose(p, [2.0 - 1e-3, -1.0 + 1e-3], rtol=1e-6)


@pytest.mark.parametrize("opt_cls", [RMSprop, Adam])
def test_zero_gradient_leaves_parameters(opt_cls):
    p = np.array([0.3, -0.7])
    before = p.copy()
    opt = opt_cls([p])
    for _ in range(5):
        opt.step([np.zeros(2)])
    np.testing.assert_array_equal(p, before)


@pytest.mark.parametrize("opt_cls", [RMSprop, Adam])
def test_constant_gradient_moves_monotonically(opt_cls):
    p = np.array([0.0])
    opt = opt_cls([p])
    trace = []
    for _ in range(20):
        opt.step([np.array([1.0])])
        trace.append(p[0])
    assert np.all(np.diff(trace) < 0)


def test_optimizer_rejects_mismatched_grads():
    with pytest.raises(ValueError):
        Adam([np.zeros(2)]).step([])


def test_optimizer_reduces_least_squares_loss():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(64, 3))
    y = X @ np.array([[1.0], [-2.0], [0.5]])
    net = MLP([3, 1], "identity", "identity", rng)
    opt = Adam(net.params(), lr=1e-2)
    losses = []
    for _ in range(300):
        pred, cache = net.forward(X)
        losses.append(float(np.mean((pred - y) ** 2)))
        _, grads = net.backward(cache, 2.0 * (pred - y) / len(y))
        opt.step(grads)
    assert losses[-1] < 1e-3 * losses[0]


def test_soft_update_limits_and_mix():
    main = [np.array([1.0, 2.0]), np.array([[3.0]])]
    target = [np.array([0.0, 0.0]), np.array([[-1.0]])]
    t0 = [t.copy() for t in target]
    soft_update(main, target, 0.0)
    for a, b in zip(target, t0):
        np.testing.assert_array_equal(a, b)
    soft_update(main, target, 0.01)
    np.testing.assert_allclose(target[0], [0.01, 0.02], rtol=1e-15)
    np.testing.assert_allclose(target[1], [[0.99 * -1.0 + 0.03]], rtol=1e-15)
    soft_update(main, target, 1.0)
    for a, b in zip(target, main):
        np.testing.assert_array_equal(a, b)


def test_soft_update_shape_mismatch():
    with pytest.raises(ValueError):
        soft_update([np.zeros(2)], [np.zeros(3)], 0.5)
    with pytest.raises(ValueError):
        soft_update([np.zeros(2)], [], 0.5)


def test_mlp_copy_is_independent():
    net = MLP([2, 4, 1], rng=np.random.default_rng(13))
    twin = net.copy()
    x = np.ones((1, 2))
    assert net(x).tobytes() == twin(x).tobytes()
    twin.params()[0] += 1.0
    assert net(x).tobytes() != twin(x).tobytes()


def test_checkpoint_roundtrip(tmp_path):
    net = MLP([3, 5, 2], rng=np.random.default_rng(14))
    path = tmp_path / "net.ckpt"
    save_arrays(path, [(f"p{i}", p) for i, p in enumerate(net.params())], meta={"k": 1})
    loaded, meta = load_arrays(path)
    assert meta == {"k": 1}
    other = MLP([3, 5, 2], rng=np.random.default_rng(15))
    assign(other.params(), [a for _, a in loaded])
    x = np.random.default_rng(16).normal(size=(4, 3))
    assert net(x).tobytes() == other(x).tobytes()


def test_checkpoint_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_arrays(tmp_path / "missing.ckpt")
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_arrays(bad)
    path = tmp_path / "ok.ckpt"
    save_arrays(path, [("w", np.zeros((2, 2)))])
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(CheckpointError):
        load_arrays(path)
    with pytest.raises(CheckpointError):
        assign([np.zeros(3)], [np.zeros(4)])
    with pytest.raises(CheckpointError):
        assign([np.zeros(3)], [])
