"""LSTM cell, sequence layer with backpropagation through time, and a stacked
LSTM regressor for one-step-ahead scalar forecasting.

Gate blocks are stacked in the order forget, input, candidate, output, so the
input weights ``W`` have shape ``(4H, n_in)``, the recurrent weights ``U``
``(4H, H)`` and the bias ``b`` ``(4H,)``.
"""
from __future__ import annotations

import numpy as np

from .layers import ContractViolation, Dense, check_finite, sigmoid, xavier_uniform

FORGET, INPUT, CANDIDATE, OUTPUT = range(4)


def lstm_cell_forward(W, U, b, d_t, h_prev, c_prev):
    """One LSTM step on a batch.

    ``d_t`` is ``(B, n_in)``; ``h_prev`` and ``c_prev`` are ``(B, H)``.
    Returns ``(h_t, c_t, cache)``.
    """
    H = U.shape[1]
    z = d_t @ W.T + h_prev @ U.T + b
    f = sigmoid(z[:, :H])
    i = sigmoid(z[:, H:2 * H])
    g = np.tanh(z[:, 2 * H:3 * H])
    o = sigmoid(z[:, 3 * H:])
    c_t = f * c_prev + i * g
    tanh_c = np.tanh(c_t)
    h_t = o * tanh_c
    return h_t, c_t, (d_t, h_prev, c_prev, f, i, g, o, tanh_c)


def lstm_cell_backward(W, U, cache, dh, dc):
    """Backward through one step; returns ``(dx, dh_prev, dc_prev, dz)``."""
    d_t, h_prev, c_prev, f, i, g, o, tanh_c = cache
    do = dh * tanh_c
    dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
    df = dc * c_prev
    di = dc * g
    dg = dc * i
    dz = np.concatenate([
        df * f * (1.0 - f),
        di * i * (1.0 - i),
        dg * (1.0 - g * g),
        do * o * (1.0 - o),
    ], axis=1)
    return dz @ W, dz @ U, dc * f, dz


class LSTMLayer:
    """Single LSTM layer unrolled over a ``(B, T, n_in)`` sequence."""

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator | None = None,
                 forget_bias: float = 1.0):
        rng = rng if rng is not None else np.random.default_rng(0)
        H = n_hidden
        self.W = np.concatenate([xavier_uniform(rng, H, n_in) for _ in range(4)])
        self.U = np.concatenate([xavier_uniform(rng, H, H) for _ in range(4)])
        self.b = np.zeros(4 * H)
        self.b[:H] = forget_bias

    @property
    def n_hidden(self) -> int:
        return self.U.shape[1]

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.W, self.U, self.b]

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ValueError(f"LSTMLayer expects (batch, time, {self.n_in}), got {x.shape}")
        B, T, _ = x.shape
        h = np.zeros((B, self.n_hidden))
        c = np.zeros((B, self.n_hidden))
        hs = np.empty((B, T, self.n_hidden))
        caches = []
        for t in range(T):
            h, c, cache = lstm_cell_forward(self.W, self.U, self.b, x[:, t, :], h, c)
            hs[:, t, :] = h
            caches.append(cache)
        check_finite(hs, "lstm hidden states")
        return hs, caches

    def backward(self, caches, dhs: np.ndarray):
        if not caches:
            raise ContractViolation("backward called without a forward cache")
        B, T, H = dhs.shape
        dW = np.zeros_like(self.W)
        dU = np.zeros_like(self.U)
        db = np.zeros_like(self.b)
        dx = np.empty((B, T, self.n_in))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in reversed(range(T)):
            cache = caches[t]
            dx_t, dh_next, dc_next, dz = lstm_cell_backward(
                self.W, self.U, cache, dhs[:, t, :] + dh_next, dc_next)
            dW += dz.T @ cache[0]
            dU += dz.T @ cache[1]
            db += dz.sum(axis=0)
            dx[:, t, :] = dx_t
        return dx, [dW, dU, db]


class LSTMRegressor:
    """Stacked LSTM over a window of scalars with a linear read-out of the last
    hidden state.

    With ``residual=True`` the most recent input value is added to the
    read-out, so the network learns a correction to persistence.
    """

    def __init__(self, hidden: int = 64, n_layers: int = 2, residual: bool = True,
                 rng: np.random.Generator | None = None, head_init_scale: float = 1e-3):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layers = [LSTMLayer(1 if k == 0 else hidden, hidden, rng=rng) for k in range(n_layers)]
        self.head = Dense(hidden, 1, "identity", rng=rng, init_scale=head_init_scale)
        self.residual = residual

    def params(self) -> list[np.ndarray]:
        out = [p for layer in self.layers for p in layer.params()]
        return out + self.head.params()

    def forward(self, windows: np.ndarray):
        """``windows`` is ``(B, T)``; returns raw predictions ``(B,)`` and caches."""
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 2:
            raise ValueError(f"expected (batch, time) windows, got {windows.shape}")
        check_finite(windows, "lstm input windows")
        x = windows[:, :, None]
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        y, head_cache = self.head.forward(x[:, -1, :])
        y = y[:, 0]
        if self.residual:
            y = y + windows[:, -1]
        return y, (caches, head_cache, x.shape)

    def __call__(self, windows: np.ndarray) -> np.ndarray:
        return self.forward(windows)[0]

    def backward(self, cache, dy: np.ndarray):
        """Gradients of a scalar loss given ``dy = dLoss/dprediction``."""
        if cache is None:
            raise ContractViolation("backward called without a forward cache")
        caches, head_cache, (B, T, H) = cache
        dlast, head_grads = self.head.backward(head_cache, dy[:, None])
        dhs = np.zeros((B, T, H))
        dhs[:, -1, :] = dlast
        grads: list[np.ndarray] = []
        for layer, layer_cache in zip(reversed(self.layers), reversed(caches)):
            dhs, g = layer.backward(layer_cache, dhs)
            grads = g + grads
        return grads + head_grads
