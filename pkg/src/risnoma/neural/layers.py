"""Dense layers and multilayer perceptrons with explicit backward passes.

Every ``forward`` returns ``(output, cache)`` and every ``backward`` consumes
that cache, so one network can be evaluated on several inputs before any
gradient is taken (the DDPG critic is run on replay actions and on actor
actions in the same update).
"""
from __future__ import annotations

import numpy as np

ACTIVATIONS = ("tanh", "sigmoid", "relu", "identity")


class ContractViolation(RuntimeError):
    """Raised when a caller breaks an operation's precondition."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf is produced by a numeric op."""


def check_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values in {what}")
    return x


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation ``z`` (output ``y``)."""
    if name == "identity":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - y * y
    if name == "sigmoid":
        return y * (1.0 - y)
    raise ValueError(f"unknown activation {name!r}")


def pack(arrays: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Copy ``arrays`` into one contiguous buffer and return it with views."""
    flat = np.concatenate([a.ravel() for a in arrays]) if arrays else np.zeros(0)
    views, offset = [], 0
    for a in arrays:
        views.append(flat[offset:offset + a.size].reshape(a.shape))
        offset += a.size
    return flat, views


def flatten(grads: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([g.ravel() for g in grads])


def xavier_uniform(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


class Dense:
    """Fully connected layer ``activation(W @ x + b)`` on row-batched input."""

    def __init__(self, n_in: int, n_out: int, activation: str = "identity",
                 rng: np.random.Generator | None = None, init_scale: float | None = None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.activation = activation
        if init_scale is None:
            self.W = xavier_uniform(rng, n_out, n_in)
        else:
            self.W = rng.uniform(-init_scale, init_scale, size=(n_out, n_in))
        self.b = np.zeros(n_out)

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"Dense expects (batch, {self.n_in}) input, got {x.shape}")
        z = x @ self.W.T + self.b
        y = activate(self.activation, z)
        check_finite(y, "dense output")
        return y, (x, z, y)

    def backward(self, cache, dy: np.ndarray):
        if cache is None:
            raise ContractViolation("backward called without a forward cache")
        x, z, y = cache
        dz = dy * activation_grad(self.activation, z, y)
        dW = dz.T @ x
        db = dz.sum(axis=0)
        dx = dz @ self.W
        return dx, [dW, db]


class MLP:
    """Stack of :class:`Dense` layers."""

    def __init__(self, sizes: list[int], hidden_activation: str = "relu",
                 output_activation: str = "identity", rng: np.random.Generator | None = None,
                 final_init_scale: float | None = None):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output size")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layers: list[Dense] = []
        n_layers = len(sizes) - 1
        for i in range(n_layers):
            last = i == n_layers - 1
            self.layers.append(Dense(
                sizes[i], sizes[i + 1],
                output_activation if last else hidden_activation,
                rng=rng,
                init_scale=final_init_scale if last else None,
            ))
        self._pack()

    def _pack(self) -> None:
        self.flat, views = pack(self.params())
        for k, layer in enumerate(self.layers):
            layer.W, layer.b = views[2 * k], views[2 * k + 1]

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, caches, dy: np.ndarray):
        """Return ``(d input, grads)`` with grads aligned to :meth:`params`."""
        if caches is None or len(caches) != len(self.layers):
            raise ContractViolation("backward called without a matching forward cache")
        grads: list[np.ndarray] = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy, g = layer.backward(cache, dy)
            grads = g + grads
        return dy, grads

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.layers = []
        for layer in self.layers:
            twin = Dense.__new__(Dense)
            twin.activation = layer.activation
            twin.W = layer.W
            twin.b = layer.b
            clone.layers.append(twin)
        clone._pack()
        return clone


def dense_forward(layer: Dense, x: np.ndarray):
    """Functional alias: ``activation(W x + b)`` plus the cache."""
    return layer.forward(x)
