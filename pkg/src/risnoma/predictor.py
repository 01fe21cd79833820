"""Per-user LSTM forecasters of the next-slot communication probability."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .neural import LSTMRegressor, RMSprop
from .neural.checkpoint import assign, load_arrays, save_arrays
from .neural.layers import ContractViolation
from .ucs import UcsDataset, make_dataset


def mirrored(data: UcsDataset) -> UcsDataset:
    """Append the reflected copies ``1 - window -> 1 - label``.

    The clamped walk has the same law under ``p -> 1 - p``, so the reflection
    is a valid sample of the same process. It shows the model both
    boundaries even when a short history only visited one of them.
    """
    return UcsDataset(np.concatenate([data.windows, 1.0 - data.windows]),
                      np.concatenate([data.labels, 1.0 - data.labels]))


class PredictorError(ValueError):
    pass


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((np.asarray(pred) - np.asarray(target)) ** 2))


def train_regressor(model: LSTMRegressor, data: UcsDataset, epochs: int = 30, lr: float = 1e-3,
                    batch_size: int = 32, rng: np.random.Generator | None = None) -> list[float]:
    """Minibatch RMSprop on mean squared error; returns the mean loss of each epoch."""
    if len(data) == 0:
        raise PredictorError("cannot train on an empty dataset")
    rng = rng if rng is not None else np.random.default_rng(0)
    opt = RMSprop(model.params(), lr=lr)
    n = len(data)
    history = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            y, cache = model.forward(data.windows[idx])
            err = y - data.labels[idx]
            total += float(err @ err)
            opt.step(model.backward(cache, 2.0 * err / len(idx)))
        history.append(total / n)
    return history


@dataclass
class FitReport:
    train_loss: list = field(default_factory=list)   # per user, per epoch
    test_mse: list = field(default_factory=list)     # per user
    persistence_mse: list = field(default_factory=list)


class UcsPredictor:
    """One stacked-LSTM regressor per user, read out as a probability in [0, 1]."""

    def __init__(self, k_users: int, t_s: int = 5, hidden: int = 64, n_layers: int = 2,
                 residual: bool = True, seed: int = 0, mirror: bool = True):
        self.mirror = mirror
        self.k_users = k_users
        self.t_s = t_s
        self.hidden = hidden
        self.n_layers = n_layers
        self.residual = residual
        self.seed = seed
        self.models = [
            LSTMRegressor(hidden=hidden, n_layers=n_layers, residual=residual,
                          rng=streams.stream(seed, streams.PREDICTOR, k))
            for k in range(k_users)
        ]
        self.trained = False

    def fit(self, series: np.ndarray, epochs: int = 30, lr: float = 1e-3, batch_size: int = 32,
            split: float = 0.7) -> FitReport:
        """Train user ``k`` on column ``k`` of ``series``; evaluate on the held-out tail."""
        series = np.asarray(series, dtype=float)
        if series.ndim != 2 or series.shape[1] != self.k_users:
            raise PredictorError(f"series must be (slots, {self.k_users})")
        report = FitReport()
        for k, model in enumerate(self.models):
            train, test = make_dataset(series[:, k], self.t_s, split)
            if self.mirror:
                train = mirrored(train)
            hist = train_regressor(model, train, epochs, lr, batch_size,
                                   rng=streams.stream(self.seed, streams.PREDICTOR, 1000 + k))
            report.train_loss.append(hist)
            if len(test):
                report.test_mse.append(mse(np.clip(model(test.windows), 0, 1), test.labels))
                report.persistence_mse.append(mse(test.windows[:, -1], test.labels))
        self.trained = True
        return report

    def _require_trained(self):
        if not self.trained:
            raise ContractViolation("predictor used before training or loading")

    def predict(self, user: int, windows: np.ndarray) -> np.ndarray:
        """Probability estimates for a ``(B, t_s)`` batch (or one ``(t_s,)`` window)."""
        self._require_trained()
        windows = np.asarray(windows, dtype=float)
        single = windows.ndim == 1
        windows = np.atleast_2d(windows)
        if windows.shape[1] != self.t_s:
            raise PredictorError(f"windows must hold {self.t_s} slots, got {windows.shape[1]}")
        p = np.clip(self.models[user](windows), 0.0, 1.0)
        return p[0] if single else p

    def predict_state(self, user: int, windows: np.ndarray) -> np.ndarray:
        """Predicted on/off indicator; a probability of exactly 0.5 counts as active."""
        return (self.predict(user, windows) >= 0.5).astype(int)

    def predict_series(self, series: np.ndarray) -> np.ndarray:
        """Rolling one-step forecasts for slots ``t_s..`` of a ``(slots, K)`` series.

        Row ``i`` of the result forecasts slot ``i + t_s`` from slots
        ``i .. i+t_s-1`` only.
        """
        series = np.asarray(series, dtype=float)
        n = len(series) - self.t_s
        idx = np.arange(n)[:, None] + np.arange(self.t_s)[None, :]
        out = np.empty((n, self.k_users))
        for k in range(self.k_users):
            out[:, k] = self.predict(k, series[idx, k])
        return out

    # persistence ------------------------------------------------------

    def meta(self) -> dict:
        return {"kind": "ucs-predictor", "k_users": self.k_users, "t_s": self.t_s,
                "hidden": self.hidden, "n_layers": self.n_layers, "residual": self.residual,
                "seed": self.seed, "mirror": self.mirror}

    def save(self, path) -> None:
        self._require_trained()
        named = [(f"user{k}/p{i}", p) for k, m in enumerate(self.models)
                 for i, p in enumerate(m.params())]
        save_arrays(path, named, self.meta())

    @classmethod
    def load(cls, path) -> "UcsPredictor":
        arrays, meta = load_arrays(path)
        if meta.get("kind") != "ucs-predictor":
            raise PredictorError(f"{path} is not a predictor checkpoint")
        obj = cls(meta["k_users"], meta["t_s"], meta["hidden"], meta["n_layers"],
                  meta["residual"], meta["seed"], meta.get("mirror", True))
        flat = [a for _, a in arrays]
        n_per = len(obj.models[0].params())
        if len(flat) != n_per * obj.k_users:
            raise PredictorError(f"{path}: expected {n_per * obj.k_users} tensors, got {len(flat)}")
        for k, m in enumerate(obj.models):
            assign(m.params(), flat[k * n_per:(k + 1) * n_per])
        obj.trained = True
        return obj


def write_pred_vs_true(path, series: np.ndarray, predicted: np.ndarray, t_s: int) -> None:
    """Long-format CSV: slot, user, true probability, predicted probability."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "user", "true", "predicted"])
        for i in range(predicted.shape[0]):
            for k in range(predicted.shape[1]):
                w.writerow([i + t_s, k, repr(float(series[i + t_s, k])), repr(float(predicted[i, k]))])
