"""User communication state: random-walk activity probabilities, Bernoulli
on/off draws, and windowed datasets for the predictor."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

STEP = 0.1


@dataclass
class UcsState:
    prob: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        self.prob = np.asarray(self.prob, dtype=float)
        self.active = np.asarray(self.active, dtype=bool)
        if np.any(self.prob < 0) or np.any(self.prob > 1):
            raise ValueError("communication probabilities must lie in [0, 1]")


def sample_active(prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # u < p is never true for p = 0 and always true for p = 1
    return rng.random(prob.shape) < prob


def walk_step(state: UcsState, rng: np.random.Generator, step: float = STEP) -> UcsState:
    prob = np.clip(state.prob + rng.uniform(-step, step, size=state.prob.shape), 0.0, 1.0)
    return UcsState(prob, sample_active(prob, rng))


def generate_series(k_users: int, length: int = 1000, initial: float = 0.6,
                    rng: np.random.Generator | None = None, step: float = STEP,
                    t_s: int = 5) -> np.ndarray:
    """Independent clamped random walks, shape ``(length, k_users)``; row 0 is ``initial``."""
    if length <= t_s:
        raise ValueError(f"series length {length} must exceed the window length {t_s}")
    rng = rng if rng is not None else np.random.default_rng(0)
    out = np.empty((length, k_users))
    out[0] = initial
    steps = rng.uniform(-step, step, size=(length - 1, k_users))
    for t in range(1, length):
        out[t] = np.clip(out[t - 1] + steps[t - 1], 0.0, 1.0)
    return out


@dataclass
class UcsDataset:
    windows: np.ndarray  # (n, t_s)
    labels: np.ndarray   # (n,)

    def __len__(self) -> int:
        return len(self.labels)


def make_windows(series: np.ndarray, t_s: int = 5) -> UcsDataset:
    """Window ``i`` holds slots ``[i, i+t_s)`` and is labelled with slot ``i+t_s``."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or len(series) <= t_s:
        raise ValueError(f"need a 1-D series longer than {t_s} slots")
    n = len(series) - t_s
    idx = np.arange(n)[:, None] + np.arange(t_s)[None, :]
    return UcsDataset(series[idx], series[t_s:].copy())


def split_dataset(data: UcsDataset, split: float = 0.7) -> tuple[UcsDataset, UcsDataset]:
    """Chronological split: the first ``floor(split*n)`` pairs train, the rest test."""
    if not 0.0 < split <= 1.0:
        raise ValueError(f"split must lie in (0, 1], got {split}")
    n_train = int(np.floor(split * len(data) + 1e-9))  # guard against 0.7*n landing a hair low
    if n_train == len(data):
        warnings.warn("train/test split leaves an empty test set", stacklevel=2)
    return (UcsDataset(data.windows[:n_train], data.labels[:n_train]),
            UcsDataset(data.windows[n_train:], data.labels[n_train:]))


def make_dataset(series: np.ndarray, t_s: int = 5, split: float = 0.7):
    return split_dataset(make_windows(series, t_s), split)


def write_series_csv(path, series: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot"] + [f"user{k}" for k in range(series.shape[1])])
        for t, row in enumerate(series):
            w.writerow([t] + [repr(float(x)) for x in row])
