"""Seeded random streams.

Every consumer of randomness gets its own counter-based Philox generator keyed
by ``(seed, stream)``. Streams are therefore independent of one another and of
how many numbers any other stream has consumed; e.g. the direct-link fading
sequence is the same whatever the RIS size is.
"""
from __future__ import annotations

import numpy as np

# stream identifiers; values are part of the reproducibility contract
DIRECT = 1
CASCADE = 2
UCS = 3
SOLAR = 4
POLICY = 5
AGENT_INIT = 6
EXPLORATION = 7
REPLAY = 8
PREDICTOR = 9
GEOMETRY = 10


def stream(seed: int, stream_id: int, *extra: int) -> np.random.Generator:
    """Philox generator for ``(seed, stream_id, *extra)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream_id, *extra])))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian draws, E|w|^2 = 1.

    Polar Box-Muller: |w|^2 is Exp(1) and the angle is uniform.
    """
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    radius = np.sqrt(-np.log1p(-u1))
    return radius * np.exp(2j * np.pi * u2)
