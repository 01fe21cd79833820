"""Downlink NOMA with imperfect successive interference cancellation, plus an
equal-share TDMA (OMA) comparator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NomaParams:
    p_tx: tuple
    xi: float = 0.9
    sigma_sq: float = 1e-13
    r0: float = 0.6
    bandwidth: float = 1e6

    def __post_init__(self):
        p = np.asarray(self.p_tx, dtype=float)
        if p.ndim != 1 or np.any(p <= 0):
            raise ValueError("transmit powers must be a vector of positive values")
        if not 0 < self.xi <= 1:
            raise ValueError(f"xi must lie in (0, 1], got {self.xi}")
        if self.sigma_sq <= 0 or self.r0 <= 0:
            raise ValueError("noise power and rate threshold must be positive")
        object.__setattr__(self, "p_tx", tuple(float(x) for x in p))

    @property
    def powers(self) -> np.ndarray:
        return np.asarray(self.p_tx)


@dataclass
class SlotRates:
    """Per-user rates (bits/s/Hz), success flags and the decode order."""

    rates: np.ndarray
    decoded: np.ndarray
    order: list = field(default_factory=list)
    active: int = 0

    @property
    def successes(self) -> int:
        return int(np.count_nonzero(self.decoded))

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())


def channel_power(h) -> np.ndarray:
    """``|h|^2`` as ``re^2 + im^2`` (no square root, so no extra rounding)."""
    h = np.asarray(h, dtype=complex)
    return h.real * h.real + h.imag * h.imag


def signal_strengths(active, h, params: NomaParams) -> np.ndarray:
    """``g_k = U_k |h_k|^2 p_k``."""
    active = np.asarray(active, dtype=bool)
    return np.where(active, channel_power(h) * params.powers, 0.0)


def decode_order(strengths: np.ndarray, active) -> list[int]:
    """Active users by descending strength; ties go to the lower index."""
    idx = np.flatnonzero(np.asarray(active, dtype=bool))
    return [int(k) for k in idx[np.argsort(-strengths[idx], kind="stable")]]


def sic_decode(strengths, h, active, ris_noise, params: NomaParams) -> SlotRates:
    """Decode active users strongest-first.

    A stronger user that was decoded successfully leaves only ``1 - xi`` of
    its power as residual interference; everyone else interferes fully.
    Decoding continues past failures.
    """
    active = np.asarray(active, dtype=bool)
    strengths = np.asarray(strengths, dtype=float)
    k_users = len(active)
    power = channel_power(h) * params.powers
    order = decode_order(strengths, active)
    decoded = np.zeros(k_users, dtype=bool)
    rates = np.zeros(k_users)
    active_idx = [int(j) for j in np.flatnonzero(active)]
    for k in order:
        residual = 0.0
        for j in active_idx:
            if j == k:
                continue
            cancelled = decoded[j] and power[j] > power[k]
            residual += (1.0 - (params.xi if cancelled else 0.0)) * power[j]
        sinr = strengths[k] / (residual + ris_noise[k] + params.sigma_sq)
        rates[k] = math.log2(1.0 + sinr)
        decoded[k] = rates[k] >= params.r0
    return SlotRates(rates, decoded, order, active=len(active_idx))


def oma_rates(active, h, ris_noise, params: NomaParams) -> SlotRates:
    """Each active user gets ``1/N`` of the slot without interference."""
    active = np.asarray(active, dtype=bool)
    n = int(active.sum())
    g = signal_strengths(active, h, params)
    rates = np.zeros(len(active))
    if n:
        rates[active] = np.log2(1.0 + g[active] / (ris_noise[active] + params.sigma_sq)) / n
    decoded = active & (rates >= params.r0)
    return SlotRates(rates, decoded, [int(k) for k in np.flatnonzero(active)], active=n)


def success_ratio(slot: SlotRates) -> float:
    """Fraction of active users meeting the threshold; 1.0 for an empty slot."""
    if slot.active == 0:
        return 1.0
    return slot.successes / slot.active
