"""Active RIS: reflection coefficients, equivalent channels and dynamic noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization

TWO_PI = 2.0 * np.pi


@dataclass
class RisControl:
    """Per-element amplification factors and phase shifts (radians)."""

    amp: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        self.amp = np.asarray(self.amp, dtype=float)
        self.phase = np.asarray(self.phase, dtype=float)
        if self.amp.shape != self.phase.shape or self.amp.ndim != 1:
            raise ValueError("amp and phase must be equal-length vectors")

    @classmethod
    def off(cls, m: int) -> "RisControl":
        return cls(np.zeros(m), np.zeros(m))

    @property
    def m(self) -> int:
        return self.amp.shape[0]

    def validate(self, max_amp: float, atol: float = 1e-12) -> None:
        if np.any(self.amp < -atol) or np.any(self.amp > max_amp + atol):
            raise ValueError(f"amplification outside [0, {max_amp}]")
        if np.any(self.phase < 0) or np.any(self.phase >= TWO_PI):
            raise ValueError("phase outside [0, 2pi)")

    def coefficients(self) -> np.ndarray:
        return self.amp * np.exp(1j * self.phase)


@dataclass(frozen=True)
class RisNoiseParams:
    sigma_z_sq: float = 1e-13
    sigma_s_sq: float = 0.0

    def __post_init__(self):
        if self.sigma_z_sq < 0 or self.sigma_s_sq < 0:
            raise ValueError("noise powers must be non-negative")


def _check_dims(ch: ChannelRealization, ctrl: RisControl) -> None:
    if ctrl.m != ch.m:
        raise ValueError(f"control has {ctrl.m} elements but channel has {ch.m}")


def equivalent_channels(ch: ChannelRealization, ctrl: RisControl) -> np.ndarray:
    """``h_k = h_Bk + sum_m H_Sk[m] amp[m] e^{j theta_m} H_BS[m]`` for all k."""
    _check_dims(ch, ctrl)
    return ch.h_direct + ch.h_ris_user @ (ctrl.coefficients() * ch.h_bs_ris)


def equivalent_channel(k: int, ch: ChannelRealization, ctrl: RisControl) -> complex:
    _check_dims(ch, ctrl)
    return complex(ch.h_direct[k] + ch.h_ris_user[k] @ (ctrl.coefficients() * ch.h_bs_ris))


def ris_noise_powers(ch: ChannelRealization, ctrl: RisControl, noise: RisNoiseParams) -> np.ndarray:
    """Dynamic-noise power reaching each user, ``sum_m |H_Sk[m]|^2 amp[m]^2 sigma_z^2``,
    plus the (default zero) static noise through the same cascade."""
    _check_dims(ch, ctrl)
    reflected = (np.abs(ch.h_ris_user) ** 2) @ (ctrl.amp ** 2)
    out = reflected * noise.sigma_z_sq
    if noise.sigma_s_sq:
        # static noise is reflected like the signal; only its power matters here
        out = out + reflected * noise.sigma_s_sq
    return out


def ris_noise_power(k: int, ch: ChannelRealization, ctrl: RisControl, noise: RisNoiseParams) -> float:
    return float(ris_noise_powers(ch, ctrl, noise)[k])
