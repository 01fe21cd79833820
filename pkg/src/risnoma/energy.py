"""Hybrid RF/solar energy harvesting, RIS power draw and battery bookkeeping.

Slots last one second, so per-slot power (W) and energy (J) coincide.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelRealization
from .ris import RisControl, RisNoiseParams


class EnergyContractError(RuntimeError):
    """A step tried to spend more energy than the battery holds."""


@dataclass(frozen=True)
class RfHarvestParams:
    e_max: float = 0.024
    a: float = 150.0
    b: float = 0.014

    def __post_init__(self):
        if self.e_max <= 0 or self.a <= 0:
            raise ValueError("RF harvester needs positive saturation power and slope")


@dataclass(frozen=True)
class SolarParams:
    s_sol: float = 1e-3
    a1: float = -25.0
    a2: float = -12.0
    a3: float = 1000.0
    sigma_sol: float = 0.0

    def __post_init__(self):
        if self.s_sol < 0:
            raise ValueError("panel area must be non-negative")
        if not 0.0 <= self.sigma_sol <= 1.0:
            raise ValueError("cloud-cover fraction must lie in [0, 1]")


@dataclass(frozen=True)
class EnergyState:
    battery: float
    e_max_battery: float = 0.6
    last_harvest: float = 0.0
    last_consume: float = 0.0
    eta: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.battery <= self.e_max_battery:
            raise EnergyContractError(
                f"battery {self.battery} outside [0, {self.e_max_battery}]")


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def harvest_rf(p_rf, params: RfHarvestParams = RfHarvestParams()):
    """Saturating logistic rectifier, shifted so that zero input gives zero output."""
    p_rf = np.asarray(p_rf, dtype=float)
    if np.any(p_rf < 0):
        raise ValueError("incident RF power must be non-negative")
    psi = params.e_max * _logistic(params.a * (p_rf - params.b))
    omega = _logistic(-params.a * params.b)
    out = (psi - params.e_max * omega) / (1.0 - omega)
    return float(out) if out.ndim == 0 else out


def harvest_solar(hour: float, params: SolarParams = SolarParams()) -> float:
    """Quadratic time-of-day irradiance on the panel, zero at night."""
    irradiance = params.a1 * (hour + params.a2) ** 2 + params.a3
    return max(0.0, params.s_sol * irradiance * (1.0 - params.sigma_sol))


def ris_consumption(ch: ChannelRealization, ctrl: RisControl, noise: RisNoiseParams,
                    scale: float = 1.0) -> float:
    """Power drawn by the amplifiers: reflected signal power plus amplified noise.

    ``scale`` converts the radiated power into supply power (amplifier
    inefficiency); 1.0 means the bare radiated power.
    """
    amp_sq = ctrl.amp ** 2
    signal = float(amp_sq @ (np.abs(ch.h_bs_ris) ** 2))
    return scale * (signal + float(amp_sq.sum()) * noise.sigma_z_sq)


def battery_step(state: EnergyState, e_h: float, e_c: float) -> tuple[EnergyState, float]:
    """Advance the battery one slot.

    Returns the new state and the energy lost to the capacity cap, so that
    ``eta*e_h - e_c - overflow`` equals the change in stored energy.
    """
    if e_c < 0 or e_h < 0:
        raise EnergyContractError("harvest and consumption must be non-negative")
    if e_c > state.battery:
        raise EnergyContractError(
            f"consumption {e_c!r} exceeds stored energy {state.battery!r}")
    uncapped = state.battery + state.eta * e_h - e_c
    battery = min(uncapped, state.e_max_battery)
    overflow = uncapped - battery
    return replace(state, battery=battery, last_harvest=e_h, last_consume=e_c), overflow
