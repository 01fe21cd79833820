"""Slotted MDP over the RIS-aided EH-NOMA downlink.

State: predicted on/off indicator of every user plus the battery level.
Action: ``2M`` numbers in [0, 1] mapped to amplification ``[0, L]`` and phase
``[0, 2pi)``. Reward: ``r`` times the number of users meeting the rate
threshold in the slot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .channel import ChannelModel, ChannelRealization, PathLossParams, place_users, sample_channels
from .config import Config, dbm_to_watt
from .energy import (EnergyState, RfHarvestParams, SolarParams, battery_step, harvest_rf,
                     harvest_solar, ris_consumption)
from .noma import NomaParams, SlotRates, oma_rates, sic_decode, signal_strengths, success_ratio
from .ris import TWO_PI, RisControl, RisNoiseParams, equivalent_channels, ris_noise_powers
from .ucs import generate_series, sample_active

KEEP, SCALED, OFF = 1, 2, 3   # action-adjustment branches

# relative safety margin so the rescaled consumption cannot round above the budget
CLAMP_MARGIN = 1e-12
LEDGER_TOL = 1e-9


class InvariantViolation(RuntimeError):
    """A physical invariant broke during simulation (a bug, not bad input)."""


def decode_action(raw: np.ndarray, m: int, max_amp: float, kind: str = "active") -> RisControl:
    """Map an actor output in ``[0, 1]^{2M}`` onto amplification and phase."""
    raw = np.clip(np.asarray(raw, dtype=float), 0.0, 1.0)
    if raw.shape != (2 * m,):
        raise ValueError(f"action must have {2 * m} entries, got {raw.shape}")
    if kind == "none":
        return RisControl.off(m)
    phase = np.mod(TWO_PI * raw[m:], TWO_PI)
    phase[phase >= TWO_PI] = 0.0  # mod can round up to exactly 2pi
    amp = np.ones(m) if kind == "passive" else max_amp * raw[:m]
    return RisControl(amp, phase)


def encode_action(ctrl: RisControl, max_amp: float) -> np.ndarray:
    """Inverse of :func:`decode_action` for an active RIS."""
    return np.concatenate([ctrl.amp / max_amp, ctrl.phase / TWO_PI])


def adjust_action(ctrl: RisControl, ch: ChannelRealization, noise: RisNoiseParams, battery: float,
                  max_amp: float, scale: float = 1.0) -> tuple[RisControl, int, float]:
    """Make an action affordable with the stored energy.

    Keep it if it fits; otherwise divide every amplification by ``L`` if a
    unit-amplitude surface is affordable; otherwise switch the RIS off. A
    last multiplicative clamp guarantees the result never overdraws.
    Returns ``(control, branch, consumption)``.
    """
    e_c = ris_consumption(ch, ctrl, noise, scale)
    if e_c <= battery:
        return ctrl, KEEP, e_c
    e_c_unit = ris_consumption(ch, RisControl(np.ones(ctrl.m), ctrl.phase), noise, scale)
    if e_c_unit > battery:
        off = RisControl.off(ctrl.m)
        return off, OFF, 0.0
    scaled = RisControl(ctrl.amp / max_amp, ctrl.phase.copy())
    e_c = ris_consumption(ch, scaled, noise, scale)
    if e_c > battery:
        scaled.amp *= np.sqrt(battery / e_c) * (1.0 - CLAMP_MARGIN)
        e_c = ris_consumption(ch, scaled, noise, scale)
    return scaled, SCALED, e_c


@dataclass
class StepOutcome:
    next_state: np.ndarray
    reward: float
    slot: SlotRates
    energy: EnergyState
    branch: int
    control: RisControl
    executed: np.ndarray      # executed action in raw [0, 1] coordinates
    consumed: float
    harvested: float

    @property
    def vacuous(self) -> bool:
        return self.slot.active == 0

    @property
    def ratio(self) -> float:
        return success_ratio(self.slot)


class Environment:
    """One simulated cell; owns its random streams and battery."""

    def __init__(self, cfg: Config, predictor=None, seed: int | None = None, trace: bool = False):
        self.cfg = cfg
        self.seed = cfg.run.seed if seed is None else seed
        g, r, e = cfg.geometry, cfg.ris, cfg.energy
        self.k = g.n_users
        self.m = r.n_elements
        self.max_amp = r.max_amp
        self.kind = r.kind
        bs, ris = np.array(g.bs, float), np.array(g.ris, float)
        users = place_users(self.k, streams.stream(g.geometry_seed, streams.GEOMETRY), bs, ris,
                            g.user_r_min, g.user_r_max)
        pl = PathLossParams(g.c0_db, g.alpha_direct, g.alpha_bs_ris, g.alpha_ris_user)
        self.model = ChannelModel(bs, ris, users, self.m, pl, g.element_spacing, g.element_area)
        self.noma = NomaParams(tuple(cfg.p_tx_vector), cfg.noma.xi, dbm_to_watt(cfg.noma.sigma_dbm),
                               cfg.noma.r0, cfg.noma.bandwidth)
        sigma_s = 0.0 if r.sigma_s_dbm is None else dbm_to_watt(r.sigma_s_dbm)
        self.noise = RisNoiseParams(dbm_to_watt(r.sigma_z_dbm), sigma_s)
        self.rf = RfHarvestParams(e.rf_e_max, e.rf_a, e.rf_b)
        self.solar = SolarParams(e.solar_area, e.solar_a1, e.solar_a2, e.solar_a3, 0.0)
        self.predictor = predictor
        self.trace_rows: list[dict] | None = [] if trace else None

        self.rng_direct = streams.stream(self.seed, streams.DIRECT)
        self.rng_cascade = streams.stream(self.seed, streams.CASCADE)
        self.rng_ucs = streams.stream(self.seed, streams.UCS)
        self.rng_solar = streams.stream(self.seed, streams.SOLAR)
        self.rng_state = streams.stream(self.seed, streams.UCS, 1)

        self.clock = 0            # slots since construction (drives the solar clock)
        self.t = 0                # slot within the episode
        self.episode = -1
        self.ledger = {"harvested": 0.0, "consumed": 0.0, "overflow": 0.0, "initial": 0.0}
        self.energy: EnergyState | None = None
        self.channel: ChannelRealization | None = None

    # ------------------------------------------------------------------

    @property
    def state_dim(self) -> int:
        return self.k + 1

    @property
    def action_dim(self) -> int:
        return 2 * self.m

    def reset(self, n_steps: int | None = None) -> np.ndarray:
        """Start an episode: full battery, fresh UCS walks and channel block."""
        n_steps = self.cfg.run.steps if n_steps is None else n_steps
        t_s = self.cfg.ucs.t_s
        self.episode += 1
        self.t = 0
        self.n_steps = n_steps
        self.series = generate_series(self.k, t_s + n_steps + 1, self.cfg.ucs.initial,
                                      self.rng_ucs, self.cfg.ucs.step, t_s)
        # slot t of the episode is series row t + t_s; windows never include it
        self.true_active = sample_active(self.series[t_s:], self.rng_ucs)
        self.p_hat = self._forecast()
        e = self.cfg.energy
        initial = e.battery_max if e.initial_battery is None else e.initial_battery
        self.energy = EnergyState(initial, e.battery_max, eta=e.eta)
        self.ledger = {"harvested": 0.0, "consumed": 0.0, "overflow": 0.0, "initial": initial}
        self.channel = sample_channels(self.rng_direct, self.model, self.rng_cascade)
        self.state = self.observe()
        return self.state

    def _forecast(self) -> np.ndarray:
        """Forecast for every episode slot from the ``t_s`` preceding true slots."""
        t_s = self.cfg.ucs.t_s
        n = len(self.series) - t_s
        idx = np.arange(n)[:, None] + np.arange(t_s)[None, :]
        out = np.empty((n, self.k))
        for k in range(self.k):
            windows = self.series[idx, k]
            if self.predictor is None:
                out[:, k] = windows[:, -1]       # persistence forecast
            else:
                out[:, k] = self.predictor.predict(k, windows)
        return out

    def observe(self) -> np.ndarray:
        """State vector for the current slot (the forecast table has one spare
        row, so this also works right after the last step)."""
        p = self.p_hat[self.t]
        mode = self.cfg.predictor.state_mode
        if mode == "threshold":
            u = (p >= 0.5).astype(float)
        elif mode == "bernoulli":
            u = (self.rng_state.random(self.k) < p).astype(float)
        else:
            u = p.copy()
        return np.append(u, self.energy.battery)

    def solar_hour(self) -> float:
        e = self.cfg.energy
        return e.start_hour + self.clock * e.hours_per_slot

    def step(self, raw_action: np.ndarray) -> StepOutcome:
        if self.energy is None:
            raise InvariantViolation("step() called before reset()")
        if self.t >= self.n_steps:
            raise InvariantViolation("episode already finished; call reset()")
        e = self.cfg.energy
        ch = self.channel
        battery = self.energy.battery

        ctrl = decode_action(raw_action, self.m, self.max_amp, self.kind)
        ctrl, branch, e_c = adjust_action(ctrl, ch, self.noise, battery, self.max_amp,
                                          e.consumption_scale)
        if e_c > battery:
            raise InvariantViolation(f"adjusted consumption {e_c} exceeds battery {battery}")

        h = equivalent_channels(ch, ctrl)
        ris_noise = ris_noise_powers(ch, ctrl, self.noise)
        active = self.true_active[self.t]
        if self.cfg.noma.access == "noma":
            slot = sic_decode(signal_strengths(active, h, self.noma), h, active, ris_noise, self.noma)
        else:
            slot = oma_rates(active, h, ris_noise, self.noma)
        reward = self.cfg.run.reward_scale * slot.successes

        p_rf = float(self.noma.powers[active].sum()) * float(np.sum(np.abs(ch.h_bs_ris) ** 2))
        cloud = self.rng_solar.random() if e.random_cloud else 0.0
        solar = SolarParams(self.solar.s_sol, self.solar.a1, self.solar.a2, self.solar.a3, cloud)
        e_h = min(harvest_rf(p_rf, self.rf) + harvest_solar(self.solar_hour(), solar), e.harvest_cap)
        try:
            self.energy, overflow = battery_step(self.energy, e_h, e_c)
        except Exception as exc:  # any failure here is a simulator bug
            raise InvariantViolation(str(exc)) from exc
        self._account(e_h, e_c, overflow)

        if self.trace_rows is not None:
            self.trace_rows.append({
                "episode": self.episode, "slot": self.t, "state": self.state.tolist(),
                "branch": branch, "reward": reward, "active": slot.active,
                "successes": slot.successes, "ratio": success_ratio(slot),
                "sum_rate": slot.sum_rate, "consumed": e_c, "harvested": e_h,
                "battery": self.energy.battery,
            })

        self.t += 1
        self.clock += 1
        self.channel = sample_channels(self.rng_direct, self.model, self.rng_cascade)
        self.state = self.observe()
        executed = encode_action(ctrl, self.max_amp)
        return StepOutcome(self.state, reward, slot, self.energy, branch, ctrl, executed, e_c, e_h)

    def _account(self, e_h: float, e_c: float, overflow: float) -> None:
        led = self.ledger
        led["harvested"] += self.energy.eta * e_h
        led["consumed"] += e_c
        led["overflow"] += overflow
        b = self.energy.battery
        if not 0.0 <= b <= self.energy.e_max_battery:
            raise InvariantViolation(f"battery {b} left [0, {self.energy.e_max_battery}]")
        gap = led["initial"] + led["harvested"] - led["consumed"] - led["overflow"] - b
        if abs(gap) > LEDGER_TOL:
            raise InvariantViolation(f"energy ledger does not close (gap {gap:.3e} J)")

    def ledger_gap(self) -> float:
        led = self.ledger
        return led["initial"] + led["harvested"] - led["consumed"] - led["overflow"] - self.energy.battery
