"""Experiment configuration: nested dataclasses loaded from JSON.

Every field has a default, so a config file only lists what it changes.
Unknown keys and out-of-range values raise :class:`ConfigError` naming the
offending field.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass
class GeometryConfig:
    n_users: int = 4
    bs: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    ris: list = field(default_factory=lambda: [100.0, 100.0, 50.0])
    user_r_min: float = 200.0
    user_r_max: float = 500.0
    geometry_seed: int = 123
    wavelength: float = 0.1
    element_spacing: float = 0.25   # in wavelengths
    element_area: float = 1.0
    c0_db: float = -30.0
    alpha_direct: float = 3.5
    alpha_bs_ris: float = 2.2
    alpha_ris_user: float = 2.2


@dataclass
class RisConfig:
    kind: str = "active"            # active | passive | none
    n_elements: int = 16
    max_amp: float = 25.0
    sigma_z_dbm: float = -100.0
    sigma_s_dbm: float | None = None


@dataclass
class NomaConfig:
    access: str = "noma"            # noma | oma
    p_tx: float | list = 0.01
    xi: float = 0.9
    sigma_dbm: float = -100.0
    r0: float = 0.6
    bandwidth: float = 1e6


@dataclass
class EnergyConfig:
    battery_max: float = 0.6
    initial_battery: float | None = None   # None -> full
    eta: float = 0.9
    harvest_cap: float = 0.6
    consumption_scale: float = 1e3
    rf_e_max: float = 0.024
    rf_a: float = 150.0
    rf_b: float = 0.014
    solar_area: float = 1e-3
    solar_a1: float = -25.0
    solar_a2: float = -12.0
    solar_a3: float = 1000.0
    random_cloud: bool = True
    start_hour: float = 12.0
    hours_per_slot: float = 1.0 / 3600.0


@dataclass
class UcsConfig:
    initial: float = 0.6
    step: float = 0.1
    t_s: int = 5


@dataclass
class PredictorConfig:
    series_length: int = 1000
    split: float = 0.7
    hidden: int = 64
    n_layers: int = 2
    residual: bool = True
    mirror: bool = True
    epochs: int = 20
    lr: float = 1e-4
    batch_size: int = 32
    seed: int = 0
    state_mode: str = "threshold"   # threshold | bernoulli | probability


@dataclass
class AgentConfig:
    algo: str = "ddpg"              # ddpg | ac
    hidden: list = field(default_factory=lambda: [256, 256, 128])
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    tau: float = 0.01
    gamma: float = 0.95
    batch_size: int = 40
    memory: int = 10000
    noise_start: float = 0.3
    noise_end: float = 0.02
    anneal_fraction: float = 0.6
    final_init: float | None = 3e-3


@dataclass
class RunConfig:
    policy: str = "ddpg"            # ddpg | ac | random | off
    episodes: int = 50
    steps: int = 100
    eval_episodes: int = 10
    eval_seed_offset: int = 10_000
    reward_scale: float = 10.0
    seed: int = 0


@dataclass
class Config:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    ris: RisConfig = field(default_factory=RisConfig)
    noma: NomaConfig = field(default_factory=NomaConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    ucs: UcsConfig = field(default_factory=UcsConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    run: RunConfig = field(default_factory=RunConfig)
    name: str = "experiment"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **dotted) -> "Config":
        """Copy with overrides given as ``section__field=value``."""
        data = self.to_dict()
        for key, value in dotted.items():
            section, _, name = key.partition("__")
            if section not in data:
                raise ConfigError(f"unknown config section {section!r}")
            if name:
                data[section][name] = value
            else:
                data[section] = value
        return from_dict(data)

    def validate(self) -> "Config":
        g, r, n, e, u, p, a, run = (self.geometry, self.ris, self.noma, self.energy, self.ucs,
                                    self.predictor, self.agent, self.run)
        checks = [
            ("geometry.n_users", lambda: g.n_users >= 1),
            ("geometry.user_r_min", lambda: 1.0 <= g.user_r_min <= g.user_r_max),
            ("geometry.element_spacing", lambda: g.element_spacing > 0),
            ("geometry.element_area", lambda: g.element_area > 0),
            ("geometry.ris", lambda: len(g.ris) == 3 and g.ris[2] > 0),
            ("geometry.bs", lambda: len(g.bs) == 3),
            ("ris.kind", lambda: r.kind in ("active", "passive", "none")),
            ("ris.n_elements", lambda: r.n_elements >= 1),
            ("ris.max_amp", lambda: r.max_amp >= 1),
            ("noma.access", lambda: n.access in ("noma", "oma")),
            ("noma.xi", lambda: 0 < n.xi <= 1),
            ("noma.r0", lambda: n.r0 > 0),
            ("noma.p_tx", lambda: _positive_powers(n.p_tx, g.n_users)),
            ("energy.battery_max", lambda: e.battery_max > 0),
            ("energy.initial_battery", lambda: e.initial_battery is None
             or 0 <= e.initial_battery <= e.battery_max),
            ("energy.eta", lambda: 0 < e.eta <= 1),
            ("energy.harvest_cap", lambda: e.harvest_cap >= 0),
            ("energy.consumption_scale", lambda: e.consumption_scale > 0),
            ("energy.rf_a", lambda: e.rf_a > 0 and e.rf_e_max > 0),
            ("energy.solar_area", lambda: e.solar_area >= 0),
            ("ucs.initial", lambda: 0 <= u.initial <= 1),
            ("ucs.t_s", lambda: u.t_s >= 1),
            ("predictor.series_length", lambda: p.series_length > u.t_s),
            ("predictor.split", lambda: 0 < p.split <= 1),
            ("predictor.state_mode", lambda: p.state_mode in ("threshold", "bernoulli", "probability")),
            ("agent.algo", lambda: a.algo in ("ddpg", "ac")),
            ("agent.tau", lambda: 0 < a.tau <= 1),
            ("agent.gamma", lambda: 0 <= a.gamma < 1),
            ("agent.batch_size", lambda: a.batch_size >= 1),
            ("agent.memory", lambda: a.memory >= 3 * a.batch_size),
            ("agent.noise_start", lambda: a.noise_start >= a.noise_end >= 0),
            ("agent.anneal_fraction", lambda: 0 < a.anneal_fraction <= 1),
            ("run.policy", lambda: run.policy in ("ddpg", "ac", "random", "off")),
            ("run.episodes", lambda: run.episodes >= 1),
            ("run.steps", lambda: run.steps >= 1),
            ("run.seed", lambda: run.seed >= 0),
            ("run.reward_scale", lambda: run.reward_scale > 0),
        ]
        bad = []
        for name, check in checks:
            try:
                ok = check()
            except TypeError:
                ok = False
            if not ok:
                bad.append(name)
        if bad:
            raise ConfigError("invalid config field(s): " + ", ".join(bad))
        return self

    # derived physical quantities ---------------------------------------

    @property
    def p_tx_vector(self) -> list[float]:
        p = self.noma.p_tx
        return list(p) if isinstance(p, list) else [float(p)] * self.geometry.n_users


def _positive_powers(p, k) -> bool:
    if isinstance(p, list):
        return len(p) == k and all(x > 0 for x in p)
    return p > 0


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get(name) if cls is Config else None
        kwargs[name] = _build(sub, value, name) if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


_SECTIONS = {
    "geometry": GeometryConfig, "ris": RisConfig, "noma": NomaConfig, "energy": EnergyConfig,
    "ucs": UcsConfig, "predictor": PredictorConfig, "agent": AgentConfig, "run": RunConfig,
}


def from_dict(data: dict) -> Config:
    return _build(Config, data, "config").validate()


def load_config(path) -> Config:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from None
    return from_dict(data)
