"""Experiment orchestration: predictor preparation, baselines, training and
evaluation runs, sweeps, and the CSV/JSON outputs they produce."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import subprocess
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import rng as streams
from .config import Config
from .ddpg import Agent, run_episode, run_training
from .env import Environment
from .predictor import UcsPredictor
from .ris import TWO_PI, RisControl
from .ucs import generate_series

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["phase", "episode", "mean_reward", "mean_success_ratio", "mean_sum_rate",
                  "mean_battery", "vacuous_slots", "critic_loss"]

# policy label -> (run.policy, ris.kind)
POLICIES = {
    "ddpg": ("ddpg", "active"),
    "ac": ("ac", "active"),
    "passive-ddpg": ("ddpg", "passive"),
    "random-active": ("random", "active"),
    "random-passive": ("random", "passive"),
    "none": ("off", "none"),
}


def with_policy(cfg: Config, label: str) -> Config:
    policy, kind = POLICIES[label]
    return cfg.replace(run__policy=policy, ris__kind=kind)


# ---------------------------------------------------------------- predictor

def predictor_series(cfg: Config) -> np.ndarray:
    """Training history for every user, each from its own stream, so user
    ``k``'s history does not depend on how many users there are."""
    p, u = cfg.predictor, cfg.ucs
    cols = [generate_series(1, p.series_length, u.initial,
                            streams.stream(p.seed, streams.UCS, 100 + k), u.step, u.t_s)[:, 0]
            for k in range(cfg.geometry.n_users)]
    return np.stack(cols, axis=1)


def _predictor_key(cfg: Config) -> str:
    blob = json.dumps({"predictor": cfg.to_dict()["predictor"], "ucs": cfg.to_dict()["ucs"],
                       "k": cfg.geometry.n_users}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_predictor(cfg: Config, cache_dir=None):
    """Train (or load from ``cache_dir``) the per-user forecasters.

    Returns ``(predictor, report)``; ``report`` is None on a cache hit.
    """
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"predictor-{_predictor_key(cfg)}.ckpt"
        if path.exists():
            return UcsPredictor.load(path), None
    p = cfg.predictor
    model = UcsPredictor(cfg.geometry.n_users, cfg.ucs.t_s, p.hidden, p.n_layers, p.residual,
                         p.seed, p.mirror)
    report = model.fit(predictor_series(cfg), p.epochs, p.lr, p.batch_size, p.split)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        model.save(path)
    return model, report


# ---------------------------------------------------------------- baselines

def baseline_control(kind: str, rng: np.random.Generator, m: int, max_amp: float) -> RisControl:
    """Per-slot RIS setting of a non-learning baseline."""
    if kind == "random-active":
        return RisControl(rng.uniform(0.0, max_amp, m), rng.uniform(0.0, TWO_PI, m))
    if kind == "random-passive":
        return RisControl(np.ones(m), rng.uniform(0.0, TWO_PI, m))
    if kind == "none":
        return RisControl.off(m)
    raise ValueError(f"unknown baseline {kind!r}")


def baseline_policy(kind: str, rng: np.random.Generator, cfg: Config):
    """``state -> raw action`` wrapper around :func:`baseline_control`.

    The environment's RIS kind does the rest: a passive surface ignores the
    amplitude half of the action and a disabled one ignores all of it.
    """
    m, max_amp = cfg.ris.n_elements, cfg.ris.max_amp

    def act(_state):
        ctrl = baseline_control(kind, rng, m, max_amp)
        return np.concatenate([ctrl.amp / max_amp, ctrl.phase / TWO_PI])
    return act


# ---------------------------------------------------------------- running

def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=10,
                             cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def make_agent(cfg: Config, env: Environment, seed: int) -> Agent:
    return Agent(env.state_dim, env.action_dim, cfg.agent, seed=seed,
                 total_steps=cfg.run.episodes * cfg.run.steps)


def evaluate(cfg: Config, predictor, agent: Agent | None = None, seed: int | None = None,
             trace: bool = False):
    """Run ``cfg.run.eval_episodes`` episodes without learning or exploration
    on held-out random streams. Returns ``(rows, env)``."""
    seed = cfg.run.seed if seed is None else seed
    env = Environment(cfg, predictor, seed=seed + cfg.run.eval_seed_offset, trace=trace)
    policy = None
    if cfg.run.policy in ("ddpg", "ac"):
        if agent is None:
            raise ValueError("a learning policy needs a trained agent to evaluate")
    else:
        kind = {"active": "random-active", "passive": "random-passive"}.get(cfg.ris.kind, "none")
        if cfg.run.policy == "off":
            kind = "none"
        policy = baseline_policy(kind, streams.stream(seed, streams.POLICY), cfg)
    rows = []
    for _ in range(cfg.run.eval_episodes):
        rows.append({"phase": "eval", **run_episode(env, agent, learn=False, policy=policy)})
    return rows, env


def train(cfg: Config, predictor, seed: int | None = None, trace: bool = False):
    """Train the configured learning policy. Returns ``(agent, rows, env)``."""
    seed = cfg.run.seed if seed is None else seed
    env = Environment(cfg, predictor, seed=seed, trace=trace)
    agent = make_agent(cfg, env, seed)
    rows = [{"phase": "train", **r} for r in run_training(env, agent, cfg.run.episodes)]
    return agent, rows, env


def summarize(rows: list[dict]) -> dict:
    out = {}
    for phase in ("train", "eval"):
        sel = [r for r in rows if r["phase"] == phase]
        if not sel:
            continue
        tail = sel[-10:]
        out[phase] = {
            "episodes": len(sel),
            "mean_success_ratio": float(np.mean([r["mean_success_ratio"] for r in sel])),
            "mean_sum_rate": float(np.mean([r["mean_sum_rate"] for r in sel])),
            "mean_reward": float(np.mean([r["mean_reward"] for r in sel])),
            "final10_success_ratio": float(np.mean([r["mean_success_ratio"] for r in tail])),
            "final10_sum_rate": float(np.mean([r["mean_sum_rate"] for r in tail])),
            "final10_reward": float(np.mean([r["mean_reward"] for r in tail])),
        }
        if phase == "train":
            head = sel[:10]
            out[phase]["first10_success_ratio"] = float(
                np.mean([r["mean_success_ratio"] for r in head]))
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in METRIC_COLUMNS])


def write_trace(path, trace_rows: list[dict]) -> None:
    if not trace_rows:
        return
    cols = list(trace_rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in trace_rows:
            w.writerow([json.dumps(r[c]) if isinstance(r[c], list) else _fmt(r[c]) for c in cols])


def run_experiment(cfg: Config, out_dir=None, trace: bool = False, predictor=None,
                   cache_dir=None, checkpoint=None) -> dict:
    """Train (for learning policies) and evaluate one configuration.

    Writes ``metrics.csv``, ``summary.json``, the agent checkpoint and, with
    ``trace``, ``trace.csv`` into ``out_dir`` when given. Returns the summary.
    """
    if predictor is None:
        predictor, _ = build_predictor(cfg, cache_dir)
    seed = cfg.run.seed
    rows: list[dict] = []
    agent = None
    train_env = None
    if cfg.run.policy in ("ddpg", "ac"):
        if checkpoint is not None:
            env_probe = Environment(cfg, predictor, seed=seed)
            agent = make_agent(cfg, env_probe, seed).load(checkpoint)
        else:
            agent, rows, train_env = train(cfg, predictor, seed, trace)
    eval_rows, eval_env = evaluate(cfg, predictor, agent, seed, trace)
    rows += eval_rows
    summary = {
        "name": cfg.name,
        "seed": seed,
        "metrics": summarize(rows),
        "config": cfg.to_dict(),
        "code_version": git_describe(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics(out / "metrics.csv", rows)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        if agent is not None and checkpoint is None:
            agent.save(out / "agent.ckpt")
        if trace:
            write_trace(out / "trace.csv", (train_env.trace_rows if train_env else [])
                        + eval_env.trace_rows)
    summary["rows"] = rows
    summary["agent"] = agent
    return summary


# ---------------------------------------------------------------- sweeps

AXES = {
    "K": "geometry__n_users",
    "R0": "noma__r0",
    "L": "ris__max_amp",
    "M": "ris__n_elements",
}


def _sweep_point(args):
    cfg, axis, value, label, cache_dir, checkpoint_dir, train_inline = args
    point = with_policy(cfg.replace(**{AXES[axis]: value}), label)
    ckpt = None
    if point.run.policy in ("ddpg", "ac") and not train_inline:
        ckpt = Path(checkpoint_dir) / f"{label}_{axis}{value}.ckpt"
        if not ckpt.exists():
            raise FileNotFoundError(f"missing checkpoint for sweep point: {ckpt}")
    s = run_experiment(point, cache_dir=cache_dir, checkpoint=ckpt)
    if train_inline and checkpoint_dir is not None and s["agent"] is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
        s["agent"].save(Path(checkpoint_dir) / f"{label}_{axis}{value}.ckpt")
    ev = s["metrics"]["eval"]
    return {"axis": axis, "value": value, "policy": label,
            "success_ratio": ev["mean_success_ratio"], "sum_rate": ev["mean_sum_rate"],
            "reward": ev["mean_reward"]}


def sweep(cfg: Config, axis: str, values, policies=("ddpg",), out_dir=None, cache_dir=None,
          checkpoint_dir=None, train_inline: bool = True, workers: int = 1) -> list[dict]:
    """One evaluation row per (axis value, policy); written to ``sweep.csv``."""
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(AXES)}")
    unknown = [p for p in policies if p not in POLICIES]
    if unknown:
        raise ValueError(f"unknown policies {unknown}")
    if cache_dir is not None:
        # train each predictor once up front so workers only read the cache
        for v in dict.fromkeys(values):
            build_predictor(cfg.replace(**{AXES[axis]: v}), cache_dir)
    jobs = [(cfg, axis, v, p, cache_dir, checkpoint_dir, train_inline)
            for v in values for p in policies]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = ["axis", "value", "policy", "success_ratio", "sum_rate", "reward"]
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in cols])
    return rows
