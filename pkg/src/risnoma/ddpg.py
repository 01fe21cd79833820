"""Deep deterministic policy gradient for the RIS controller, plus the plain
actor-critic variant (no target networks, no replay) used as a baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .config import AgentConfig
from .neural import MLP, Adam, soft_update
from .neural.checkpoint import CheckpointError, assign, load_arrays, save_arrays


class ReplayMemory:
    """Fixed-capacity ring buffer of ``(s, a, r, s')`` transitions."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 rng: np.random.Generator | None = None):
        if capacity < 1:
            raise ValueError("memory capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.size = 0
        self.head = 0
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def __len__(self) -> int:
        return self.size

    @property
    def warm_size(self) -> int:
        """Transitions needed before sampling starts: a third of the capacity."""
        return math.ceil(self.capacity / 3)

    @property
    def ready(self) -> bool:
        return self.size >= self.warm_size

    def add(self, s, a, r, s2) -> None:
        i = self.head
        self.s[i], self.a[i], self.r[i], self.s2[i] = s, a, r, s2
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int):
        """Uniform sample without replacement within the batch."""
        idx = self.rng.choice(self.size, size=min(batch, self.size), replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx]


@dataclass
class NoiseSchedule:
    """Linearly decaying exploration std with a floor."""

    n_ini: float = 0.3
    n_end: float = 0.02
    phi: float = 1e-4

    def __post_init__(self):
        if not self.n_ini >= self.n_end >= 0 or self.phi <= 0:
            raise ValueError("need n_ini >= n_end >= 0 and phi > 0")

    @classmethod
    def annealed(cls, n_ini: float, n_end: float, total_steps: int, fraction: float = 0.6):
        return cls(n_ini, n_end, max(n_ini - n_end, 1e-12) / (fraction * total_steps))

    def std(self, t: int) -> float:
        return max(self.n_ini - t * self.phi, self.n_end)


class Agent:
    """Actor ``s -> [0,1]^{2M}`` and critic ``(s, a) -> Q`` with soft-updated targets.

    With ``cfg.algo == "ac"`` the target networks are the main networks and
    every transition is learned from once, immediately.
    """

    def __init__(self, state_dim: int, action_dim: int, cfg: AgentConfig = AgentConfig(),
                 seed: int = 0, total_steps: int = 5000):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.cfg = cfg
        self.seed = seed
        init = streams.stream(seed, streams.AGENT_INIT)
        self.actor = MLP([state_dim, *cfg.hidden, action_dim], "relu", "sigmoid", init,
                         cfg.final_init)
        self.critic = MLP([state_dim + action_dim, *cfg.hidden, 1], "relu", "identity", init,
                          cfg.final_init)
        self.use_targets = cfg.algo == "ddpg"
        if self.use_targets:
            self.target_actor = self.actor.copy()
            self.target_critic = self.critic.copy()
        else:
            self.target_actor, self.target_critic = self.actor, self.critic
        self.actor_opt = Adam(self.actor.params(), lr=cfg.lr_actor)
        self.critic_opt = Adam(self.critic.params(), lr=cfg.lr_critic)
        capacity = cfg.memory if self.use_targets else 1
        self.memory = ReplayMemory(capacity, state_dim, action_dim,
                                   streams.stream(seed, streams.REPLAY))
        self.noise = NoiseSchedule.annealed(cfg.noise_start, cfg.noise_end, total_steps,
                                            cfg.anneal_fraction)
        self.explore_rng = streams.stream(seed, streams.EXPLORATION)
        self.t = 0          # environment steps seen, drives the noise schedule
        self.updates = 0

    # acting -----------------------------------------------------------

    def policy(self, state: np.ndarray) -> np.ndarray:
        return self.actor(np.asarray(state, dtype=float)[None, :])[0]

    def act(self, state: np.ndarray, explore: bool = True) -> np.ndarray:
        """Actor output plus Gaussian noise of the scheduled std, clipped to [0, 1]."""
        a = self.policy(state)
        if explore:
            a = a + self.noise.std(self.t) * self.explore_rng.standard_normal(self.action_dim)
        return np.clip(a, 0.0, 1.0)

    # learning ---------------------------------------------------------

    def observe(self, s, a, r, s2) -> tuple[float, float] | None:
        """Store a transition and learn from memory if it is warm enough."""
        self.memory.add(s, a, r, s2)
        self.t += 1
        if not self.memory.ready:
            return None
        batch = self.memory.sample(self.cfg.batch_size if self.use_targets else 1)
        return self.train_step(*batch)

    def train_step(self, s, a, r, s2) -> tuple[float, float]:
        """One critic regression step and one actor ascent step on a batch.

        Returns ``(critic loss, mean Q of the actor's actions)``.
        """
        n = len(r)
        gamma = self.cfg.gamma
        mu2 = self.target_actor(s2)
        q2 = self.target_critic(np.hstack([s2, mu2]))[:, 0]
        y = r + gamma * q2

        q, cache = self.critic.forward(np.hstack([s, a]))
        err = q[:, 0] - y
        _, grads = self.critic.backward(cache, (2.0 * err / n)[:, None])
        self.critic_opt.step(grads)
        critic_loss = float(err @ err) / n

        q_mu, grads = self.actor_gradients(s)
        self.actor_opt.step(grads)

        if self.use_targets:
            soft_update(self.actor.params(), self.target_actor.params(), self.cfg.tau)
            soft_update(self.critic.params(), self.target_critic.params(), self.cfg.tau)
        self.updates += 1
        return critic_loss, float(q_mu.mean())

    def actor_gradients(self, s) -> tuple[np.ndarray, list[np.ndarray]]:
        """Q of the actor's own actions and the gradient of ``-mean Q`` with
        respect to the actor parameters, chained through the (unchanged) critic."""
        n = len(s)
        mu, actor_cache = self.actor.forward(s)
        q_mu, cache = self.critic.forward(np.hstack([s, mu]))
        dx, _ = self.critic.backward(cache, np.full((n, 1), -1.0 / n))
        _, grads = self.actor.backward(actor_cache, dx[:, self.state_dim:])
        return q_mu, grads

    # persistence ------------------------------------------------------

    def _named(self):
        nets = [("actor", self.actor), ("critic", self.critic)]
        if self.use_targets:
            nets += [("target_actor", self.target_actor), ("target_critic", self.target_critic)]
        return [(f"{name}/{i}", p) for name, net in nets for i, p in enumerate(net.params())]

    def save(self, path) -> None:
        meta = {"kind": "agent", "algo": self.cfg.algo, "state_dim": self.state_dim,
                "action_dim": self.action_dim, "hidden": list(self.cfg.hidden)}
        save_arrays(path, self._named(), meta)

    def load(self, path) -> "Agent":
        arrays, meta = load_arrays(path)
        expected = {"kind": "agent", "algo": self.cfg.algo, "state_dim": self.state_dim,
                    "action_dim": self.action_dim, "hidden": list(self.cfg.hidden)}
        if meta != expected:
            raise CheckpointError(f"{path}: checkpoint {meta} does not match agent {expected}")
        assign([p for _, p in self._named()], [a for _, a in arrays])
        return self


def run_episode(env, agent: Agent | None, learn: bool, policy=None, n_steps: int | None = None):
    """Roll one episode; ``policy(state) -> raw action`` overrides the agent.

    Returns the per-episode metrics dict.
    """
    s = env.reset(n_steps)
    rewards, ratios, sum_rates, batteries, losses = [], [], [], [], []
    vacuous = 0
    for _ in range(env.n_steps):
        if policy is not None:
            a = policy(s)
        else:
            a = agent.act(s, explore=learn)
        out = env.step(a)
        if learn and agent is not None:
            res = agent.observe(s, out.executed, out.reward, out.next_state)
            if res is not None:
                losses.append(res[0])
        rewards.append(out.reward)
        sum_rates.append(out.slot.sum_rate)
        batteries.append(out.energy.battery)
        if out.vacuous:
            vacuous += 1
        else:
            ratios.append(out.ratio)
        s = out.next_state
    return {
        "episode": env.episode,
        "mean_reward": float(np.mean(rewards)),
        "mean_success_ratio": float(np.mean(ratios)) if ratios else 1.0,
        "mean_sum_rate": float(np.mean(sum_rates)),
        "mean_battery": float(np.mean(batteries)),
        "vacuous_slots": vacuous,
        "critic_loss": float(np.mean(losses)) if losses else float("nan"),
    }


def run_training(env, agent: Agent, episodes: int, n_steps: int | None = None,
                 callback=None) -> list[dict]:
    """Interact and learn for ``episodes`` episodes; returns per-episode metrics."""
    history = []
    for _ in range(episodes):
        row = run_episode(env, agent, learn=True, n_steps=n_steps)
        history.append(row)
        if callback is not None:
            callback(row)
    return history
