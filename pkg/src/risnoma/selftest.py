"""Quick internal consistency checks behind ``sim selftest``."""
from __future__ import annotations

import numpy as np

from .config import Config
from .env import Environment
from .neural import MLP, LSTMRegressor
from .noma import NomaParams, sic_decode, signal_strengths


def _fd_check(params, loss_fn, grads, rng, n_probe: int = 5, h: float = 1e-5) -> float:
    worst = 0.0
    for p, g in zip(params, grads):
        for _ in range(n_probe):
            i = tuple(rng.integers(0, s) for s in p.shape)
            old = p[i]
            p[i] = old + h
            up = loss_fn()
            p[i] = old - h
            down = loss_fn()
            p[i] = old
            fd = (up - down) / (2 * h)
            worst = max(worst, abs(fd - g[i]) / max(abs(g[i]), abs(fd), 1e-8))
    return worst


def check_gradients() -> bool:
    rng = np.random.default_rng(0)
    net = MLP([3, 5, 4, 2], "tanh", "sigmoid", rng)
    x, t = rng.normal(size=(6, 3)), rng.random((6, 2))

    def loss():
        return float(np.sum((net(x) - t) ** 2))
    y, cache = net.forward(x)
    _, grads = net.backward(cache, 2 * (y - t))
    ok = _fd_check(net.params(), loss, grads, rng) < 1e-4

    lstm = LSTMRegressor(hidden=4, n_layers=2, rng=rng, head_init_scale=0.5)
    w, lab = rng.random((3, 5)), rng.random(3)

    def loss2():
        return float(np.sum((lstm(w) - lab) ** 2))
    y, cache = lstm.forward(w)
    grads = lstm.backward(cache, 2 * (y - lab))
    return ok and _fd_check(lstm.params(), loss2, grads, rng) < 1e-4


def check_label_invariance() -> bool:
    rng = np.random.default_rng(1)
    params = NomaParams((0.1, 0.1, 0.1, 0.1), 0.9, 1e-12, 0.5)
    for _ in range(50):
        h = (rng.normal(size=4) + 1j * rng.normal(size=4)) * 1e-5
        act = rng.random(4) < 0.8
        noise = rng.random(4) * 1e-12
        base = sic_decode(signal_strengths(act, h, params), h, act, noise, params)
        perm = rng.permutation(4)
        moved = sic_decode(signal_strengths(act[perm], h[perm], params), h[perm], act[perm],
                           noise[perm], params)
        # interference is summed in index order, so allow rounding-level change
        if not np.allclose(base.rates[perm], moved.rates, rtol=1e-12, atol=0):
            return False
    return True


def check_energy(steps: int = 2000) -> bool:
    cfg = Config().validate().replace(energy__start_hour=18.0)
    env = Environment(cfg, None, seed=0)
    rng = np.random.default_rng(2)
    env.reset(steps)
    for _ in range(steps):
        env.step(rng.random(env.action_dim))   # raises on any violation
    return abs(env.ledger_gap()) < 1e-9


def check_determinism() -> bool:
    cfg = Config().validate()
    a, b = Environment(cfg, None, seed=5), Environment(cfg, None, seed=5)
    a.reset(3), b.reset(3)
    ra = [a.step(np.full(a.action_dim, 0.5)).reward for _ in range(3)]
    rb = [b.step(np.full(b.action_dim, 0.5)).reward for _ in range(3)]
    return ra == rb and np.array_equal(a.channel.h_ris_user, b.channel.h_ris_user)


CHECKS = {
    "gradients": check_gradients,
    "sic label invariance": check_label_invariance,
    "energy safety": check_energy,
    "determinism": check_determinism,
}


def run_all(verbose: bool = False) -> list[str]:
    failures = []
    for name, fn in CHECKS.items():
        ok = bool(fn())
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)
    return failures
