"""First-order optimizers updating parameter arrays in place."""
from __future__ import annotations

import numpy as np


class RMSprop:
    """``v <- rho v + (1 - rho) g^2``; ``p <- p - lr g / sqrt(v + eps)``."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, rho: float = 0.9,
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        for p, g, v in zip(self.params, grads, self.v):
            v *= self.rho
            v += (1.0 - self.rho) * g * g
            p -= self.lr * g / np.sqrt(v + self.eps)


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        # written with out= so the big flat buffers are not reallocated per step
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            tmp = np.multiply(g, 1.0 - self.beta1)
            m *= self.beta1
            m += tmp
            np.multiply(g, g, out=tmp)
            tmp *= 1.0 - self.beta2
            v *= self.beta2
            v += tmp
            np.sqrt(v, out=tmp)
            tmp *= 1.0 / np.sqrt(c2)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= self.lr / c1
            p -= tmp


def optimizer_step(opt, grads: list[np.ndarray]) -> None:
    opt.step(grads)


def soft_update(main: list[np.ndarray], target: list[np.ndarray], tau: float) -> None:
    """Move every target array to ``tau * main + (1 - tau) * target``."""
    if len(main) != len(target):
        raise ValueError("main and target parameter lists differ in length")
    for p, tp in zip(main, target):
        if p.shape != tp.shape:
            raise ValueError(f"shape mismatch in soft update: {p.shape} vs {tp.shape}")
        tp *= 1.0 - tau
        tp += tau * p
