"""Optimizers: SGD with classical momentum plus an epoch-wise 1/(1+rho*t)
learning-rate decay, and bias-corrected Adam with coupled L2 regularization
(lambda * theta added to the gradient before the moment updates)."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .errors import ContractError


def lr_schedule(eta0: float, rho: float, t: int) -> float:
    """Learning rate after t completed epochs: eta0 / (1 + rho * t)."""
    if t < 0:
        raise ContractError(f"epoch counter must be >= 0, got {t}")
    return eta0 / (1.0 + rho * t)


class SgdMomentum:
    """v <- mu * v - eta_t * g ; theta <- theta + v."""

    def __init__(self, eta0: float = 0.01, rho: float = 0.04,
                 momentum: float = 0.9):
        self.eta0 = eta0
        self.rho = rho
        self.momentum = momentum
        self.epoch = 0
        self.velocity: dict[str, np.ndarray] = {}

    @property
    def lr(self) -> float:
        return lr_schedule(self.eta0, self.rho, self.epoch)

    def set_epoch(self, completed: int) -> None:
        self.epoch = completed

    def step(self, params: dict[str, Tensor],
             grads: dict[str, np.ndarray]) -> None:
        eta = self.lr
        for name, g in grads.items():
            p = params[name]
            if p.data.shape != g.shape:
                raise ContractError(
                    f"{name}: gradient shape {g.shape} vs parameter "
                    f"{p.data.shape}")
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(p.data)
                self.velocity[name] = v
            v *= self.momentum
            v -= eta * g
            p.data += v


class Adam:
    """Standard bias-corrected Adam; ``weight_decay`` adds lambda * theta to
    the gradient of every parameter not listed in ``no_decay``."""

    def __init__(self, lr: float = 3e-5, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0,
                 no_decay: set[str] | None = None):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.no_decay = no_decay or set()
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, Tensor],
             grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            p = params[name]
            if p.data.shape != g.shape:
                raise ContractError(
                    f"{name}: gradient shape {g.shape} vs parameter "
                    f"{p.data.shape}")
            if self.weight_decay and name not in self.no_decay:
                g = g + self.weight_decay * p.data
            m = self.m.setdefault(name, np.zeros_like(p.data))
            v = self.v.setdefault(name, np.zeros_like(p.data))
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
