"""Deterministic online optimizers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = ["OGD", "Adam", "make_optimizer", "SkippedUpdate"]


@dataclass
class SkippedUpdate:
    round: int
    reason: str


@dataclass
class OGD:
    """Online gradient descent with step ``step_scale / sqrt(t)``."""

    step_scale: float = 1.0
    t: int = 0
    skipped: list[SkippedUpdate] = field(default_factory=list)

    def __post_init__(self):
        if not self.step_scale > 0:
            raise ConfigurationError(f"step_scale must be positive, got {self.step_scale}")

    def update(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        grad = np.asarray(grad, dtype=float)
        if grad.shape != theta.shape:
            raise ConfigurationError(f"gradient shape {grad.shape} != parameter shape {theta.shape}")
        if not np.all(np.isfinite(grad)):
            self.skipped.append(SkippedUpdate(self.t, "non-finite gradient"))
            return theta
        return theta - (self.step_scale / math.sqrt(self.t)) * grad


@dataclass
class Adam:
    step: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    skipped: list[SkippedUpdate] = field(default_factory=list)

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError(f"Adam step must be positive, got {self.step}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ConfigurationError("Adam epsilon must be positive")

    def update(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        grad = np.asarray(grad, dtype=float)
        if grad.shape != theta.shape:
            raise ConfigurationError(f"gradient shape {grad.shape} != parameter shape {theta.shape}")
        if not np.all(np.isfinite(grad)):
            self.skipped.append(SkippedUpdate(self.t, "non-finite gradient"))
            return theta
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - self.step * m_hat / (np.sqrt(v_hat) + self.epsilon)


def make_optimizer(kind: str, **hyper):
    kind = kind.lower()
    if kind == "ogd":
        return OGD(step_scale=hyper.get("step_scale", 1.0))
    if kind == "adam":
        keys = ("step", "beta1", "beta2", "epsilon")
        return Adam(**{k: hyper[k] for k in keys if k in hyper})
    raise ConfigurationError(f"unknown optimizer {kind!r}; expected ogd or adam")
