"""Update rules and learning-rate schedules for the network parameters."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .net import ConfigError, NetParams


@dataclass
class Schedule:
    """Learning-rate schedule in training time.

    ``robbins_monro``: base_rate / (1 + tau) with tau = step * dtau.
    ``plateau``: base_rate * factor**k after k reductions; a reduction fires once
    the monitored value has failed to improve for ``patience`` consecutive steps.
    With ``patience_decay`` the patience shrinks linearly to ``min_patience`` over
    ``decay_steps`` steps.
    """

    kind: str = "constant"
    base_rate: float = 0.01
    dtau: float = 1.0
    factor: float = 0.95
    patience: int = 100
    threshold: float = 1e-4
    patience_decay: bool = False
    min_patience: int = 10
    decay_steps: int = 60_000
    # plateau state
    reductions: int = 0
    best: float = float("inf")
    bad_steps: int = 0
    steps_seen: int = 0

    def __post_init__(self):
        if self.kind not in ("constant", "robbins_monro", "plateau"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.base_rate > 0:
            raise ConfigError("base_rate must be positive")
        if not 0 < self.factor < 1:
            raise ConfigError("plateau factor must lie in (0, 1)")
        if self.patience < 1:
            raise ConfigError("patience must be a positive integer")

    def rate(self, step: int = 0) -> float:
        if self.kind == "robbins_monro":
            return self.base_rate / (1.0 + step * self.dtau)
        if self.kind == "plateau":
            return self.base_rate * self.factor**self.reductions
        return self.base_rate

    def current_patience(self) -> int:
        if not self.patience_decay:
            return self.patience
        frac = min(1.0, self.steps_seen / self.decay_steps)
        return max(self.min_patience, int(round(self.patience - frac * (self.patience - self.min_patience))))

    def observe(self, value: float) -> bool:
        """Feed the monitored value; returns True when the rate was reduced."""
        if self.kind != "plateau":
            return False
        self.steps_seen += 1
        if value < self.best * (1.0 - self.threshold):
            self.best = value
            self.bad_steps = 0
            return False
        self.bad_steps += 1
        if self.bad_steps >= self.current_patience():
            self.reductions += 1
            self.bad_steps = 0
            return True
        return False


def scaled_rate(sched: Schedule, n: int, beta: float, step: int = 0) -> float:
    """alpha_tau / N^(1 - 2 beta)."""
    return sched.rate(step) * float(n) ** (2 * beta - 1)


@dataclass
class ZClip:
    """Z-score clipping of the gradient norm against EMA statistics.

    The first ``warmup`` norms pass through untouched and only feed the EMAs
    (seeded with the first norm, zero variance). Afterwards a norm whose z-score
    exceeds ``z_threshold`` is rescaled to ``mean + z_threshold * std``; the EMAs
    are fed the post-clip norm.
    """

    alpha: float = 0.98
    z_threshold: float = 0.4
    warmup: int = 25
    eps: float = 1e-12
    mean: Optional[float] = None
    var: float = 0.0
    count: int = 0

    def _update(self, value: float):
        if self.mean is None:
            self.mean, self.var = value, 0.0
        else:
            diff = value - self.mean
            self.mean = self.alpha * self.mean + (1 - self.alpha) * value
            self.var = self.alpha * self.var + (1 - self.alpha) * diff * diff
        self.count += 1

    def zscore(self, norm: float) -> float:
        std = np.sqrt(self.var)
        diff = norm - self.mean
        if std <= self.eps * max(abs(self.mean), 1.0):
            return 0.0 if abs(diff) <= self.eps * max(abs(self.mean), 1.0) else np.copysign(np.inf, diff)
        return diff / std

    def apply(self, grad: np.ndarray) -> tuple[np.ndarray, bool]:
        """Clip against the current statistics without updating them."""
        grad = np.asarray(grad, dtype=float)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite gradient")
        gnorm = float(np.linalg.norm(grad))
        if self.count < self.warmup or self.mean is None or gnorm == 0.0:
            return grad, False
        if self.zscore(gnorm) > self.z_threshold:
            target = self.mean + self.z_threshold * np.sqrt(self.var)
            return grad * (target / gnorm), True
        return grad, False

    def clip(self, grad: np.ndarray) -> tuple[np.ndarray, bool]:
        out, clipped = self.apply(grad)
        self._update(float(np.linalg.norm(out)))
        return out, clipped


@dataclass
class OptimizerState:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    t: int = 0
    zclip: Optional[ZClip] = None

    def __post_init__(self):
        if self.kind not in ("gd", "adam"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if not self.eps > 0:
            raise ConfigError("adam eps must be positive")

    def clip(self, grad: np.ndarray) -> tuple[np.ndarray, bool]:
        if self.zclip is None:
            if not np.all(np.isfinite(grad)):
                raise FloatingPointError("non-finite gradient")
            return grad, False
        return self.zclip.clip(grad)


def step(state: OptimizerState, params: NetParams, grad: np.ndarray, rate: float) -> NetParams:
    theta = params.to_vector()
    grad = np.asarray(grad, dtype=float)
    if grad.shape != theta.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match parameters {theta.shape}")
    if state.kind == "gd":
        return params.from_vector(theta - rate * grad)
    if state.m is None:
        state.m = np.zeros_like(theta)
        state.v = np.zeros_like(theta)
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = state.m / (1 - state.beta1**state.t)
    v_hat = state.v / (1 - state.beta2**state.t)
    return params.from_vector(theta - rate * m_hat / (np.sqrt(v_hat) + state.eps))
