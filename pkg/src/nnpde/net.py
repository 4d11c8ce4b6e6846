"""Single-hidden-layer source network  g(t, x) = N^-beta sum_i c_i sigma(w_t_i t + w_i . x + eta_i)."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .grid import Field, SpaceTimeGrid

log = logging.getLogger(__name__)

_CHUNK_ELEMENTS = 4_000_000


def _tanh_prime(z):
    s = np.tanh(z)
    return 1.0 - s * s


def _sigmoid_prime(z):
    s = expit(z)
    return s * (1.0 - s)


ACTIVATIONS = {
    "tanh": (np.tanh, _tanh_prime),
    "sigmoid": (expit, _sigmoid_prime),
}

# sigma' written in terms of s = sigma(z), so cached activations can be reused
_PRIME_FROM_VALUE = {
    "tanh": lambda s: 1.0 - s * s,
    "sigmoid": lambda s: s * (1.0 - s),
}

# sup |sigma|, sup |sigma'|
ACTIVATION_BOUNDS = {"tanh": (1.0, 1.0), "sigmoid": (1.0, 0.25)}


class ConfigError(ValueError):
    """Invalid configuration value (exit code 2 at the CLI)."""


@dataclass(frozen=True)
class NetParams:
    n: int
    beta: float
    c: np.ndarray
    w_t: np.ndarray
    w: np.ndarray  # shape (n, 2)
    eta: np.ndarray
    activation: str = "tanh"
    seed: int | None = None

    def __post_init__(self):
        if not 0.5 < self.beta < 1.0:
            raise ConfigError(f"beta must lie strictly inside (1/2, 1), got {self.beta}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        shapes = {"c": (self.n,), "w_t": (self.n,), "w": (self.n, 2), "eta": (self.n,)}
        for name, shape in shapes.items():
            arr = getattr(self, name)
            if np.shape(arr) != shape:
                raise ConfigError(f"{name} has shape {np.shape(arr)}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} contains non-finite entries")

    @property
    def size(self) -> int:
        return 5 * self.n

    @property
    def scale(self) -> float:
        return float(self.n) ** (-self.beta)

    def sigma(self):
        return ACTIVATIONS[self.activation]

    def to_vector(self) -> np.ndarray:
        """Flat layout: [c, w_t, w_x, w_y, eta], each block of length n."""
        return np.concatenate([self.c, self.w_t, self.w[:, 0], self.w[:, 1], self.eta])

    def from_vector(self, vec) -> "NetParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise ValueError(f"parameter vector has shape {vec.shape}, expected ({self.size},)")
        c, w_t, wx, wy, eta = vec.reshape(5, self.n)
        return NetParams(self.n, self.beta, c.copy(), w_t.copy(), np.stack([wx, wy], axis=1),
                         eta.copy(), self.activation, self.seed)

    def to_json(self) -> dict:
        return {
            "n": self.n, "beta": self.beta, "activation": self.activation,
            "c": self.c.tolist(), "w_t": self.w_t.tolist(), "w": self.w.tolist(),
            "eta": self.eta.tolist(), "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "NetParams":
        return cls(int(data["n"]), float(data["beta"]), np.asarray(data["c"], float),
                   np.asarray(data["w_t"], float), np.asarray(data["w"], float).reshape(-1, 2),
                   np.asarray(data["eta"], float), data.get("activation", "tanh"), data.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "NetParams":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class InitDistribution:
    """c ~ U[c_lo, c_hi]; w_t, w, eta ~ N(0, 1) independently."""

    c_lo: float = -1.0
    c_hi: float = 1.0
    seed: int = 0

    @property
    def centered(self) -> bool:
        return self.c_lo == -self.c_hi

    @property
    def c_bound(self) -> float:
        return max(abs(self.c_lo), abs(self.c_hi))


def init_params(n: int, beta: float, dist: InitDistribution, activation: str = "tanh") -> NetParams:
    if n < 1:
        raise ConfigError("neuron count must be at least 1")
    if not 0.5 < beta < 1.0:
        raise ConfigError(f"beta must lie strictly inside (1/2, 1), got {beta}")
    if not dist.centered:
        log.warning("output-weight law U[%g, %g] is not mean-zero", dist.c_lo, dist.c_hi)
    rng = np.random.default_rng(dist.seed)
    c = rng.uniform(dist.c_lo, dist.c_hi, size=n)
    w_t = rng.standard_normal(n)
    w = rng.standard_normal((n, 2))
    eta = rng.standard_normal(n)
    return NetParams(n, beta, c, w_t, w, eta, activation, dist.seed)


def preactivation(params: NetParams, points: np.ndarray) -> np.ndarray:
    """z[node, i] for ``points`` of shape (nodes, 3)."""
    W = np.stack([params.w_t, params.w[:, 0], params.w[:, 1]], axis=0)
    return points @ W + params.eta


def _chunks(n: int, rows: int):
    step = max(1, _CHUNK_ELEMENTS // max(rows, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def subset(params: NetParams, sl: slice) -> NetParams:
    # keeps the parent's scale: caller multiplies by params.scale itself
    return NetParams(len(params.c[sl]), params.beta, params.c[sl], params.w_t[sl], params.w[sl],
                     params.eta[sl], params.activation, params.seed)


def hidden_activations(params: NetParams, grid: SpaceTimeGrid) -> list:
    """[(neuron slice, sigma(z) block)] covering all neurons; reusable by the gradient."""
    pts = grid.points
    sigma, _ = params.sigma()
    return [(sl, sigma(preactivation(subset(params, sl), pts))) for sl in _chunks(params.n, len(pts))]


def eval_net(params: NetParams, grid: SpaceTimeGrid, activations: list | None = None) -> Field:
    out = np.zeros(grid.points.shape[0])
    for sl, s in activations if activations is not None else hidden_activations(params, grid):
        out += s @ params.c[sl]
    return Field(grid, params.scale * out)


def net_param_gradient(params: NetParams, u_hat: Field, activations: list | None = None) -> np.ndarray:
    """Quadrature of grad_theta g against ``u_hat``, in the ``to_vector`` layout."""
    grid = u_hat.grid
    pts = grid.points
    wu = grid.weights.combined.ravel() * u_hat.values.ravel()
    prime = _PRIME_FROM_VALUE[params.activation]
    # columns: t, x, y, 1
    weighted = np.column_stack([wu * pts[:, 0], wu * pts[:, 1], wu * pts[:, 2], wu])
    grad = np.zeros((5, params.n))
    for sl, s in activations if activations is not None else hidden_activations(params, grid):
        grad[0, sl] = wu @ s
        moments = weighted.T @ prime(s)  # (4, neurons)
        grad[1:, sl] = moments * params.c[sl]
    return params.scale * grad.ravel()


def net_jacobian(params: NetParams, points: np.ndarray) -> np.ndarray:
    """d g / d theta at each point, shape (len(points), 5 n)."""
    sigma, dsigma = params.sigma()
    z = preactivation(params, points)
    d = dsigma(z) * params.c
    jac = np.concatenate([sigma(z), d * points[:, :1], d * points[:, 1:2], d * points[:, 2:3], d], axis=1)
    return params.scale * jac
