"""Uniform space-time grids over [0, T] x D, fields on them, quadrature and norms."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

NORM_KINDS = ("L2_DT", "Linf_DT", "L2t_H1x", "Linft_L2x")

_MIN_SPACING = 1e-12


class GridMismatchError(ValueError):
    """Two fields (or a field and an operator) live on different grids."""


class FieldDataError(ValueError):
    """A sampled or supplied field contains non-finite values or has the wrong shape."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Tensor grid with ``t_count`` time levels over a rectangle.

    Arrays on the grid are indexed ``[t, x, y]``; time is the slowest axis so
    reversing PDE time is reversing the leading index.
    """

    t_count: int
    x_count: int
    y_count: int
    t_max: float = 1.0
    x_min: float = 0.0
    x_max: float = 0.5
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        for name in ("t_count", "x_count", "y_count"):
            if int(getattr(self, name)) < 3:
                raise ValueError(f"{name} must be >= 3, got {getattr(self, name)}")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("rectangle must have x_max > x_min and y_max > y_min")
        if min(self.dt, self.dx, self.dy) < _MIN_SPACING:
            raise ValueError("grid spacing below 1e-12")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.t_count, self.x_count, self.y_count)

    @property
    def size(self) -> int:
        return self.t_count * self.x_count * self.y_count

    @property
    def dt(self) -> float:
        return self.t_max / (self.t_count - 1)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.x_count - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.y_count - 1)

    @cached_property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.t_count)

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.x_count)

    @cached_property
    def y(self) -> np.ndarray:
        return self.y_min + self.dy * np.arange(self.y_count)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcast-ready (T, X, Y) coordinate arrays of the full grid shape."""
        return tuple(np.meshgrid(self.t, self.x, self.y, indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """All nodes as an ``(size, 3)`` array of (t, x, y), row-major in (t, x, y)."""
        return np.stack([c.ravel() for c in self.coords], axis=1)

    @property
    def volume(self) -> float:
        return self.t_max * (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @cached_property
    def weights(self) -> "QuadratureWeights":
        return QuadratureWeights.trapezoidal(self)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Spatial boundary indicator of shape (x_count, y_count)."""
        mask = np.zeros((self.x_count, self.y_count), dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))

    def sample(self, fn: Callable) -> "Field":
        return sample_function(self, fn)

    def with_counts(self, t_count=None, x_count=None, y_count=None) -> "SpaceTimeGrid":
        return SpaceTimeGrid(
            t_count or self.t_count, x_count or self.x_count, y_count or self.y_count,
            self.t_max, self.x_min, self.x_max, self.y_min, self.y_max,
        )


def _trapezoid_1d(count: int, h: float) -> np.ndarray:
    w = np.full(count, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class QuadratureWeights:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    combined: np.ndarray

    @classmethod
    def trapezoidal(cls, grid: SpaceTimeGrid) -> "QuadratureWeights":
        wt = _trapezoid_1d(grid.t_count, grid.dt)
        wx = _trapezoid_1d(grid.x_count, grid.dx)
        wy = _trapezoid_1d(grid.y_count, grid.dy)
        combined = wt[:, None, None] * wx[None, :, None] * wy[None, None, :]
        combined.setflags(write=False)
        return cls(wt, wx, wy, combined)

    @property
    def spatial(self) -> np.ndarray:
        return self.x[:, None] * self.y[None, :]


class Field:
    """Grid samples of a scalar function on D_T.

    Values are stored read-only; arithmetic returns new fields.
    """

    __slots__ = ("grid", "values")
    __array_priority__ = 100

    def __init__(self, grid: SpaceTimeGrid, values):
        values = np.array(values, dtype=float)
        if values.size != grid.size:
            raise FieldDataError(f"expected {grid.size} values for grid {grid.shape}, got {values.size}")
        values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise FieldDataError("field contains non-finite values")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"Field(shape={self.grid.shape}, max|v|={np.abs(self.values).max():.4g})"

    def _check(self, other: "Field"):
        if self.grid != other.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")

    def _binary(self, other, op):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, op(self.values, other.values))
        return Field(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return Field(self.grid, other - self.values)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def time_reversed(self) -> "Field":
        return Field(self.grid, self.values[::-1])

    def to_csv(self, path) -> None:
        write_field_csv(self, path)


def sample_function(grid: SpaceTimeGrid, fn: Callable) -> Field:
    """Evaluate ``fn(t, x, y)`` (vectorised over arrays) at every node."""
    T, X, Y = grid.coords
    values = np.broadcast_to(np.asarray(fn(T, X, Y), dtype=float), grid.shape)
    if not np.all(np.isfinite(values)):
        raise FieldDataError("sampled function is not finite on every node")
    return Field(grid, values)


def inner_product_l2(a: Field, b: Field) -> float:
    a._check(b)
    return float(np.sum(a.grid.weights.combined * a.values * b.values))


def _spatial_l2_sq(grid: SpaceTimeGrid, values: np.ndarray) -> np.ndarray:
    """Per-time-level squared L2(D) norm of ``values`` with shape (t, x, y)."""
    ws = grid.weights.spatial
    return np.einsum("xy,txy->t", ws, values * values)


def norm(f: Field, kind: str = "L2_DT") -> float:
    """Norm of ``f`` over D_T.

    ``L2t_H1x`` is the L2-in-time norm of the full H1(D) norm (value plus
    gradient); spatial derivatives use central differences inside and
    second-order one-sided differences on the boundary.
    """
    grid = f.grid
    v = f.values
    if kind == "L2_DT":
        return float(np.sqrt(max(inner_product_l2(f, f), 0.0)))
    if kind == "Linf_DT":
        return float(np.abs(v).max())
    if kind == "Linft_L2x":
        return float(np.sqrt(_spatial_l2_sq(grid, v).max()))
    if kind == "L2t_H1x":
        ux, uy = np.gradient(v, grid.dx, grid.dy, axis=(1, 2), edge_order=2)
        per_t = _spatial_l2_sq(grid, v) + _spatial_l2_sq(grid, ux) + _spatial_l2_sq(grid, uy)
        return float(np.sqrt(np.dot(grid.weights.t, per_t)))
    raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def write_field_csv(f: Field, path) -> None:
    grid = f.grid
    pts = grid.points
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "value"])
        for (t, x, y), val in zip(pts, f.values.ravel()):
            writer.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}", f"{val:.17g}"])


def read_field_csv(path, grid: SpaceTimeGrid) -> Field:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.size, 4):
        raise FieldDataError(f"CSV has {data.shape[0]} rows, grid needs {grid.size}")
    if not np.allclose(data[:, :3], grid.points, rtol=0, atol=1e-12):
        raise GridMismatchError("CSV node coordinates do not match the grid")
    return Field(grid, data[:, 3])
