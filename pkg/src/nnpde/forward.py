"""IMEX finite-difference solver for  u_t + L u - q(u) = g  with zero Dirichlet data.

The linear operator

    L u = -div(a grad u) + b . grad u + c u

is treated implicitly, the nonlinearity ``q`` explicitly, and ``g`` is sampled at
the new time level, so one step reads

    (I + dt A^{n+1}) u^{n+1} = u^n + dt (q(t_n, ., u^n) + g^{n+1}).

Unknowns are the interior spatial nodes only; boundary values are identically
zero. ``A`` is assembled from flux differences with arithmetic face averages of
``a`` (symmetric whenever ``a`` is), central differences for the mixed
``a12`` terms and the drift, and a diagonal reaction term.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import Field, FieldDataError, GridMismatchError, SpaceTimeGrid


class SolverError(RuntimeError):
    """Base class for numerical failures inside the PDE solvers."""


class DivergenceError(SolverError):
    def __init__(self, time_index: int, message: str = "non-finite state"):
        super().__init__(f"{message} at time index {time_index}")
        self.time_index = time_index


def _zero(*args):
    return 0.0


@dataclass(frozen=True)
class PdeProblem:
    """Coefficients, nonlinearity, initial data and (optionally) the target.

    ``diffusion(t, x, y)`` returns the symmetric matrix entries ``(a11, a12, a22)``,
    ``drift(t, x, y)`` returns ``(b1, b2)``; all callables are vectorised over
    numpy arrays. ``q``, ``q_u`` and ``q_uu`` take ``(t, x, y, u)``.
    """

    diffusion: Callable
    initial: Callable
    drift: Optional[Callable] = None
    reaction: Optional[Callable] = None
    q: Callable = _zero
    q_u: Callable = _zero
    q_uu: Callable = _zero
    target: Optional[Field] = None
    name: str = "custom"

    @property
    def is_linear(self) -> bool:
        return self.q is _zero

    def with_target(self, target: Field) -> "PdeProblem":
        return PdeProblem(self.diffusion, self.initial, self.drift, self.reaction,
                          self.q, self.q_u, self.q_uu, target, self.name)

    def min_ellipticity(self, grid: SpaceTimeGrid) -> float:
        """Smallest eigenvalue of ``a`` over every grid node."""
        a11, a12, a22 = _diffusion_arrays(self, grid)
        mean = 0.5 * (a11 + a22)
        rad = np.sqrt(0.25 * (a11 - a22) ** 2 + a12**2)
        return float(np.min(mean - rad))

    def check(self, grid: SpaceTimeGrid) -> None:
        """Hard structural checks; softer assumption checks live in ``validate_assumptions``."""
        nu = self.min_ellipticity(grid)
        if not nu > 0:
            raise ValueError(f"diffusion is not uniformly elliptic on the grid (min eigenvalue {nu:.3g})")
        f0 = self.sample_initial(grid)
        edge = np.abs(f0[grid.boundary_mask]).max()
        if edge > 1e-12:
            raise ValueError(f"initial data does not vanish on the boundary (max |f| = {edge:.3g})")
        if self.target is not None and self.target.grid != grid:
            raise GridMismatchError("target field lives on a different grid")

    def sample_initial(self, grid: SpaceTimeGrid) -> np.ndarray:
        X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
        f0 = np.broadcast_to(np.asarray(self.initial(X, Y), dtype=float), X.shape).copy()
        if not np.all(np.isfinite(f0)):
            raise FieldDataError("initial condition is not finite on the grid")
        return f0


def constant_diffusion(nu: float) -> Callable:
    def a(t, x, y):
        return nu, 0.0, nu
    return a


def _diffusion_arrays(problem: PdeProblem, grid: SpaceTimeGrid):
    T, X, Y = grid.coords
    return tuple(np.broadcast_to(np.asarray(v, dtype=float), grid.shape)
                 for v in problem.diffusion(T, X, Y))


def _coefficient_arrays(problem: PdeProblem, grid: SpaceTimeGrid) -> dict:
    T, X, Y = grid.coords
    a11, a12, a22 = _diffusion_arrays(problem, grid)
    coeffs = {"a11": a11, "a12": a12, "a22": a22}
    if problem.drift is not None:
        b1, b2 = problem.drift(T, X, Y)
        coeffs["b1"] = np.broadcast_to(np.asarray(b1, dtype=float), grid.shape)
        coeffs["b2"] = np.broadcast_to(np.asarray(b2, dtype=float), grid.shape)
    if problem.reaction is not None:
        coeffs["c"] = np.broadcast_to(np.asarray(problem.reaction(T, X, Y), dtype=float), grid.shape)
    for k, v in coeffs.items():
        if not np.all(np.isfinite(v)):
            raise FieldDataError(f"coefficient {k} is not finite on the grid")
    return coeffs


def _forward_diff(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr") / h


def _central_diff(n: int, h: float) -> sp.csr_matrix:
    m = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], shape=(n, n), format="lil") / (2 * h)
    m[0, :] = 0
    m[n - 1, :] = 0
    return m.tocsr()


class SpatialOperator:
    """Assembles the interior-node matrix of ``L`` on a fixed spatial grid."""

    def __init__(self, grid: SpaceTimeGrid):
        nx, ny = grid.x_count, grid.y_count
        ix, iy = sp.identity(nx, format="csr"), sp.identity(ny, format="csr")
        self.gx = sp.kron(_forward_diff(nx, grid.dx), iy, format="csr")
        self.gy = sp.kron(ix, _forward_diff(ny, grid.dy), format="csr")
        self.cx = sp.kron(_central_diff(nx, grid.dx), iy, format="csr")
        self.cy = sp.kron(ix, _central_diff(ny, grid.dy), format="csr")
        self.interior = np.flatnonzero(~grid.boundary_mask.ravel())
        self.shape2d = (nx, ny)

    def assemble(self, c: dict) -> sp.csc_matrix:
        """Matrix of L restricted to interior nodes; ``c`` holds 2D coefficient arrays."""
        a11, a12, a22 = c["a11"], c["a12"], c["a22"]
        fx = 0.5 * (a11[:-1, :] + a11[1:, :])
        fy = 0.5 * (a22[:, :-1] + a22[:, 1:])
        op = self.gx.T @ sp.diags(fx.ravel()) @ self.gx + self.gy.T @ sp.diags(fy.ravel()) @ self.gy
        if np.any(a12 != 0):
            m12 = sp.diags(a12.ravel())
            op = op - (self.cx @ m12 @ self.cy + self.cy @ m12 @ self.cx)
        if "b1" in c:
            op = op + sp.diags(c["b1"].ravel()) @ self.cx + sp.diags(c["b2"].ravel()) @ self.cy
        if "c" in c:
            op = op + sp.diags(c["c"].ravel())
        op = op.tocsr()[self.interior][:, self.interior]
        return op.tocsc()


@dataclass
class StepOperators:
    """Factorised ``I + dt A^n`` per time index; a single factor is shared when
    the coefficients do not depend on time."""

    grid: SpaceTimeGrid
    matrices: list = field(default_factory=list)
    factors: list = field(default_factory=list)
    time_dependent: bool = False

    @classmethod
    def build(cls, problem: PdeProblem, grid: SpaceTimeGrid) -> "StepOperators":
        coeffs = _coefficient_arrays(problem, grid)
        spatial = SpatialOperator(grid)
        time_dep = any(not np.array_equal(v, np.broadcast_to(v[:1], v.shape)) for v in coeffs.values())
        eye = sp.identity(len(spatial.interior), format="csc")
        ops = cls(grid, time_dependent=time_dep)
        levels = range(1, grid.t_count) if time_dep else [0]
        for n in levels:
            a = spatial.assemble({k: v[n] for k, v in coeffs.items()})
            m = (eye + grid.dt * a).tocsc()
            try:
                lu = splu(m)
            except RuntimeError as err:
                raise SolverError(f"implicit operator is singular at time index {n}") from err
            ops.matrices.append(m)
            ops.factors.append(lu)
        return ops

    def _index(self, n: int) -> int:
        return n - 1 if self.time_dependent else 0

    def matrix(self, n: int) -> sp.csc_matrix:
        return self.matrices[self._index(n)]

    def solve(self, n: int, rhs: np.ndarray) -> np.ndarray:
        return self.factors[self._index(n)].solve(rhs)

    def solve_transpose(self, n: int, rhs: np.ndarray) -> np.ndarray:
        return self.factors[self._index(n)].solve(rhs, trans="T")


@dataclass
class ForwardSolution:
    u: Field
    operators: StepOperators
    problem: PdeProblem

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.u.grid

    def interior(self, values: np.ndarray) -> np.ndarray:
        """View of a (t, x, y) array restricted to interior nodes: shape (t, n_interior)."""
        return values[:, 1:-1, 1:-1].reshape(values.shape[0], -1)


def embed_interior(grid: SpaceTimeGrid, interior: np.ndarray) -> np.ndarray:
    """Inverse of ``ForwardSolution.interior``: pad (t, n_interior) with boundary zeros."""
    out = np.zeros(grid.shape)
    out[:, 1:-1, 1:-1] = interior.reshape(grid.t_count, grid.x_count - 2, grid.y_count - 2)
    return out


def _eval_q(fn, grid: SpaceTimeGrid, n: int, u2d: np.ndarray) -> np.ndarray:
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    return np.broadcast_to(np.asarray(fn(grid.t[n], X, Y, u2d), dtype=float), u2d.shape)


def solve_forward(problem: PdeProblem, g: Field, grid: Optional[SpaceTimeGrid] = None,
                  operators: Optional[StepOperators] = None) -> ForwardSolution:
    """March the IMEX scheme from ``f`` at t=0; ``operators`` may be reused across
    solves of the same problem on the same grid."""
    grid = grid or g.grid
    if g.grid != grid:
        raise GridMismatchError("source field lives on a different grid")
    if operators is None:
        operators = StepOperators.build(problem, grid)
    dt = grid.dt
    u = np.zeros(grid.shape)
    u[0] = problem.sample_initial(grid)
    u[0][grid.boundary_mask] = 0.0
    gv = g.values
    linear = problem.is_linear
    for n in range(grid.t_count - 1):
        rhs = u[n] + dt * gv[n + 1]
        if not linear:
            # overflow surfaces as a non-finite state, reported just below
            with np.errstate(over="ignore", invalid="ignore"):
                rhs = rhs + dt * _eval_q(problem.q, grid, n, u[n])
        new = operators.solve(n + 1, rhs[1:-1, 1:-1].ravel())
        if not np.all(np.isfinite(new)):
            raise DivergenceError(n + 1)
        u[n + 1, 1:-1, 1:-1] = new.reshape(grid.x_count - 2, grid.y_count - 2)
    return ForwardSolution(Field(grid, u), operators, problem)


def linearize_at(problem: PdeProblem, u: Field) -> Field:
    """Pointwise ``q_u(t, x, y, u(t, x, y))``."""
    T, X, Y = u.grid.coords
    vals = np.broadcast_to(np.asarray(problem.q_u(T, X, Y, u.values), dtype=float), u.grid.shape)
    if not np.all(np.isfinite(vals)):
        raise FieldDataError("q_u is not finite along the solution")
    return Field(u.grid, vals)


def second_derivative_at(problem: PdeProblem, u: Field) -> Field:
    """Pointwise ``q_uu(t, x, y, u(t, x, y))``."""
    T, X, Y = u.grid.coords
    vals = np.broadcast_to(np.asarray(problem.q_uu(T, X, Y, u.values), dtype=float), u.grid.shape)
    return Field(u.grid, vals)
