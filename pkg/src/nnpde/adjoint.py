"""Discrete adjoints of the IMEX forward scheme.

Everything here is the exact transpose of the forward stepping, so gradients
assembled from these fields are gradients of the *discrete* loss.

Weight flow (the one place quadrature weights enter):

    residual r  --(x W)-->  p^Nt, p^n      backward recursion on raw vectors
    mu^n = M_n^{-T} p^n                    dJ/dg^n = dt * mu^n
    u_hat^n = dt * mu^n / W^n              Riesz representer in the weighted inner product

so that ``sum_nodes W * grad_theta g * u_hat`` reproduces the exact gradient and
nothing downstream multiplies by W a second time before the quadrature sum.
A consequence: ``u_hat`` vanishes at t=0 (g there never reaches u) and its last
time level is O(dt) rather than exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import DivergenceError, ForwardSolution, PdeProblem, embed_interior, linearize_at, second_derivative_at
from .grid import Field, GridMismatchError


@dataclass
class AdjointSolution:
    u_hat: Field
    multipliers: np.ndarray  # mu^n on interior nodes, shape (t_count, n_interior)


def _reaction_jacobian(problem: PdeProblem, fwd: ForwardSolution) -> np.ndarray | None:
    if problem.is_linear:
        return None
    return fwd.interior(linearize_at(problem, fwd.u).values)


def _backward(fwd: ForwardSolution, qu: np.ndarray | None, source: np.ndarray) -> np.ndarray:
    """Transpose recursion for a weighted source ``source`` of shape (t, n_interior).

    Returns mu with mu[0] = 0.
    """
    ops = fwd.operators
    dt = fwd.grid.dt
    nt = source.shape[0]
    mu = np.zeros_like(source)
    p = source[nt - 1].copy()
    for n in range(nt - 1, 0, -1):
        mu[n] = ops.solve_transpose(n, p)
        if not np.all(np.isfinite(mu[n])):
            raise DivergenceError(n, "non-finite adjoint state")
        if n > 1:
            prop = mu[n] if qu is None else mu[n] + dt * qu[n - 1] * mu[n]
            p = source[n - 1] + prop
    return mu


def _forward_linear(fwd: ForwardSolution, qu: np.ndarray | None, source: np.ndarray) -> np.ndarray:
    """Linearised forward recursion with zero initial data; ``source`` is the
    field of g-perturbations on interior nodes."""
    ops = fwd.operators
    dt = fwd.grid.dt
    out = np.zeros_like(source)
    for n in range(1, source.shape[0]):
        prev = out[n - 1] if qu is None else out[n - 1] + dt * qu[n - 1] * out[n - 1]
        out[n] = ops.solve(n, prev + dt * source[n])
        if not np.all(np.isfinite(out[n])):
            raise DivergenceError(n, "non-finite linearised state")
    return out


def _riesz(fwd: ForwardSolution, mu: np.ndarray) -> Field:
    grid = fwd.grid
    w = fwd.interior(grid.weights.combined)
    vals = np.zeros_like(mu)
    vals[1:] = grid.dt * mu[1:] / w[1:]
    return Field(grid, embed_interior(grid, vals))


def _check(fwd: ForwardSolution, *fields: Field):
    for f in fields:
        if f.grid != fwd.grid:
            raise GridMismatchError("field and forward solution live on different grids")


def apply_linearized(problem: PdeProblem, fwd: ForwardSolution, g: Field) -> Field:
    """Derivative of the map g -> u at the stored trajectory, applied to ``g``."""
    _check(fwd, g)
    qu = _reaction_jacobian(problem, fwd)
    out = _forward_linear(fwd, qu, fwd.interior(g.values))
    return Field(fwd.grid, embed_interior(fwd.grid, out))


def solve_adjoint(problem: PdeProblem, fwd: ForwardSolution, residual: Field) -> AdjointSolution:
    """Backward adjoint with source ``residual``; returns the weighted-L2 adjoint of
    ``apply_linearized`` applied to ``residual``."""
    _check(fwd, residual)
    qu = _reaction_jacobian(problem, fwd)
    w = fwd.interior(fwd.grid.weights.combined)
    mu = _backward(fwd, qu, w * fwd.interior(residual.values))
    return AdjointSolution(_riesz(fwd, mu), mu)


def solve_second_level(problem: PdeProblem, fwd: ForwardSolution, u_hat: AdjointSolution,
                       source_w: Field) -> tuple[Field, Field]:
    """Second-level adjoints ``(w_hat, v_hat)``.

    ``w_hat`` is the linearised forward response to ``source_w``; ``v_hat`` is the
    backward adjoint driven by ``w_hat + q_uu(u) u_hat w_hat``, with the u_hat
    factor taken one time level ahead as the transposed scheme dictates. With
    ``source_w = 2 T u_hat`` this makes ``(v_hat, dg)`` the exact derivative of
    ``(u_hat, T u_hat)`` in the direction ``dg``.
    """
    _check(fwd, u_hat.u_hat, source_w)
    grid = fwd.grid
    qu = _reaction_jacobian(problem, fwd)
    what = _forward_linear(fwd, qu, fwd.interior(source_w.values))
    w = fwd.interior(grid.weights.combined)
    zeta = w * what
    if not problem.is_linear:
        quu = fwd.interior(second_derivative_at(problem, fwd.u).values)
        # dt * mu^{n+1} = W^{n+1} u_hat^{n+1}
        ahead = grid.dt * u_hat.multipliers[1:]
        zeta[:-1] += quu[:-1] * ahead * what[:-1]
    mu = _backward(fwd, qu, zeta)
    return Field(grid, embed_interior(grid, what)), _riesz(fwd, mu)
