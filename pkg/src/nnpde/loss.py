"""Tracking loss, relative RMSE and the end-to-end adjoint gradient."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adjoint import AdjointSolution, solve_adjoint
from .forward import ForwardSolution, PdeProblem, StepOperators, solve_forward
from .grid import Field, SpaceTimeGrid, inner_product_l2, norm
from .net import NetParams, eval_net, hidden_activations, net_param_gradient


@dataclass(frozen=True)
class LossReport:
    j: float
    rmse_rel: float
    h_linf: float


def compute_loss(u: Field, h: Field, h_linf: Optional[float] = None) -> LossReport:
    r = u - h
    j = 0.5 * inner_product_l2(r, r)
    if h_linf is None:
        h_linf = norm(h, "Linf_DT")
    rmse = float(np.sqrt(2.0 * j)) / h_linf if h_linf > 0 else float("inf")
    return LossReport(j, rmse, h_linf)


@dataclass
class GradientResult:
    grad: np.ndarray
    report: LossReport
    g: Field
    forward: ForwardSolution
    adjoint: AdjointSolution

    @property
    def u_hat(self) -> Field:
        return self.adjoint.u_hat


def evaluate(problem: PdeProblem, params: NetParams, grid: SpaceTimeGrid,
             operators: Optional[StepOperators] = None, h_linf: Optional[float] = None) -> GradientResult:
    """Network -> forward solve -> residual -> adjoint solve -> parameter gradient."""
    if problem.target is None:
        raise ValueError("problem has no target field")
    acts = hidden_activations(params, grid)
    g = eval_net(params, grid, acts)
    fwd = solve_forward(problem, g, grid, operators)
    report = compute_loss(fwd.u, problem.target, h_linf)
    adj = solve_adjoint(problem, fwd, fwd.u - problem.target)
    grad = net_param_gradient(params, adj.u_hat, acts)
    return GradientResult(grad, report, g, fwd, adj)


def gradient(problem: PdeProblem, params: NetParams, grid: SpaceTimeGrid,
             operators: Optional[StepOperators] = None) -> tuple[np.ndarray, LossReport, Field]:
    res = evaluate(problem, params, grid, operators)
    return res.grad, res.report, res.u_hat


def loss_of(problem: PdeProblem, params: NetParams, grid: SpaceTimeGrid,
            operators: Optional[StepOperators] = None) -> float:
    """Discrete loss only (no adjoint); used by finite-difference checks."""
    fwd = solve_forward(problem, eval_net(params, grid), grid, operators)
    return compute_loss(fwd.u, problem.target).j


def finite_difference_check(problem: PdeProblem, params: NetParams, grid: SpaceTimeGrid,
                            step: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """(adjoint gradient, central-difference gradient) of the discrete loss."""
    ops = StepOperators.build(problem, grid)
    grad = evaluate(problem, params, grid, ops).grad
    theta = params.to_vector()
    fd = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = step
        plus = loss_of(problem, params.from_vector(theta + e), grid, ops)
        minus = loss_of(problem, params.from_vector(theta - e), grid, ops)
        fd[k] = (plus - minus) / (2 * step)
    return grad, fd
