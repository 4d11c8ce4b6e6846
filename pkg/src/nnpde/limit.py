"""Infinite-width training flow with a frozen kernel, and its diagnostics.

The limit source evolves by explicit Euler in training time,

    g_{k+1} = g_k - dtau * alpha(tau_k) * T_B0 u_hat_k,

with u_hat_k the discrete adjoint at g_k. Each record stores the state *before*
the update, so the loss/Q sequences are sampled at tau_k = k * dtau.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .adjoint import solve_adjoint, solve_second_level
from .forward import PdeProblem, StepOperators, solve_forward
from .grid import Field, SpaceTimeGrid, inner_product_l2, norm
from .kernel import KernelOperator, apply_operator
from .loss import compute_loss, evaluate
from .net import InitDistribution, init_params
from .optim import Schedule


class InsufficientHistoryError(ValueError):
    pass


@dataclass
class LimitRecord:
    tau: float
    j: float
    q: float
    norm_uhat: float
    rate: float
    uhat_linft_l2: float
    dq_dtau: Optional[float] = None
    norm_vhat: Optional[float] = None
    what_linf: Optional[float] = None
    probes: Optional[np.ndarray] = None


@dataclass
class LimitState:
    g_star: Field
    kernel: KernelOperator
    tau: float = 0.0
    step: int = 0
    history: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)  # step -> (u, u_hat, g)


def initial_state(kernel: KernelOperator) -> LimitState:
    return LimitState(kernel.grid.zeros(), kernel)


def learning_rate(sched: Schedule, tau: float) -> float:
    """alpha at training time ``tau`` (plateau schedules are treated as constant here)."""
    if sched.kind == "robbins_monro":
        return sched.base_rate / (1.0 + tau)
    return sched.rate()


def limit_step(state: LimitState, problem: PdeProblem, dtau: float, sched: Schedule,
               operators: Optional[StepOperators] = None, second_level: bool = False,
               probes: Sequence[Field] = (), snapshot: bool = False) -> LimitState:
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    rec, update, fields = _evaluate(state, problem, sched, operators, second_level, probes)
    history = state.history + [rec]
    snaps = dict(state.snapshots)
    if snapshot:
        snaps[state.step] = fields
    g_new = state.g_star - dtau * rec.rate * update
    return LimitState(g_new, state.kernel, state.tau + dtau, state.step + 1, history, snaps)


def _evaluate(state, problem, sched, operators, second_level, probes):
    grid = state.g_star.grid
    try:
        fwd = solve_forward(problem, state.g_star, grid, operators)
    except Exception as err:
        raise type(err)(f"{err} (training time tau={state.tau:.6g})") from err
    report = compute_loss(fwd.u, problem.target)
    adj = solve_adjoint(problem, fwd, fwd.u - problem.target)
    tu = apply_operator(state.kernel, adj.u_hat)
    q = inner_product_l2(adj.u_hat, tu)
    alpha = learning_rate(sched, state.tau)
    rec = LimitRecord(state.tau, report.j, q, norm(adj.u_hat), alpha, norm(adj.u_hat, "Linft_L2x"))
    if second_level:
        w_hat, v_hat = solve_second_level(problem, fwd, adj, 2.0 * tu)
        rec.dq_dtau = -alpha * inner_product_l2(tu, v_hat)
        rec.norm_vhat = norm(v_hat)
        rec.what_linf = norm(w_hat, "Linf_DT")
    if probes:
        rec.probes = np.array([inner_product_l2(p, adj.u_hat) for p in probes])
    return rec, tu, (fwd.u, adj.u_hat, state.g_star)


def run_limit(problem: PdeProblem, kernel: KernelOperator, dtau: float, steps: int, sched: Schedule,
              second_level: bool = False, probes: Sequence[Field] = (),
              snapshot_steps: Sequence[int] = ()) -> LimitState:
    """``steps`` Euler steps from g = 0, plus a closing record at the final tau."""
    grid = kernel.grid
    ops = StepOperators.build(problem, grid)
    state = initial_state(kernel)
    wanted = set(snapshot_steps)
    for _ in range(steps):
        state = limit_step(state, problem, dtau, sched, ops, second_level, probes, state.step in wanted)
    rec, _, fields = _evaluate(state, problem, sched, ops, second_level, probes)
    state.history.append(rec)
    if state.step in wanted:
        state.snapshots[state.step] = fields
    return state


def _uniform_dtau(history) -> float:
    taus = np.array([r.tau for r in history])
    steps = np.diff(taus)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError("history is not uniformly spaced in training time")
    return float(steps[0])


def check_decay_identity(history, problem: Optional[PdeProblem] = None) -> float:
    """Max relative gap between the centred difference of J and -alpha Q."""
    if len(history) < 3:
        raise InsufficientHistoryError("need at least 3 records")
    dtau = _uniform_dtau(history)
    worst = 0.0
    for k in range(1, len(history) - 1):
        fd = (history[k + 1].j - history[k - 1].j) / (2 * dtau)
        pred = -history[k].rate * history[k].q
        if pred == 0.0:
            gap = 0.0 if fd == 0.0 else float("inf")
        else:
            gap = abs(fd - pred) / abs(pred)
        worst = max(worst, gap)
    return worst


def check_dq_identity(history) -> float:
    """Max relative gap between the centred difference of Q and the second-level value."""
    if len(history) < 3:
        raise InsufficientHistoryError("need at least 3 records")
    if any(r.dq_dtau is None for r in history):
        raise InsufficientHistoryError("history lacks second-level data")
    dtau = _uniform_dtau(history)
    worst = 0.0
    for k in range(1, len(history) - 1):
        fd = (history[k + 1].q - history[k - 1].q) / (2 * dtau)
        pred = history[k].dq_dtau
        if pred == 0.0:
            gap = 0.0 if fd == 0.0 else float("inf")
        else:
            gap = abs(fd - pred) / abs(pred)
        worst = max(worst, gap)
    return worst


@dataclass
class RegularityReport:
    lhs: np.ndarray
    rhs: np.ndarray
    lipschitz: float

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs))


def check_regularity_bound(history, kernel: KernelOperator) -> RegularityReport:
    """Compare |Q(tau_j) - Q(tau_i)| with L_Q * int_{tau_i}^{tau_j} alpha over all pairs.

    L_Q = ||B||_{L2} * max ||u_hat|| * max ||v_hat|| from the run; the rate
    integral is the left Riemann sum of the rates actually applied.
    """
    if len(history) < 2:
        raise InsufficientHistoryError("need at least 2 records")
    if any(r.norm_vhat is None for r in history):
        raise InsufficientHistoryError("history lacks second-level data")
    q = np.array([r.q for r in history])
    taus = np.array([r.tau for r in history])
    rates = np.array([r.rate for r in history])
    cum = np.concatenate([[0.0], np.cumsum(rates[:-1] * np.diff(taus))])
    lip = kernel.weighted_frobenius() * max(r.norm_uhat for r in history) * max(r.norm_vhat for r in history)
    i, j = np.triu_indices(len(history), k=0)
    return RegularityReport(np.abs(q[j] - q[i]), lip * (cum[j] - cum[i]), lip)


def history_to_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "J", "Q", "norm_uhat_L2", "rate"])
        for r in history:
            writer.writerow([f"{r.tau:.17g}", f"{r.j:.17g}", f"{r.q:.17g}", f"{r.norm_uhat:.17g}", f"{r.rate:.17g}"])


# --- finite width versus limit -------------------------------------------------

def trajectory_distances(finite: dict, limit: dict) -> dict:
    """Distances between two trajectories given as {checkpoint: (u, u_hat, g)}."""
    out = {}
    for key in sorted(limit):
        u_a, uh_a, g_a = finite[key]
        u_b, uh_b, g_b = limit[key]
        du, duh = u_a - u_b, uh_a - uh_b
        out[key] = {
            "u": norm(du, "L2t_H1x") + norm(du, "Linft_L2x"),
            "u_hat": norm(duh, "L2t_H1x") + norm(duh, "Linft_L2x"),
            "g": norm(g_a - g_b),
        }
    return out


def finite_width_trajectory(problem: PdeProblem, params, dtau: float, steps: int, sched: Schedule,
                            checkpoints: Sequence[int], operators: Optional[StepOperators] = None) -> dict:
    """Plain gradient descent with step dtau * alpha / N^(1-2 beta), matched to the limit flow."""
    grid = problem.target.grid
    ops = operators or StepOperators.build(problem, grid)
    wanted = set(checkpoints)
    traj = {}
    for k in range(steps + 1):
        res = evaluate(problem, params, grid, ops)
        if k in wanted:
            traj[k] = (res.forward.u, res.u_hat, res.g)
        if k == steps:
            break
        tau = k * dtau
        rate = learning_rate(sched, tau) * float(params.n) ** (2 * params.beta - 1)
        params = params.from_vector(params.to_vector() - dtau * rate * res.grad)
    return traj


@dataclass
class FiniteVsLimit:
    n_list: list
    checkpoints: list
    mean: dict   # n -> checkpoint -> {"u", "u_hat", "g"}
    stderr: dict


def compare_finite_to_limit(problem: PdeProblem, dist: InitDistribution, n_list: Sequence[int],
                            checkpoints: Sequence[int], kernel: KernelOperator, dtau: float,
                            sched: Schedule, seeds: int = 5, beta: float = 2 / 3,
                            limit_state: Optional[LimitState] = None) -> FiniteVsLimit:
    """Seed-averaged distances between width-N gradient descent and the limit flow.

    ``checkpoints`` are training-step indices shared by both runs.
    """
    steps = max(checkpoints)
    if limit_state is None:
        limit_state = run_limit(problem, kernel, dtau, steps, sched, snapshot_steps=checkpoints)
    missing = set(checkpoints) - set(limit_state.snapshots)
    if missing:
        raise ValueError(f"limit run lacks snapshots for steps {sorted(missing)}")
    limit = {k: limit_state.snapshots[k] for k in checkpoints}
    ops = StepOperators.build(problem, kernel.grid)
    mean, stderr = {}, {}
    for n in n_list:
        per_seed = []
        for s in range(seeds):
            params = init_params(n, beta, replace(dist, seed=dist.seed + s))
            traj = finite_width_trajectory(problem, params, dtau, steps, sched, checkpoints, ops)
            per_seed.append(trajectory_distances(traj, limit))
        mean[n], stderr[n] = {}, {}
        for k in checkpoints:
            mean[n][k], stderr[n][k] = {}, {}
            for name in ("u", "u_hat", "g"):
                vals = np.array([d[k][name] for d in per_seed])
                mean[n][k][name] = float(vals.mean())
                stderr[n][k][name] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return FiniteVsLimit(list(n_list), list(checkpoints), mean, stderr)


def initial_source_norms(grid: SpaceTimeGrid, dist: InitDistribution, n_list: Sequence[int],
                         seeds: int = 20, beta: float = 2 / 3) -> dict:
    """Seed-mean ||g^N_theta0||_{L2(D_T)} for each N."""
    from .net import eval_net

    out = {}
    for n in n_list:
        vals = [norm(eval_net(init_params(n, beta, replace(dist, seed=dist.seed + s)), grid))
                for s in range(seeds)]
        out[n] = float(np.mean(vals))
    return out


def loglog_slope(n_list: Sequence[int], values: Sequence[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(n_list, float)), np.log(np.asarray(values, float)), 1)[0])
