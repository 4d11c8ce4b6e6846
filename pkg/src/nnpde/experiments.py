"""Calibration runs: assumption checks, training loop, neuron-count sweeps."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from . import expr
from .config import ExperimentConfig
from .forward import PdeProblem, StepOperators
from .grid import SpaceTimeGrid
from .kernel import assemble_kernel, kernel_spectrum
from .limit import (check_decay_identity, check_dq_identity, check_regularity_bound,
                    history_to_csv, run_limit)
from .loss import evaluate
from .net import ACTIVATIONS, InitDistribution, NetParams, init_params
from .optim import OptimizerState, Schedule, ZClip, scaled_rate, step
from .scenarios import base_problem, with_synthetic_target
from .svg import line_plot

log = logging.getLogger(__name__)

LOG_HEADER = ["epoch", "j", "rmse_rel", "grad_norm", "rate", "clipped", "best_rmse"]


# --- problem construction ---------------------------------------------------------

def build_problem(cfg: ExperimentConfig, grid: Optional[SpaceTimeGrid] = None) -> PdeProblem:
    grid = grid or cfg.grid.build()
    if cfg.scenario != "custom":
        return with_synthetic_target(base_problem(cfg.scenario), grid)
    c = cfg.custom
    a11, a12, a22 = (expr.function_of(s) for s in (c.a11, c.a12, c.a22))
    b1, b2 = expr.function_of(c.b1), expr.function_of(c.b2)
    react = expr.function_of(c.c)
    q, q_u, q_uu = expr.nonlinearity(c.q)
    init = expr.function_of(c.initial, ("x", "y"))
    linear = expr.parse(c.q) == 0
    problem = PdeProblem(
        diffusion=lambda t, x, y: (a11(t, x, y), a12(t, x, y), a22(t, x, y)),
        initial=init,
        drift=None if expr.parse(c.b1) == 0 and expr.parse(c.b2) == 0 else (lambda t, x, y: (b1(t, x, y), b2(t, x, y))),
        reaction=None if expr.parse(c.c) == 0 else react,
        name="custom",
        **({} if linear else {"q": q, "q_u": q_u, "q_uu": q_uu}),
    )
    return with_synthetic_target(problem, grid, expr.function_of(c.target_source))


def init_distribution(cfg: ExperimentConfig, seed: Optional[int] = None) -> InitDistribution:
    return InitDistribution(cfg.init.c_lo, cfg.init.c_hi, cfg.seed if seed is None else seed)


# --- assumption validation --------------------------------------------------------

@dataclass
class Check:
    name: str
    status: str  # pass | fail | warn
    value: Optional[float]
    detail: str

    def line(self) -> str:
        val = "" if self.value is None else f" ({self.value:.6g})"
        return f"{self.name:<6} {self.status.upper():<4}{val} {self.detail}"


@dataclass
class ValidationReport:
    checks: list

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def to_json(self) -> list:
        return [c.__dict__ for c in self.checks]


def _max_abs_over_probe(fn, grid: SpaceTimeGrid, bound: float, samples: int = 81) -> float:
    T, X, Y = grid.coords
    best = 0.0
    for u in np.linspace(-bound, bound, samples):
        vals = np.asarray(fn(T, X, Y, np.full(grid.shape, u)), dtype=float)
        best = max(best, float(np.abs(vals).max()))
    return best


def _bounded_on_probe(fn, grid, bound) -> tuple[float, bool]:
    """(max on |u| <= bound, whether it stays put when the box is doubled)."""
    local = _max_abs_over_probe(fn, grid, bound)
    wider = _max_abs_over_probe(fn, grid, 2 * bound)
    return local, wider <= local * (1 + 1e-9) + 1e-12


def _spatial_derivative_sup(values: np.ndarray, grid: SpaceTimeGrid) -> float:
    if np.all(values == values.flat[0]):
        return 0.0
    dx = np.gradient(values, grid.dx, axis=1)
    dy = np.gradient(values, grid.dy, axis=2)
    return float(max(np.abs(dx).max(), np.abs(dy).max()))


def validate_assumptions(problem: PdeProblem, params: Optional[NetParams], dist: InitDistribution,
                         grid: SpaceTimeGrid, u_probe: float = 2.0) -> ValidationReport:
    """Measure each standing assumption on the grid; W-items only ever warn."""
    from .forward import _coefficient_arrays

    # smoothness of the boundary is not checked: every grid here is a rectangle
    checks = [
        Check("A2", "pass", (grid.x_max - grid.x_min) * (grid.y_max - grid.y_min),
              f"bounded domain [{grid.x_min:g},{grid.x_max:g}]x[{grid.y_min:g},{grid.y_max:g}], area reported"),
    ]
    nu = problem.min_ellipticity(grid)
    checks.append(Check("A3", "pass" if nu > 0 else "fail", nu, "nu = min eigenvalue of a over the grid"))

    coeffs = _coefficient_arrays(problem, grid)
    sup = max(float(np.abs(v).max()) for v in coeffs.values())
    dsup = max(_spatial_derivative_sup(coeffs[k], grid) for k in coeffs if k != "c")
    checks.append(Check("A4", "pass", max(sup, dsup),
                        f"sup |coefficients| = {sup:.4g}, sup |spatial derivative of a, b| = {dsup:.4g}"))

    for name, fn, label in (("A5", problem.q_u, "c_q = max |q_u|"), ("A6", problem.q_uu, "c'_q = max |q_uu|")):
        value, bounded = _bounded_on_probe(fn, grid, u_probe)
        if bounded:
            checks.append(Check(name, "pass", value, f"{label} over |u| <= {u_probe:g}"))
        else:
            checks.append(Check(name, "warn", value,
                                f"{label} over |u| <= {u_probe:g}; grows with |u|, no global bound"))

    # well-posedness group: reported, never blocking
    checks.append(Check("W1", "warn" if problem.drift is not None or problem.reaction is not None else "pass",
                        None, "Hoelder continuity of coefficients is not measurable on a grid; assumed"))
    growth, bounded = _bounded_on_probe(lambda t, x, y, u: problem.q(t, x, y, u) / (1 + np.abs(u)), grid, 2 * u_probe)
    checks.append(Check("W2", "pass" if bounded else "warn", growth,
                        "C_q = max |q|/(1+|u|)" + ("" if bounded else ", superlinear growth")))
    checks.append(Check("W3", "pass", None, "q_u continuous (analytic nonlinearity)"))
    f0 = problem.sample_initial(grid)
    edge = float(np.abs(f0[grid.boundary_mask]).max())
    checks.append(Check("W4", "pass" if edge <= 1e-12 else "warn", edge, "max |f| on the boundary"))

    activation = params.activation if params is not None else "tanh"
    sigma, dsigma = ACTIVATIONS[activation]
    z = np.linspace(-40, 40, 80_001)
    s, ds = sigma(z), dsigma(z)
    c_sigma = float(np.abs(s).max())
    lip = float(np.abs(ds).max())
    nonconst = float(s.max() - s.min()) > 1e-8
    checks.append(Check("B1", "pass" if nonconst else "fail", c_sigma,
                        f"{activation}: C_sigma = {c_sigma:.4g}, L_sigma = {lip:.4g}"))
    lip2 = float(np.abs(np.diff(ds) / np.diff(z)).max())
    checks.append(Check("B2", "pass", lip, f"C_sigma' = {lip:.4g}, L_sigma' ~ {lip2:.4g}"))

    checks.append(Check("B3i", "pass", None, "c drawn independently of (w_t, w, eta)"))
    mean_c = 0.5 * (dist.c_lo + dist.c_hi)
    checks.append(Check("B3ii", "pass" if dist.centered else "fail", mean_c,
                        f"c ~ U[{dist.c_lo:g}, {dist.c_hi:g}], support bound {dist.c_bound:g}"))
    # standard normal: E|z|^k finite for every k; the d+2 = 4th moment of a 4-vector
    checks.append(Check("B3iii", "pass", 24.0, "(w_t, w, eta) ~ N(0, I_4): 4th moment E|z|^4 = 24"))
    checks.append(Check("B3iv", "pass", None, "Gaussian law charges every set of positive measure"))
    if params is not None:
        checks.append(Check("beta", "pass" if 0.5 < params.beta < 1 else "fail", params.beta,
                            "scaling exponent in (1/2, 1)"))
    return ValidationReport(checks)


# --- training ---------------------------------------------------------------------

@dataclass
class TrainRecord:
    epoch: int
    j: float
    rmse_rel: float
    grad_norm: float
    rate: float
    clipped: bool
    best_rmse_so_far: float

    def row(self) -> list:
        return [str(self.epoch), f"{self.j:.17g}", f"{self.rmse_rel:.17g}", f"{self.grad_norm:.17g}",
                f"{self.rate:.17g}", str(int(self.clipped)), f"{self.best_rmse_so_far:.17g}"]


def _make_optimizer(cfg: ExperimentConfig) -> OptimizerState:
    z = cfg.zclip
    zclip = ZClip(z.alpha, z.z_threshold, z.warmup) if z.enabled else None
    o = cfg.optimizer
    return OptimizerState(o.kind, o.beta1, o.beta2, o.eps, zclip=zclip)


def _make_schedule(cfg: ExperimentConfig) -> Schedule:
    s = cfg.schedule
    return Schedule(s.kind, s.base_rate, s.dtau, s.factor, s.patience, s.threshold,
                    s.patience_decay, s.min_patience, max(cfg.epochs, 1))


def train_iter(cfg: ExperimentConfig, problem: Optional[PdeProblem] = None,
               params: Optional[NetParams] = None) -> Iterator[tuple[TrainRecord, NetParams]]:
    """Yield one record per epoch; epoch k reports the parameters after k updates."""
    grid = cfg.grid.build()
    problem = problem or build_problem(cfg, grid)
    params = params or init_params(cfg.n, cfg.beta, init_distribution(cfg), cfg.activation)
    ops = StepOperators.build(problem, grid)
    opt = _make_optimizer(cfg)
    sched = _make_schedule(cfg)
    best = float("inf")
    from .grid import norm
    h_linf = norm(problem.target, "Linf_DT")
    for epoch in range(cfg.epochs + 1):
        res = evaluate(problem, params, grid, ops, h_linf)
        rate = scaled_rate(sched, params.n, params.beta, epoch)
        grad_norm = float(np.linalg.norm(res.grad))
        clipped = False
        new_params = params
        if epoch < cfg.epochs:
            grad, clipped = opt.clip(res.grad)
            new_params = step(opt, params, grad, rate)
            sched.observe(res.report.j)
        best = min(best, res.report.rmse_rel)
        yield TrainRecord(epoch, res.report.j, res.report.rmse_rel, grad_norm, rate, clipped, best), params
        params = new_params


@dataclass
class TrainResult:
    records: list
    best_params: NetParams
    final_params: NetParams
    output_dir: Optional[Path]


def run_training(cfg: ExperimentConfig, write: bool = True, progress: bool = False) -> TrainResult:
    out = Path(cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=1))
    records, best_params, best_val, params = [], None, float("inf"), None
    fh = open(out / "train_log.csv", "w", newline="") if write else None
    writer = csv.writer(fh) if fh else None
    if writer:
        writer.writerow(LOG_HEADER)
    try:
        for rec, params in train_iter(cfg):
            records.append(rec)
            if writer:
                writer.writerow(rec.row())
            if rec.rmse_rel < best_val:
                best_val, best_params = rec.rmse_rel, params
            if progress and rec.epoch % 100 == 0:
                log.info("epoch %d  J=%.4e  rmse=%.4e  best=%.4e  rate=%.3e",
                         rec.epoch, rec.j, rec.rmse_rel, rec.best_rmse_so_far, rec.rate)
    except Exception:
        if write and params is not None:
            params.save(out / "checkpoint_params.json")
        raise
    finally:
        if fh:
            fh.close()
        if write and best_params is not None:
            best_params.save(out / "best_params.json")
    if write:
        params.save(out / "final_params.json")
        plot_training_log(out / "train_log.csv", out, cfg.log_y)
    return TrainResult(records, best_params, params, out if write else None)


def read_log(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in LOG_HEADER}


def plot_training_log(csv_path, out_dir, log_y: bool = True) -> None:
    data = read_log(csv_path)
    out_dir = Path(out_dir)
    line_plot({"RMSE": (data["epoch"], data["rmse_rel"])}, out_dir / "rmse.svg",
              "relative RMSE per epoch", "epoch", "RMSE", log_y)
    line_plot({"best RMSE": (data["epoch"], data["best_rmse"])}, out_dir / "best_rmse.svg",
              "best relative RMSE so far", "epoch", "best RMSE", log_y)


# --- sweeps -----------------------------------------------------------------------

def _sweep_run(cfg: ExperimentConfig, n: int, seed_offset: int, root: Path) -> tuple:
    run_cfg = replace(cfg, n=n, seed=cfg.seed + seed_offset, output_dir=str(root / f"N{n}_seed{cfg.seed + seed_offset}"))
    try:
        res = run_training(run_cfg)
        return n, seed_offset, [r.best_rmse_so_far for r in res.records], None
    except Exception as err:  # recorded, sweep continues
        log.error("run N=%d seed=%d failed: %s", n, run_cfg.seed, err)
        return n, seed_offset, None, f"{type(err).__name__}: {err}"


@dataclass
class SweepResult:
    n_list: list
    mean_best: dict
    stderr: dict
    curves: dict
    failures: list


def run_n_sweep(cfg: ExperimentConfig, n_list: Sequence[int]) -> SweepResult:
    if not n_list:
        raise ValueError("n_list must not be empty")
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    unique = list(dict.fromkeys(int(n) for n in n_list))
    tasks = [(n, s) for n in unique for s in range(cfg.seeds_for_averaging)]
    if cfg.jobs > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=cfg.jobs)(delayed(_sweep_run)(cfg, n, s, root) for n, s in tasks)
    else:
        results = [_sweep_run(cfg, n, s, root) for n, s in tasks]
    curves, failures = {}, []
    for n, s, curve, err in results:
        if err is not None:
            failures.append((n, cfg.seed + s, err))
        else:
            curves.setdefault(n, []).append(curve)
    mean_best, stderr, mean_curves = {}, {}, {}
    for n in unique:
        runs = curves.get(n, [])
        finals = np.array([c[-1] for c in runs])
        mean_best[n] = float(finals.mean()) if len(finals) else float("nan")
        stderr[n] = float(finals.std(ddof=1) / np.sqrt(len(finals))) if len(finals) > 1 else 0.0
        if runs:
            mean_curves[n] = np.mean(np.array(runs), axis=0)
    with open(root / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "runs", "mean_best_rmse", "stderr"])
        for n in unique:
            writer.writerow([n, len(curves.get(n, [])), f"{mean_best[n]:.17g}", f"{stderr[n]:.17g}"])
    with open(root / "sweep_curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch"] + [f"N{n}" for n in mean_curves])
        if mean_curves:
            length = len(next(iter(mean_curves.values())))
            for k in range(length):
                writer.writerow([k] + [f"{mean_curves[n][k]:.17g}" for n in mean_curves])
    plot_sweep(root / "sweep_curves.csv", root / "sweep_best_rmse.svg", cfg.log_y)
    return SweepResult(list(n_list), {n: mean_best[int(n)] for n in n_list},
                       {n: stderr[int(n)] for n in n_list}, mean_curves, failures)


def plot_sweep(curves_csv, path, log_y: bool = True) -> None:
    with open(curves_csv, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    epochs = [float(r[0]) for r in body]
    series = {f"N={h[1:]}": (epochs, [float(r[k]) for r in body]) for k, h in enumerate(header) if k > 0}
    line_plot(series, path, "seed-averaged best relative RMSE", "epoch", "best RMSE", log_y)


# --- limit flow -------------------------------------------------------------------

@dataclass
class LimitSummary:
    history: list
    decay_gap: float
    dq_gap: Optional[float]
    regularity_holds: Optional[bool]
    q_ratio: float
    j_monotone: bool

    def to_json(self) -> dict:
        return {"decay_gap": self.decay_gap, "dq_gap": self.dq_gap, "regularity_holds": self.regularity_holds,
                "q_ratio": self.q_ratio, "j_monotone": self.j_monotone, "records": len(self.history)}


def random_probes(grid: SpaceTimeGrid, count: int = 5, seed: int = 0) -> list:
    from .grid import Field
    rng = np.random.default_rng(seed)
    return [Field(grid, rng.standard_normal(grid.shape)) for _ in range(count)]


def run_limit_experiment(cfg: ExperimentConfig, write: bool = True) -> LimitSummary:
    lc = cfg.limit
    grid = lc.grid.build()
    problem = build_problem(cfg, grid)
    kernel = assemble_kernel(init_distribution(cfg), grid, lc.mc_samples, activation=cfg.activation)
    sched = Schedule(lc.schedule, lc.base_rate, lc.dtau)
    probes = random_probes(grid, 5, cfg.seed)
    state = run_limit(problem, kernel, lc.dtau, lc.steps, sched, lc.second_level, probes)
    hist = state.history
    eps = np.finfo(float).eps
    j0 = hist[0].j
    monotone = all(b.j <= a.j + 10 * eps * j0 for a, b in zip(hist, hist[1:]))
    q_ratio = hist[-1].q / hist[0].q if hist[0].q > 0 else 0.0
    decay = check_decay_identity(hist) if len(hist) >= 3 else float("nan")
    dq = holds = None
    if lc.second_level and len(hist) >= 3:
        dq = check_dq_identity(hist)
        holds = check_regularity_bound(hist, kernel).holds
    summary = LimitSummary(hist, decay, dq, holds, q_ratio, monotone)
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        history_to_csv(hist, out / "limit_history.csv")
        with open(out / "limit_probes.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau"] + [f"probe{k}" for k in range(len(probes))])
            for r in hist:
                writer.writerow([f"{r.tau:.17g}"] + [f"{v:.17g}" for v in r.probes])
        (out / "limit_summary.json").write_text(json.dumps(summary.to_json(), indent=1))
        plot_limit_history(out / "limit_history.csv", out / "limit_JQ.svg", cfg.log_y)
    return summary


def plot_limit_history(csv_path, path, log_y: bool = True) -> None:
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    tau = [float(r["tau"]) for r in rows]
    line_plot({"J": (tau, [float(r["J"]) for r in rows]), "Q": (tau, [float(r["Q"]) for r in rows])},
              path, "limit flow: loss J and Q", "tau", "value", log_y)


def write_spectrum(cfg: ExperimentConfig, k_max: int = 50, grid: Optional[SpaceTimeGrid] = None) -> np.ndarray:
    grid = grid or cfg.limit.grid.build()
    kernel = assemble_kernel(init_distribution(cfg), grid, cfg.limit.mc_samples, activation=cfg.activation)
    eig = kernel_spectrum(kernel, k_max)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "kernel_spectrum.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue"])
        for k, v in enumerate(eig):
            writer.writerow([k, f"{v:.17g}"])
    line_plot({"eigenvalue": (np.arange(len(eig)), np.abs(eig))}, out / "kernel_spectrum.svg",
              f"kernel spectrum (weighted Frobenius norm {kernel.weighted_frobenius():.4g})",
              "index", "|eigenvalue|", cfg.log_y)
    return eig
