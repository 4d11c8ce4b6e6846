"""Command-line entry point: ``python3 -m nnpde <command> [flags]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, parse_grid
from .expr import ExpressionError
from .forward import DivergenceError
from .kernel import ResourceError
from .net import ConfigError, init_params

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_RESOURCE = 0, 2, 3, 4

log = logging.getLogger("nnpde")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--n", type=int, help="neuron count")
    common.add_argument("--epochs", type=int)
    common.add_argument("--grid", help="time and space node counts 'nt,nx,ny'")
    common.add_argument("--scenario", choices=["heat", "allen_cahn", "custom"])
    common.add_argument("--log-y", dest="log_y", action=argparse.BooleanOptionalAction, default=None,
                        help="logarithmic y axis in SVG plots")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="nnpde", description="Train NN source terms in parabolic PDEs.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="one training run (limit flow if limit_mode)")
    sw = sub.add_parser("sweep", parents=[common], help="train over a list of neuron counts and seeds")
    sw.add_argument("--n-list", help="comma-separated neuron counts")
    sw.add_argument("--seeds", type=int, help="seeds per neuron count")
    sw.add_argument("--jobs", type=int)
    lim = sub.add_parser("limit", parents=[common], help="infinite-width flow with a frozen kernel")
    lim.add_argument("--steps", type=int)
    lim.add_argument("--dtau", type=float)
    gc = sub.add_parser("gradcheck", parents=[common], help="adjoint gradient vs central differences")
    gc.add_argument("--step", type=float, default=1e-5)
    ks = sub.add_parser("kernel-spectrum", parents=[common], help="leading eigenvalues of the initial kernel")
    ks.add_argument("--k-max", type=int, default=50)
    sub.add_parser("validate", parents=[common], help="report the standing assumptions")
    sub.add_parser("schema", help="print the JSON schema of the config file")
    return p


def build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    for name in ("seed", "n", "epochs", "scenario", "log_y"):
        if getattr(args, name, None) is not None:
            changes[name] = getattr(args, name)
    if args.out:
        changes["output_dir"] = args.out
    if args.grid:
        changes["grid"] = parse_grid(args.grid)
    if getattr(args, "n_list", None):
        try:
            changes["n_list"] = [int(v) for v in args.n_list.split(",")]
        except ValueError as err:
            raise ConfigError(f"--n-list expects integers, got {args.n_list!r}") from err
    if getattr(args, "seeds", None) is not None:
        changes["seeds_for_averaging"] = args.seeds
    if getattr(args, "jobs", None) is not None:
        changes["jobs"] = args.jobs
    cfg = replace(cfg, **changes)
    lim = {}
    if getattr(args, "steps", None) is not None:
        lim["steps"] = args.steps
    if getattr(args, "dtau", None) is not None:
        lim["dtau"] = args.dtau
    if args.command in ("limit", "kernel-spectrum") and args.grid:
        lim["grid"] = cfg.grid
    if lim:
        cfg = replace(cfg, limit=replace(cfg.limit, **lim))
    return cfg


def _cmd_train(cfg):
    from .experiments import run_training
    if cfg.limit_mode:
        return _cmd_limit(cfg)
    res = run_training(cfg, progress=True)
    last = res.records[-1]
    print(f"epochs={last.epoch} final_rmse={last.rmse_rel:.6g} best_rmse={last.best_rmse_so_far:.6g} "
          f"out={res.output_dir}")


def _cmd_sweep(cfg):
    from .experiments import run_n_sweep
    res = run_n_sweep(cfg, cfg.n_list)
    for n in res.n_list:
        print(f"N={n} mean_best_rmse={res.mean_best[n]:.6g} stderr={res.stderr[n]:.3g}")
    for n, seed, err in res.failures:
        print(f"FAILED N={n} seed={seed}: {err}")
    if res.failures and len(res.failures) == cfg.seeds_for_averaging * len(set(cfg.n_list)):
        raise DivergenceError(-1, "every run in the sweep failed")


def _cmd_limit(cfg):
    from .experiments import run_limit_experiment
    s = run_limit_experiment(cfg)
    print(json.dumps(s.to_json()))


def _cmd_gradcheck(cfg, step):
    from .experiments import build_problem, init_distribution
    from .loss import finite_difference_check
    grid = cfg.grid.build()
    problem = build_problem(cfg, grid)
    params = init_params(cfg.n, cfg.beta, init_distribution(cfg), cfg.activation)
    grad, fd = finite_difference_check(problem, params, grid, step)
    scale = np.maximum(np.abs(fd), np.finfo(float).tiny)
    rel = np.abs(grad - fd) / scale
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "gradcheck.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "adjoint", "finite_difference", "rel_error"])
        for k in range(grad.size):
            writer.writerow([k, f"{grad[k]:.17g}", f"{fd[k]:.17g}", f"{rel[k]:.17g}"])
    print(f"parameters={grad.size} max_rel_error={rel.max():.3e}")


def _cmd_spectrum(cfg, k_max):
    from .experiments import write_spectrum
    eig = write_spectrum(cfg, k_max)
    print("leading eigenvalues: " + " ".join(f"{v:.4g}" for v in eig[:10]))


def _cmd_validate(cfg):
    from .experiments import build_problem, init_distribution, validate_assumptions
    grid = cfg.grid.build()
    dist = init_distribution(cfg)
    params = init_params(cfg.n, cfg.beta, dist, cfg.activation)
    report = validate_assumptions(build_problem(cfg, grid), params, dist, grid)
    for c in report.checks:
        print(c.line())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.json").write_text(json.dumps(report.to_json(), indent=1))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "schema":
        from .config import json_schema
        print(json.dumps(json_schema(), indent=1))
        return EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "train":
            _cmd_train(cfg)
        elif args.command == "sweep":
            _cmd_sweep(cfg)
        elif args.command == "limit":
            _cmd_limit(cfg)
        elif args.command == "gradcheck":
            _cmd_gradcheck(cfg, args.step)
        elif args.command == "kernel-spectrum":
            _cmd_spectrum(cfg, args.k_max)
        elif args.command == "validate":
            _cmd_validate(cfg)
    except (ConfigError, ExpressionError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, FloatingPointError) as err:
        print(f"numerical divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ResourceError, MemoryError) as err:
        print(f"resource budget exceeded: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
