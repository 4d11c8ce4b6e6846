#!/usr/bin/env python3
"""Neuron-count sweep for one scenario; writes sweep.csv and the combined plot.

    python3 scripts/run_sweep.py heat --out runs/sweep_heat
"""
import argparse
import logging
import time

from nnpde.config import ExperimentConfig, load_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("scenario", choices=["heat", "allen_cahn"])
    ap.add_argument("--config")
    ap.add_argument("--out")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--seeds", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--n-list", default="10,50,200,1000")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    from nnpde.experiments import run_n_sweep

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = cfg.replace(scenario=args.scenario, output_dir=args.out or f"runs/sweep_{args.scenario}", jobs=args.jobs)
    if args.epochs is not None:
        cfg = cfg.replace(epochs=args.epochs)
    if args.seeds is not None:
        cfg = cfg.replace(seeds_for_averaging=args.seeds)
    n_list = [int(v) for v in args.n_list.split(",")]
    start = time.perf_counter()
    res = run_n_sweep(cfg, n_list)
    for n in n_list:
        print(f"{args.scenario} N={n:5d} mean best RMSE {res.mean_best[n]:.5f} +- {res.stderr[n]:.5f}")
    for failure in res.failures:
        print("failed run:", failure)
    print(f"wall time {time.perf_counter() - start:.0f} s")


if __name__ == "__main__":
    main()
