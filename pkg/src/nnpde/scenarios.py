"""The heat and Allen-Cahn calibration problems on D = [0, 0.5] x [0, 1], T = 1."""
from __future__ import annotations

import numpy as np

from .forward import PdeProblem, constant_diffusion, solve_forward
from .grid import SpaceTimeGrid

DIFFUSIVITY = 0.01
DEFAULT_GRID = SpaceTimeGrid(33, 17, 17)


def initial_condition(x, y):
    return 0.2 * np.sin(4 * np.pi * x) * np.sin(2 * np.pi * y)


def g_target(t, x, y):
    return 1600 * x * (1 - 2 * x) * y**2 * (0.2 + 0.6 * t - y) ** 2 * (1 - y) ** 2


def allen_cahn_q(t, x, y, u):
    return u**3 - u


def allen_cahn_q_u(t, x, y, u):
    return 3 * u**2 - 1


def allen_cahn_q_uu(t, x, y, u):
    return 6 * u


def base_problem(scenario: str) -> PdeProblem:
    a = constant_diffusion(DIFFUSIVITY)
    if scenario == "heat":
        return PdeProblem(a, initial_condition, name="heat")
    if scenario == "allen_cahn":
        return PdeProblem(a, initial_condition, q=allen_cahn_q, q_u=allen_cahn_q_u,
                          q_uu=allen_cahn_q_uu, name="allen_cahn")
    raise ValueError(f"unknown scenario {scenario!r}")


def with_synthetic_target(problem: PdeProblem, grid: SpaceTimeGrid, source=g_target) -> PdeProblem:
    """Attach the target ``h``: the discrete solution driven by ``source``."""
    h = solve_forward(problem, grid.sample(source), grid).u
    return problem.with_target(h)


def make_problem(scenario: str, grid: SpaceTimeGrid = DEFAULT_GRID) -> PdeProblem:
    return with_synthetic_target(base_problem(scenario), grid)
