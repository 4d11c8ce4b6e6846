import numpy as np
import pytest
import sympy

from nnpde.forward import PdeProblem, constant_diffusion
from nnpde.grid import SpaceTimeGrid
from nnpde.net import InitDistribution, init_params
from nnpde.scenarios import make_problem


@pytest.fixture
def small_grid():
    return SpaceTimeGrid(7, 7, 7)


@pytest.fixture
def grid9():
    return SpaceTimeGrid(9, 9, 9)


@pytest.fixture(params=["heat", "allen_cahn"])
def scenario(request):
    return request.param


@pytest.fixture
def problem7(scenario, small_grid):
    return make_problem(scenario, small_grid)


@pytest.fixture
def params3():
    return init_params(3, 2 / 3, InitDistribution(seed=1))


def manufactured_source(u_expr, a=(0.01, 0, 0.01), b=(0, 0), c=0, q=None):
    """Callable g(t, x, y) with g = u_t + L u - q(u) for the sympy expression ``u_expr``."""
    t, x, y = sympy.symbols("t x y", real=True)
    a11, a12, a22 = (sympy.sympify(v) for v in a)
    b1, b2 = (sympy.sympify(v) for v in b)
    ux, uy = sympy.diff(u_expr, x), sympy.diff(u_expr, y)
    flux_x = a11 * ux + a12 * uy
    flux_y = a12 * ux + a22 * uy
    lu = -(sympy.diff(flux_x, x) + sympy.diff(flux_y, y)) + b1 * ux + b2 * uy + sympy.sympify(c) * u_expr
    g = sympy.diff(u_expr, t) + lu - (q(u_expr) if q else 0)
    fn = sympy.lambdify((t, x, y), g, "numpy")
    return lambda T, X, Y: np.broadcast_to(fn(T, X, Y), np.broadcast(T, X, Y).shape)


def sym_callable(expr, args):
    fn = sympy.lambdify(args, expr, "numpy")
    return lambda *v: np.broadcast_to(np.asarray(fn(*v), dtype=float), np.broadcast(*v).shape)


def allen_cahn_problem(initial, diffusion=None, drift=None, reaction=None):
    return PdeProblem(
        diffusion or constant_diffusion(0.01), initial, drift=drift, reaction=reaction,
        q=lambda t, x, y, u: u**3 - u, q_u=lambda t, x, y, u: 3 * u**2 - 1,
        q_uu=lambda t, x, y, u: 6 * u, name="allen_cahn_mms",
    )


ACCEPTANCE_LINES = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
