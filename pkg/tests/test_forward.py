import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import allen_cahn_problem, manufactured_source, sym_callable
from nnpde.forward import (DivergenceError, PdeProblem, SpatialOperator, StepOperators, constant_diffusion,
                           linearize_at, second_derivative_at, solve_forward)
from nnpde.grid import Field, SpaceTimeGrid, norm
from nnpde.scenarios import base_problem, initial_condition

t_, x_, y_ = sympy.symbols("t x y", real=True)


def _zero_initial(x, y):
    return 0 * x * y


def test_zero_data_gives_zero_solution():
    grid = SpaceTimeGrid(9, 9, 9)
    u = solve_forward(PdeProblem(constant_diffusion(0.01), _zero_initial), grid.zeros()).u
    assert np.all(u.values == 0.0)


def test_heat_energy_strictly_decreases():
    grid = SpaceTimeGrid(33, 17, 17)
    u = solve_forward(base_problem("heat"), grid.zeros()).u
    w = grid.weights.spatial
    energy = np.sqrt(np.einsum("nij,ij->n", u.values**2, w))
    assert np.all(np.diff(energy) < 0)


def test_initial_level_and_boundary(scenario):
    grid = SpaceTimeGrid(9, 9, 9)
    problem = base_problem(scenario)
    u = solve_forward(problem, grid.sample(lambda t, x, y: 1 + t + x * y)).u.values
    f0 = problem.sample_initial(grid)
    f0[grid.boundary_mask] = 0.0
    np.testing.assert_array_equal(u[0], f0)
    assert np.all(u[:, grid.boundary_mask] == 0.0)


def test_laplacian_matrix_symmetric():
    grid = SpaceTimeGrid(3, 9, 11)
    ops = StepOperators.build(PdeProblem(constant_diffusion(0.3), _zero_initial), grid)
    m = ops.matrix(1)
    assert abs(m - m.T).max() < 1e-12


def test_variable_symmetric_diffusion_gives_symmetric_matrix():
    grid = SpaceTimeGrid(3, 7, 8)
    op = SpatialOperator(grid)
    x, y = np.meshgrid(grid.x, grid.y, indexing="ij")
    coeffs = {"a11": 1 + x, "a12": 0 * x, "a22": 2 + y}
    a = op.assemble(coeffs)
    assert abs(a - a.T).max() < 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
@settings(max_examples=15, deadline=None)
def test_heat_map_is_affine_in_source(alpha, beta, seed):
    grid = SpaceTimeGrid(5, 6, 6)
    problem = base_problem("heat")
    rng = np.random.default_rng(seed)
    g1, g2 = (Field(grid, rng.standard_normal(grid.shape)) for _ in range(2))
    u0 = solve_forward(problem, grid.zeros()).u
    lhs = solve_forward(problem, g1 * alpha + g2 * beta).u - u0
    rhs = (solve_forward(problem, g1).u - u0) * alpha + (solve_forward(problem, g2).u - u0) * beta
    assert np.allclose(lhs.values, rhs.values, atol=1e-12)


def test_linearize_examples():
    grid = SpaceTimeGrid(3, 3, 3)
    ac = base_problem("allen_cahn")
    assert np.all(linearize_at(base_problem("heat"), grid.constant(2.0)).values == 0.0)
    assert np.all(linearize_at(ac, grid.zeros()).values == -1.0)
    assert np.all(linearize_at(ac, grid.constant(1.0)).values == 2.0)
    assert np.all(second_derivative_at(ac, grid.constant(1.0)).values == 6.0)


def test_divergence_reports_time_index():
    grid = SpaceTimeGrid(40, 5, 5, t_max=4.0)
    problem = PdeProblem(constant_diffusion(1e-3), lambda x, y: 50 * np.sin(2 * np.pi * x) * np.sin(np.pi * y),
                         q=lambda t, x, y, u: u**3, q_u=lambda t, x, y, u: 3 * u**2,
                         q_uu=lambda t, x, y, u: 6 * u)
    with pytest.raises(DivergenceError) as info:
        solve_forward(problem, grid.zeros())
    assert 0 < info.value.time_index < grid.t_count


def test_problem_check_rejects_degenerate_diffusion():
    grid = SpaceTimeGrid(3, 5, 5)
    with pytest.raises(ValueError):
        PdeProblem(constant_diffusion(0.0), initial_condition).check(grid)
    with pytest.raises(ValueError):
        PdeProblem(constant_diffusion(0.1), lambda x, y: 1 + 0 * x).check(grid)


# --- manufactured solutions -------------------------------------------------------

def _temporal_case():
    # a quadratic profile in each spatial direction: the 5-point stencil is exact on it
    u = (1 + t_ + sympy.sin(3 * t_)) * x_ * (0.5 - x_) * y_ * (1 - y_) * 4
    return u


def temporal_errors(levels=(11, 21, 41, 81)):
    u = _temporal_case()
    exact = sym_callable(u, (t_, x_, y_))
    g = manufactured_source(u, q=lambda v: v**3 - v)
    problem = allen_cahn_problem(lambda x, y: exact(0.0, x, y))
    errs = []
    for nt in levels:
        grid = SpaceTimeGrid(nt, 9, 9)
        sol = solve_forward(problem, grid.sample(g)).u
        errs.append(norm(sol - grid.sample(exact)))
    return np.array(errs)


def _spatial_case():
    u = sympy.sin(2 * sympy.pi * x_) * sympy.sin(sympy.pi * y_) * 0.5
    a = (0.01 * (1 + x_), 0.002 * sympy.sin(sympy.pi * y_), 0.01 * (1 + y_ * y_))
    b = (0.05 * y_, -0.03 * x_)
    c = 0.1 * (1 + x_)
    return u, a, b, c


def spatial_errors(levels=(9, 17, 33)):
    u, a, b, c = _spatial_case()
    exact = sym_callable(u, (t_, x_, y_))
    g = manufactured_source(u, a, b, c, q=lambda v: v**3 - v)
    a_fns = [sym_callable(sympy.sympify(v) + 0 * t_, (t_, x_, y_)) for v in a]
    b_fns = [sym_callable(sympy.sympify(v) + 0 * t_, (t_, x_, y_)) for v in b]
    c_fn = sym_callable(c + 0 * t_, (t_, x_, y_))
    problem = allen_cahn_problem(lambda x, y: exact(0.0, x, y),
                                 diffusion=lambda t, x, y: tuple(f(t, x, y) for f in a_fns),
                                 drift=lambda t, x, y: tuple(f(t, x, y) for f in b_fns), reaction=c_fn)
    errs = []
    for n in levels:
        grid = SpaceTimeGrid(5, n, n)
        sol = solve_forward(problem, grid.sample(g)).u
        errs.append(norm(sol - grid.sample(exact)))
    return np.array(errs)


def test_manufactured_solution_first_order_in_time():
    errs = temporal_errors()
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 0.9), orders


def test_manufactured_solution_second_order_in_space():
    errs = spatial_errors()
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.9), orders
