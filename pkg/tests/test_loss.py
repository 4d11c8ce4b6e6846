import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnpde.forward import solve_forward
from nnpde.grid import Field, GridMismatchError, SpaceTimeGrid
from nnpde.loss import compute_loss, evaluate, finite_difference_check, gradient, loss_of
from nnpde.net import InitDistribution, eval_net, init_params
from nnpde.scenarios import base_problem, make_problem


def test_loss_examples():
    grid = SpaceTimeGrid(5, 5, 5)
    h = grid.sample(lambda t, x, y: 1 + t + x * y)
    assert compute_loss(h, h).j == 0.0 and compute_loss(h, h).rmse_rel == 0.0
    assert compute_loss(h + 1.0, h).j == pytest.approx(0.25, rel=1e-12)
    r = grid.sample(lambda t, x, y: np.sin(t + x + y))
    assert compute_loss(h + r * 2.0, h).j == pytest.approx(4 * compute_loss(h + r, h).j, rel=1e-12)
    with pytest.raises(GridMismatchError):
        compute_loss(h, SpaceTimeGrid(5, 5, 6).zeros())


@given(st.integers(0, 1000))
def test_rmse_definition(seed):
    grid = SpaceTimeGrid(4, 4, 4)
    rng = np.random.default_rng(seed)
    u, h = (Field(grid, rng.standard_normal(grid.shape)) for _ in range(2))
    rep = compute_loss(u, h)
    assert rep.j >= 0
    assert rep.h_linf == np.abs(h.values).max()
    assert rep.rmse_rel == np.sqrt(2 * rep.j) / rep.h_linf


def test_gradient_matches_central_differences(problem7, params3, small_grid):
    grad, fd = finite_difference_check(problem7, params3, small_grid)
    assert grad.size == 15
    assert np.max(np.abs(grad - fd) / np.abs(fd)) < 1e-6


def test_gradient_on_5_grid(scenario):
    grid = SpaceTimeGrid(5, 5, 5)
    grad, fd = finite_difference_check(make_problem(scenario, grid), init_params(3, 2 / 3, InitDistribution(seed=8)),
                                       grid)
    assert np.max(np.abs(grad - fd) / np.abs(fd)) < 1e-6


def test_zero_output_weights_structure():
    grid = SpaceTimeGrid(5, 5, 5)
    problem = base_problem("heat")
    problem = problem.with_target(solve_forward(problem, grid.zeros()).u + grid.sample(
        lambda t, x, y: t * np.sin(2 * np.pi * x) * np.sin(np.pi * y)))
    p = init_params(4, 2 / 3, InitDistribution(seed=1))
    p = p.from_vector(np.concatenate([np.zeros(4), p.to_vector()[4:]]))
    grad, _, _ = gradient(problem, p, grid)
    assert np.all(grad[:4] != 0.0)
    assert np.all(grad[4:] == 0.0)


def test_exact_fit_gives_zero_gradient(scenario):
    grid = SpaceTimeGrid(5, 5, 5)
    p = init_params(3, 2 / 3, InitDistribution(seed=2))
    problem = base_problem(scenario)
    problem = problem.with_target(solve_forward(problem, eval_net(p, grid)).u)
    grad, rep, u_hat = gradient(problem, p, grid)
    assert rep.j == 0.0 and np.all(grad == 0.0) and np.all(u_hat.values == 0.0)


def test_descent_step_decreases_loss(scenario):
    grid = SpaceTimeGrid(7, 7, 7)
    problem = make_problem(scenario, grid)
    p = init_params(5, 2 / 3, InitDistribution(seed=4))
    res = evaluate(problem, p, grid)
    theta = p.to_vector()
    prev_drop = None
    for rate in (1.0, 0.5, 0.25):
        j = loss_of(problem, p.from_vector(theta - rate * res.grad), grid)
        drop = res.report.j - j
        assert drop > 0
        if prev_drop is not None and prev_drop > 10 * np.finfo(float).eps * res.report.j:
            assert j <= res.report.j
        prev_drop = drop
