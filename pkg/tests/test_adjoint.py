import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnpde.adjoint import apply_linearized, solve_adjoint, solve_second_level
from nnpde.forward import solve_forward
from nnpde.grid import Field, SpaceTimeGrid, inner_product_l2, norm
from nnpde.kernel import apply_operator, assemble_kernel
from nnpde.net import InitDistribution, init_params, eval_net
from nnpde.scenarios import base_problem, make_problem


def _random_field(grid, rng):
    return Field(grid, rng.standard_normal(grid.shape))


def _state(scenario, grid, seed=0):
    problem = make_problem(scenario, grid)
    g = eval_net(init_params(4, 2 / 3, InitDistribution(seed=seed)), grid)
    return problem, solve_forward(problem, g)


@given(st.sampled_from(["heat", "allen_cahn"]), st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_transpose_identity(scenario, seed):
    grid = SpaceTimeGrid(6, 6, 7)
    problem, fwd = _state(scenario, grid)
    rng = np.random.default_rng(seed)
    g, r = _random_field(grid, rng), _random_field(grid, rng)
    lhs = inner_product_l2(apply_linearized(problem, fwd, g), r)
    rhs = inner_product_l2(g, solve_adjoint(problem, fwd, r).u_hat)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_zero_residual_gives_zero_adjoint(scenario):
    grid = SpaceTimeGrid(5, 6, 6)
    problem, fwd = _state(scenario, grid)
    assert np.all(solve_adjoint(problem, fwd, grid.zeros()).u_hat.values == 0.0)
    at_target = problem.with_target(fwd.u)
    assert np.all(solve_adjoint(at_target, fwd, fwd.u - at_target.target).u_hat.values == 0.0)


def test_adjoint_vanishes_on_boundary_and_first_level(scenario):
    grid = SpaceTimeGrid(5, 6, 6)
    problem, fwd = _state(scenario, grid)
    uh = solve_adjoint(problem, fwd, _random_field(grid, np.random.default_rng(3))).u_hat.values
    assert np.all(uh[:, grid.boundary_mask] == 0.0)
    assert np.all(uh[0] == 0.0)


def test_terminal_level_is_first_order_small():
    # the last level of the discrete adjoint is O(dt), not exactly zero
    tails = []
    for nt in (11, 21, 41):
        grid = SpaceTimeGrid(nt, 9, 9)
        problem = base_problem("heat").with_target(grid.zeros())
        fwd = solve_forward(problem, grid.zeros())
        r = grid.sample(lambda t, x, y: np.sin(2 * np.pi * x) * np.sin(np.pi * y) + 0 * t)
        uh = solve_adjoint(problem, fwd, r).u_hat
        tails.append(np.abs(uh.values[-1]).max() / np.abs(uh.values).max())
    assert tails[1] / tails[0] == pytest.approx(0.5, abs=0.05)
    assert tails[2] / tails[1] == pytest.approx(0.5, abs=0.05)


def test_self_adjoint_heat_matches_time_reversed_forward():
    gaps = []
    for nt in (11, 21, 41):
        grid = SpaceTimeGrid(nt, 9, 9)
        problem = base_problem("heat")
        zero_start = problem.__class__(problem.diffusion, lambda x, y: 0 * x)
        r = grid.sample(lambda t, x, y: np.sin(2 * np.pi * x) * np.sin(np.pi * y) + 0 * t)
        uh = solve_adjoint(problem, solve_forward(problem, grid.zeros()), r).u_hat
        reversed_fwd = solve_forward(zero_start, r.time_reversed()).u.time_reversed()
        # interior time levels: the endpoints carry the known O(dt) boundary-layer offset
        diff = np.abs(uh.values[1:-1] - reversed_fwd.values[1:-1]).max()
        gaps.append(diff / np.abs(reversed_fwd.values).max())
    assert gaps[0] < 0.1
    ratios = np.array(gaps[1:]) / np.array(gaps[:-1])
    assert np.all((ratios > 0.4) & (ratios < 0.6)), ratios


def test_second_level_zero_source(scenario):
    grid = SpaceTimeGrid(5, 6, 6)
    problem, fwd = _state(scenario, grid)
    adj = solve_adjoint(problem, fwd, fwd.u - problem.target)
    w_hat, v_hat = solve_second_level(problem, fwd, adj, grid.zeros())
    assert np.all(w_hat.values == 0.0) and np.all(v_hat.values == 0.0)


def test_second_level_linear_reduces_to_adjoint_of_w_hat():
    grid = SpaceTimeGrid(6, 7, 7)
    problem, fwd = _state("heat", grid)
    adj = solve_adjoint(problem, fwd, fwd.u - problem.target)
    src = _random_field(grid, np.random.default_rng(1))
    w_hat, v_hat = solve_second_level(problem, fwd, adj, src)
    np.testing.assert_allclose(v_hat.values, solve_adjoint(problem, fwd, w_hat).u_hat.values, atol=1e-14)


@pytest.mark.parametrize("scenario", ["heat", "allen_cahn"])
def test_second_level_is_derivative_of_q(scenario):
    """(v_hat, dg) equals the directional derivative of Q(g) = (u_hat, T u_hat)."""
    grid = SpaceTimeGrid(6, 6, 6)
    problem = make_problem(scenario, grid)
    kernel = assemble_kernel(InitDistribution(seed=2), grid, 500)
    g = eval_net(init_params(4, 2 / 3, InitDistribution(seed=0)), grid)
    dg = _random_field(grid, np.random.default_rng(5))

    def q_of(field):
        fwd = solve_forward(problem, field)
        uh = solve_adjoint(problem, fwd, fwd.u - problem.target).u_hat
        return inner_product_l2(uh, apply_operator(kernel, uh))

    fwd = solve_forward(problem, g)
    adj = solve_adjoint(problem, fwd, fwd.u - problem.target)
    _, v_hat = solve_second_level(problem, fwd, adj, apply_operator(kernel, adj.u_hat) * 2.0)
    h = 1e-4
    fd = (q_of(g + dg * h) - q_of(g - dg * h)) / (2 * h)
    assert inner_product_l2(v_hat, dg) == pytest.approx(fd, rel=1e-6)
