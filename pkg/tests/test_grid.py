import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnpde.grid import (Field, FieldDataError, GridMismatchError, QuadratureWeights, SpaceTimeGrid,
                        inner_product_l2, norm, read_field_csv, sample_function, write_field_csv)
from nnpde.scenarios import g_target, initial_condition

counts = st.integers(3, 9)


def test_constant_fields_integrate_to_measure():
    grid = SpaceTimeGrid(5, 5, 5)
    assert inner_product_l2(grid.constant(1), grid.constant(1)) == pytest.approx(0.5, rel=1e-12)
    assert inner_product_l2(grid.zeros(), grid.sample(lambda t, x, y: np.sin(x + y + t))) == 0.0


def test_hat_at_one_node_returns_its_weight():
    grid = SpaceTimeGrid(5, 5, 5)
    vals = np.zeros(grid.shape)
    vals[2, 1, 3] = 1.0
    hat = Field(grid, vals)
    assert inner_product_l2(hat, hat) == pytest.approx(grid.weights.combined[2, 1, 3], rel=1e-15)
    assert grid.weights.combined[2, 1, 3] == pytest.approx(grid.dt * grid.dx * grid.dy)


@given(counts, counts, counts, st.floats(0.1, 3), st.floats(-1, 1), st.floats(0.2, 2))
def test_weights_sum_to_volume(nt, nx, ny, t_max, x_min, width):
    grid = SpaceTimeGrid(nt, nx, ny, t_max=t_max, x_min=x_min, x_max=x_min + width)
    w = grid.weights
    assert np.all(w.combined >= 0)
    assert w.t[0] == pytest.approx(0.5 * w.t[1])
    assert w.x[-1] == pytest.approx(0.5 * w.x[1])
    assert w.combined.sum() == pytest.approx(t_max * width * 1.0, rel=1e-12)


@given(counts, counts, counts, st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_trapezoid_exact_for_multilinear(nt, nx, ny, k):
    grid = SpaceTimeGrid(nt, nx, ny)
    a = grid.sample(lambda t, x, y: (k[0] + k[1] * t) * (k[2] + k[3] * x) + 0 * y)
    b = grid.sample(lambda t, x, y: (k[4] + k[5] * y) + 0 * t * x)
    # integral of (k0 + k1 t)(k2 + k3 x)(k4 + k5 y) over [0,1]x[0,0.5]x[0,1]
    exact = (k[0] + k[1] / 2) * (0.5 * k[2] + k[3] / 8) * (k[4] + k[5] / 2)
    assert inner_product_l2(a, b) == pytest.approx(exact, rel=1e-12, abs=1e-13)


@given(counts, counts, counts, st.integers(0, 2**31))
@settings(max_examples=30)
def test_inner_product_symmetric_bilinear_and_norm_consistent(nt, nx, ny, seed):
    grid = SpaceTimeGrid(nt, nx, ny)
    rng = np.random.default_rng(seed)
    a, b, c = (Field(grid, rng.standard_normal(grid.shape)) for _ in range(3))
    assert inner_product_l2(a, b) == pytest.approx(inner_product_l2(b, a), rel=1e-12)
    lhs = inner_product_l2(a * 2.0 + c, b)
    assert lhs == pytest.approx(2 * inner_product_l2(a, b) + inner_product_l2(c, b), rel=1e-9, abs=1e-12)
    assert norm(a) ** 2 == pytest.approx(inner_product_l2(a, a), rel=1e-12)
    assert all(norm(a, k) > 0 for k in ("L2_DT", "Linf_DT", "L2t_H1x", "Linft_L2x"))


def test_norm_examples():
    grid = SpaceTimeGrid(9, 9, 9)
    assert norm(grid.constant(-3.0)) == pytest.approx(3 * np.sqrt(0.5), rel=1e-12)
    zero = grid.zeros()
    assert all(norm(zero, k) == 0 for k in ("L2_DT", "Linf_DT", "L2t_H1x", "Linft_L2x"))
    assert norm(grid.sample(lambda t, x, y: x + 0 * t * y), "Linf_DT") == 0.5


def test_h1_seminorm_of_linear_field():
    grid = SpaceTimeGrid(5, 9, 9)
    f = grid.sample(lambda t, x, y: 2 * x + 3 * y + 0 * t)
    # L2(H1) = sqrt(int_t int_D f^2 + |grad f|^2)
    t, x, y = grid.coords
    l2sq = inner_product_l2(f, f)
    assert norm(f, "L2t_H1x") == pytest.approx(np.sqrt(l2sq + 13 * 0.5), rel=1e-12)


def test_l2_norm_converges_second_order():
    fn = lambda t, x, y: np.exp(t) * np.sin(3 * x) * np.cos(2 * y)  # noqa: E731
    exact = np.sqrt((np.exp(2) - 1) / 2 * (0.25 - np.sin(3.0) / 12) * (0.5 + np.sin(4.0) / 8))
    errs = [abs(norm(SpaceTimeGrid(n, n, n).sample(fn)) - exact) for n in (5, 9, 17)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_sample_examples():
    grid = SpaceTimeGrid(3, 5, 5)
    assert g_target(0.0, 0.0, 0.37) == 0.0
    assert g_target(0.0, 0.25, 0.5) == pytest.approx(1.125, rel=1e-12)
    assert initial_condition(0.125, 0.25) == pytest.approx(0.2, rel=1e-12)
    f = sample_function(grid, g_target)
    assert f.values[0, 2, 2] == pytest.approx(1.125, rel=1e-12)


def test_rejects_bad_data():
    grid = SpaceTimeGrid(3, 3, 3)
    with pytest.raises(FieldDataError):
        grid.sample(lambda t, x, y: np.where(x > 0.2, np.nan, 0.0) + 0 * t * y)
    with pytest.raises(FieldDataError):
        Field(grid, np.zeros(5))
    with pytest.raises(GridMismatchError):
        inner_product_l2(grid.zeros(), SpaceTimeGrid(3, 3, 4).zeros())
    with pytest.raises(ValueError):
        SpaceTimeGrid(2, 5, 5)
    with pytest.raises(ValueError):
        SpaceTimeGrid(3, 5, 5, x_max=-1)


def test_fields_are_immutable():
    f = SpaceTimeGrid(3, 3, 3).constant(1.0)
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 2.0


def test_csv_round_trip(tmp_path):
    grid = SpaceTimeGrid(3, 4, 5)
    f = Field(grid, np.random.default_rng(0).standard_normal(grid.shape))
    path = tmp_path / "f.csv"
    write_field_csv(f, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,value"
    assert len(lines) == grid.size + 1
    back = read_field_csv(path, grid)
    np.testing.assert_array_equal(back.values, f.values)


def test_quadrature_object():
    w = QuadratureWeights.trapezoidal(SpaceTimeGrid(3, 3, 3))
    assert w.combined.shape == (3, 3, 3)
    assert w.spatial.sum() == pytest.approx(0.5)
