import numpy as np
import pytest

from scoreprior import (
    DensityGrid,
    DomainError,
    GridMismatchError,
    StencilError,
    central_difference,
    exponential_grid,
    gaussian_grid,
    lomax_grid,
    trapezoid,
    uniform_grid,
)


def test_uniform_grid_spacing():
    x = uniform_grid(0.0, 1.0, 11)
    assert x.shape == (11,)
    assert np.allclose(np.diff(x), 0.1)


def test_trapezoid_matches_numpy():
    x = uniform_grid(0.0, 3.0, 301)
    y = np.sin(x) + 2.0
    assert trapezoid(y, x[1] - x[0]) == pytest.approx(np.trapezoid(y, x), abs=1e-12)


def test_central_difference_orders():
    x = uniform_grid(-1.0, 1.0, 2001)
    h = x[1] - x[0]
    y = np.exp(x)
    for order in (1, 2, 3, 4):
        d = central_difference(y, h, order=order)
        interior = slice(8, -8)
        assert np.max(np.abs(d - y)[interior]) < 1e-5 * 10 ** (order - 1)


def test_central_difference_short_array():
    with pytest.raises(StencilError):
        central_difference(np.ones(3), 0.1, order=4)
    with pytest.raises(StencilError):
        central_difference(np.ones(2), 0.1, order=1)
    with pytest.raises(DomainError):
        central_difference(np.ones(10), 0.1, order=5)


def test_density_grid_validation():
    x = uniform_grid(0.0, 1.0, 21)
    with pytest.raises(DomainError):
        DensityGrid(x=x, q=-np.ones_like(x))
    with pytest.raises(DomainError):
        DensityGrid(x=x[::-1].copy(), q=np.ones_like(x))
    with pytest.raises(GridMismatchError):
        DensityGrid(x=x, q=np.ones(5))
    # non-uniform spacing is rejected
    bad = np.concatenate([x[:10], x[10:] + 0.05])
    with pytest.raises(DomainError):
        DensityGrid(x=bad, q=np.ones_like(bad))


def test_density_grid_derivative_fallback():
    x = uniform_grid(-3.0, 3.0, 1201)
    g = DensityGrid(x=x, q=np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi))
    d1 = g.derivative(1)
    expect = -x * g.q
    assert np.max(np.abs(d1 - expect)[10:-10]) < 1e-5


def test_gaussian_grid_closed_forms():
    x = uniform_grid(-6.0, 6.0, 2401)
    g = gaussian_grid(0.5, 1.5, x, n_derivs=2)
    z = (x - 0.5) / 1.5
    pdf = np.exp(-0.5 * z * z) / (1.5 * np.sqrt(2 * np.pi))
    assert np.allclose(g.q, pdf)
    assert np.allclose(g.q1, -z / 1.5 * pdf)
    assert np.allclose(g.q2, (z * z - 1.0) / 1.5 ** 2 * pdf)
    assert g.check_mass(1e-3)
    assert not g.check_mass(1e-6)  # tail mass beyond x=6 exceeds that


def test_exponential_grid_derivatives():
    x = uniform_grid(0.0, 12.0, 1201)
    g = exponential_grid(2.0, x, n_derivs=3)
    assert np.allclose(g.q1, -2.0 * g.q)
    assert np.allclose(g.q3, -8.0 * g.q)


def test_lomax_grid_derivatives():
    x = uniform_grid(0.0, 30.0, 3001)
    g = lomax_grid(2.0, x, n_derivs=4)
    assert np.allclose(g.q, 2.0 / (2.0 + x) ** 2)
    assert np.allclose(g.q1, -4.0 / (2.0 + x) ** 3)
    assert np.allclose(g.q2, 12.0 / (2.0 + x) ** 4)
    assert np.allclose(g.q4, 240.0 / (2.0 + x) ** 6)


def test_lomax_grid_rejects_negative_axis():
    with pytest.raises(DomainError):
        lomax_grid(1.0, uniform_grid(-1.0, 1.0, 21))


def test_from_callable_and_integral():
    x = uniform_grid(0.0, 1.0, 101)
    g = DensityGrid.from_callable(lambda t: 2.0 * t, x)
    assert g.integral() == pytest.approx(1.0, abs=1e-12)
    assert g.integral(np.ones_like(x)) == pytest.approx(1.0, abs=1e-12)


def test_same_axis():
    x = uniform_grid(0.0, 1.0, 51)
    a = DensityGrid(x=x, q=np.ones_like(x))
    b = DensityGrid(x=x + 0.5, q=np.ones_like(x))
    assert a.same_axis(a)
    assert not a.same_axis(b)


def test_dtype_promotion_longdouble():
    x = uniform_grid(0.0, 10.0, 101)
    g = lomax_grid(1.0, x, n_derivs=2, dtype=np.longdouble)
    assert g.q.dtype == np.longdouble
