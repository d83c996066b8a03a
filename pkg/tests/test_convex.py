import numpy as np
import pytest

from orlicz_duality import convex
from orlicz_duality.convex import Convexity, GridFunction
from orlicz_duality.errors import EmptyDomain, ImproperFunction


def grid(lo=-5.0, hi=5.0, n=2001):
    return np.linspace(lo, hi, n)


def test_quadratic_self_conjugate():
    f = GridFunction.sample(lambda x: x**2 / 2, grid())
    ys = np.linspace(-3, 3, 61)
    fs = convex.grid_conjugate(f, ys)
    assert np.max(np.abs(fs.values - ys**2 / 2)) < 2e-3


def test_cone_indicator_polar():
    x = grid(-2, 2, 401)
    f = GridFunction(x, np.where(x <= 0, 0.0, np.inf))
    ys = np.linspace(-1, 1, 21)
    fs = convex.grid_conjugate(f, ys).values
    assert np.all(fs[ys >= 0] == 0.0)
    # off the polar cone the grid conjugate grows with the grid extent
    assert np.all(fs[ys < 0] >= -ys[ys < 0] * 2 - 1e-12)


def test_exponential_conjugate():
    f = GridFunction.sample(np.exp, grid(-10, 3, 4001))
    ys = np.linspace(0.1, 10, 50)
    fs = convex.grid_conjugate(f, ys).values
    assert np.max(np.abs(fs - (ys * np.log(ys) - ys))) < 1e-3


def test_biconjugate_quadratic():
    f = GridFunction.sample(lambda x: x**2, grid())
    assert convex.biconjugate_check(f) < 5e-3


def test_biconjugate_linear():
    f = GridFunction.sample(lambda x: 3 * x - 1, grid())
    assert convex.biconjugate_check(f) < 1e-10


def test_nonconvex_biconjugate_is_hull():
    x = grid(-2, 4, 601)
    f = GridFunction.sample(lambda t: np.minimum(t**2, (t - 2) ** 2), x, check=False)
    ff = convex.biconjugate(f)
    i = int(np.argmin(np.abs(x - 1.0)))
    assert ff.values[i] < f.values[i] - 0.5
    hull = convex.closed_hull(f)
    inner = slice(1, -1)
    assert np.max(np.abs(ff.values[inner] - hull.values[inner])) < 5e-2


def test_hull_idempotent(rng):
    x = grid(-3, 3, 301)
    f = GridFunction(x, np.sin(3 * x) + rng.normal(scale=0.1, size=x.size), check=False)
    h1 = convex.closed_hull(f)
    h2 = convex.closed_hull(h1)
    assert np.allclose(h1.values, h2.values, atol=1e-14)


def test_conjugate_is_convex(rng):
    x = grid(-3, 3, 301)
    f = GridFunction(x, np.cos(2 * x) + x**2 / 4, check=False)
    fs = convex.grid_conjugate(f, np.linspace(-3, 3, 121))
    assert fs._consistent()


def test_conjugation_order_reversing(rng):
    x = grid(-2, 2, 201)
    ys = np.linspace(-3, 3, 61)
    for _ in range(20):
        a = rng.uniform(0.5, 2)
        f = GridFunction(x, a * x**2)
        g = GridFunction(x, a * x**2 + rng.uniform(0, 1) + 0.1 * np.abs(x))
        assert np.all(convex.grid_conjugate(f, ys).values >= convex.grid_conjugate(g, ys).values - 1e-12)


def test_inf_convolution_quadratics():
    x = grid(-4, 4, 801)
    f = GridFunction(x, x**2 / 2)
    g = GridFunction(x, x**2)
    fg = convex.inf_convolution(f, g)
    inner = np.abs(fg.grid) <= 3
    assert np.max(np.abs(fg.values[inner] - fg.grid[inner] ** 2 / 3)) < 5e-3


def test_inf_convolution_identity_element():
    x = grid(-2, 2, 401)
    f = GridFunction(x, np.exp(x))
    h = x[1] - x[0]
    d = GridFunction(np.array([-h, 0.0, h]), np.array([np.inf, 0.0, np.inf]), check=False)
    fd = convex.inf_convolution(f, d)
    assert np.array_equal(fd.values[1:-1], f.values)


def test_convolution_identity_quadratic_pair():
    x = grid(-3, 3, 601)
    f = GridFunction(x, x**2 / 2)
    g = GridFunction(x, (x - 0.5) ** 2)
    assert convex.conjugate_of_convolution_gap(f, g, np.linspace(-2, 2, 81)) < 1e-2


def test_convolution_identity_random_piecewise_quadratic(rng):
    x = grid(-2, 2, 201)
    dual = np.linspace(-3, 3, 121)
    for _ in range(50):
        pieces = []
        for _ in range(2):
            a1, a2 = rng.uniform(0.1, 2, size=2)
            c = rng.uniform(-1, 1)
            pieces.append(GridFunction(x, np.where(x < c, a1 * (x - c) ** 2, a2 * (x - c) ** 2) + rng.uniform(-1, 1) * x))
        assert convex.conjugate_of_convolution_gap(pieces[0], pieces[1], dual) < 1e-9


def test_empty_and_improper():
    x = grid(-1, 1, 11)
    with pytest.raises(ImproperFunction):
        GridFunction(x, np.full(x.size, np.inf), check=False)
    with pytest.raises(ValueError):
        GridFunction(x, np.full(x.size, -np.inf), check=False)
    with pytest.raises(ValueError):
        GridFunction(x[::-1], x)


def test_convolution_domain_errors():
    x = grid(-1, 1, 11)
    f = GridFunction(x, x**2)
    g = GridFunction(np.linspace(-1, 1, 21), np.linspace(-1, 1, 21) ** 2)
    with pytest.raises(ValueError):
        convex.inf_convolution(f, g)
    gc = GridFunction(x, -(x**2), Convexity.CONCAVE)
    with pytest.raises(ValueError):
        convex.inf_convolution(f, gc)
    assert EmptyDomain is not None


def test_concave_convention():
    x = grid(-3, 3, 601)
    u = GridFunction(x, -np.exp(-x), Convexity.CONCAVE)
    ys = np.linspace(0.2, 5, 25)
    ustar = convex.grid_conjugate(u, ys).values
    # concave conjugate inf_x {x y - U(x)} = y - y ln y for U = -e^{-x}
    assert np.max(np.abs(ustar - (ys - ys * np.log(ys)))) < 1e-3


def test_nonconvex_sample_rejected():
    with pytest.raises(ValueError):
        GridFunction.sample(np.sin, grid(-3, 3, 101))
