import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasineutral.core import (SIGMA_AT_ORIGIN, SingularEvaluationError, ball_volume,
                               cell_average_gamma, gamma, gamma_gradient, halfline_quad,
                               interval_quad, sigma_a)


def test_ball_volumes():
    assert ball_volume(1) == 2.0
    assert ball_volume(2) == math.pi
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    with pytest.raises(ValueError):
        ball_volume(4)


@pytest.mark.parametrize("dim,x,expected", [
    (2, [1.0, 0.0], 0.0),
    (1, 2.0, -1.0),
    (1, -2.0, -1.0),
    (3, [0.0, 3.0, 4.0], 1 / (4 * math.pi * 5)),
    (2, [0.0, math.e], -1 / (2 * math.pi)),
])
def test_gamma_branches(dim, x, expected):
    assert gamma(np.asarray(x), dim) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_gamma_pole(dim):
    with pytest.raises(SingularEvaluationError):
        gamma(np.zeros(dim) if dim > 1 else 0.0, dim)
    with pytest.raises(SingularEvaluationError):
        gamma_gradient(np.zeros(dim), dim)


@pytest.mark.parametrize("dim,x,expected", [
    (1, [2.0], [-0.5]),
    (2, [1.0, 0.0], [-1 / (2 * math.pi), 0.0]),
    (3, [1.0, 0.0, 0.0], [-1 / (4 * math.pi), 0.0, 0.0]),
])
def test_gamma_gradient_examples(dim, x, expected):
    np.testing.assert_allclose(gamma_gradient(np.asarray(x), dim), expected, atol=1e-15)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_gamma_gradient_matches_central_differences(dim):
    rng = np.random.default_rng(dim)
    x = rng.normal(size=(20, dim)) + 0.5
    h = 1e-5
    fd = np.stack([(gamma(x + h * e, dim) - gamma(x - h * e, dim)) / (2 * h)
                   for e in np.eye(dim)], axis=-1)
    np.testing.assert_allclose(gamma_gradient(x, dim), fd, rtol=1e-7, atol=1e-9)


@pytest.mark.parametrize("dim", [2, 3])
def test_gamma_is_harmonic_away_from_origin(dim):
    # five-point (seven-point) Laplacian shrinks like h^2
    x0 = np.full(dim, 0.7)
    errs = []
    for h in (0.02, 0.01):
        lap = sum(gamma(x0 + h * e, dim) + gamma(x0 - h * e, dim) - 2 * gamma(x0, dim)
                  for e in np.eye(dim)) / h**2
        errs.append(abs(lap))
    assert errs[1] < errs[0] / 3.5


def test_sigma_examples():
    assert sigma_a(np.array([2.0, 0.0]), [1.0, 1.0]) == pytest.approx(3.0, abs=1e-13)
    assert sigma_a(np.zeros(3), [1.0, 2.0, 3.0]) == SIGMA_AT_ORIGIN
    # point on the boundary of the (2, 1) ellipse
    t = 0.3
    assert abs(sigma_a(np.array([2 * math.cos(t), math.sin(t)]), [2.0, 1.0])) < 1e-13


def test_sigma_membership_and_batch_shape():
    a = [2.0, 1.0, 0.5]
    x = np.array([[0.0, 0.0, 0.0], [1.9, 0.0, 0.0], [0.0, 0.0, 0.6], [0.1, 0.1, 0.1]])
    s = sigma_a(x, a)
    assert s.shape == (4,)
    assert list(s <= 0) == [True, True, False, True]
    assert sigma_a(x.reshape(2, 2, 3), a).shape == (2, 2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 5.0), min_size=2, max_size=3),
       st.lists(st.floats(-10.0, 10.0), min_size=3, max_size=3))
def test_sigma_root_residual(axes, point):
    a = np.asarray(axes)
    x = np.asarray(point[: a.size])
    if not np.any(x**2):
        return  # squares underflow: numerically the origin
    s = sigma_a(x, a)
    x2 = x**2
    den = a**2 + s
    # a root next to a pole is ill-conditioned: one ulp in s moves the
    # residual by |F'(s)| ulp(max(|s|, a^2))
    slope = np.sum(x2 / den**2)
    floor = slope * 4 * np.finfo(float).eps * max(abs(s), np.max(a**2))
    assert abs(np.sum(x2 / den) - 1.0) < 1e-12 + floor


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 3.0), min_size=2, max_size=2),
       st.floats(0.0, 2 * math.pi), st.floats(0.05, 5.0), st.floats(1.01, 3.0))
def test_sigma_increases_along_rays(axes, angle, t, factor):
    u = np.array([math.cos(angle), math.sin(angle)])
    assert sigma_a(factor * t * u, axes) > sigma_a(t * u, axes)


def test_halfline_quad_against_closed_forms():
    # int_0^inf (a + s)^-5/2 ds = (2/3) a^-3/2
    a = np.array([0.01, 1.0, 50.0])
    val, err = halfline_quad(lambda s: (a[:, None] + s) ** -2.5, a, tail_power=2.5)
    np.testing.assert_allclose(val, (2 / 3) * a**-1.5, rtol=1e-12)
    assert np.all(err < 1e-10 * val)


def test_interval_quad_against_closed_form():
    upper = np.array([1e-6, 0.5, 40.0, 1e6])
    val = interval_quad(lambda s: (1.0 + s) ** -1.5, upper, scale=np.ones(4))
    np.testing.assert_allclose(val, -2 * np.expm1(-0.5 * np.log1p(upper)), rtol=1e-13)


def test_cell_average_square_closed_form():
    # mean of ln r over [0,1]^2 is (ln 2 - 3 + pi/2)/2
    for h in (0.1, 1.0, 0.037):
        mean_ln = math.log(h / 2) + 0.5 * (math.log(2) - 3 + math.pi / 2)
        assert cell_average_gamma(h, 2) == pytest.approx(-mean_ln / (2 * math.pi), rel=1e-12)


def test_cell_average_cube_constant():
    # int over the unit cube centred at 0 of 1/r is 2.3800772...
    assert cell_average_gamma(1.0, 3) == pytest.approx(2.3800772 / (4 * math.pi), rel=1e-6)
    assert cell_average_gamma(0.1, 3) == pytest.approx(10 * cell_average_gamma(1.0, 3), rel=1e-11)


def test_cell_average_rectangle_against_brute_force():
    from scipy import integrate
    h = (0.2, 0.05)
    # one quadrant, so no quadrature node lands on the pole
    quadrant = integrate.dblquad(lambda y, x: -math.log(math.hypot(x, y)) / (2 * math.pi),
                                 0, h[0] / 2, 0, h[1] / 2, epsabs=1e-13, epsrel=1e-11)[0]
    brute = 4 * quadrant / (h[0] * h[1])
    assert cell_average_gamma(h, 2) == pytest.approx(brute, rel=1e-8)


def test_cell_average_1d():
    assert cell_average_gamma(0.4, 1) == pytest.approx(-0.05)
