import math

import numpy as np
import pytest

from quasineutral.equilibrium import Interval
from quasineutral.fluid import (discrete_divergence, elliptic_rotation, extend_divfree,
                                limit_field, limit_residual, rigid_rotation_ball,
                                smooth_cutoff, zero_field)


def disk_points(radius, n=200, seed=0):
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], -1)


def test_rotation_decay_and_orthogonality():
    f = rigid_rotation_ball(2.0, 1.0, 1.0)
    x = disk_points(1.0)
    np.testing.assert_allclose(np.linalg.norm(f(1.0, x), axis=-1),
                               math.exp(-1) * np.linalg.norm(f(0.0, x), axis=-1), rtol=1e-14)
    assert np.abs(np.sum(f(0.3, x) * x, axis=-1)).max() < 1e-15


def test_steady_rotation_is_exact():
    f = rigid_rotation_ball(1.5, 0.0, 2.0)
    x = disk_points(2.0)
    np.testing.assert_allclose(f(0.0, x), f(5.0, x), rtol=0, atol=0)
    assert limit_residual(f, (0.0, x)).value < 1e-13


def test_elliptic_reduces_to_rotation():
    a, b = elliptic_rotation((1.2, 1.2), 0.7, 0.3), rigid_rotation_ball(0.7, 0.3, 1.2)
    x = disk_points(1.2)
    np.testing.assert_array_equal(a(0.4, x), b(0.4, x))
    assert a.name == "rigid_rotation"


def test_no_flux_on_boundaries():
    t = np.random.default_rng(1).uniform(0, 2 * np.pi, 1000)
    for axes in [(2.0, 1.0), (1.0, 1.0), (0.3, 1.7)]:
        f = elliptic_rotation(axes, 1.1, 0.4)
        xb = np.stack([axes[0] * np.cos(t), axes[1] * np.sin(t)], -1)
        normal = xb / np.asarray(axes) ** 2
        assert np.abs(np.sum(f(0.2, xb) * normal, axis=-1)).max() < 1e-13


def test_streamfunction_generates_the_field():
    f = elliptic_rotation((2.0, 1.0), 1.3, 0.2)
    x = disk_points(1.0, 30)
    h = 1e-6
    d1 = (f.streamfunction(0.5, x + [h, 0]) - f.streamfunction(0.5, x - [h, 0])) / (2 * h)
    d2 = (f.streamfunction(0.5, x + [0, h]) - f.streamfunction(0.5, x - [0, h])) / (2 * h)
    np.testing.assert_allclose(f(0.5, x), np.stack([-d2, d1], -1), atol=1e-8)


def test_residual_examples():
    f = elliptic_rotation((2.0, 1.0), 1.0, 0.5)
    rng = np.random.default_rng(2)
    x = rng.uniform(-2.5, 2.5, size=(300, 2))
    t = rng.uniform(0, 2, size=300)
    res = limit_residual(f, (t, x))
    assert res.value < 1e-6
    inside = f.domain.contains(x)
    assert res.skipped == int((~inside).sum()) > 0
    # friction term is linear: a wrong gamma leaves |gamma - gamma'| |V|
    wrong = limit_residual(f, (t, x), gamma=0.1)
    speed = np.linalg.norm(f(t[inside], x[inside]), axis=-1).max()
    assert wrong.value == pytest.approx(0.4 * speed, rel=1e-12)


def test_zero_field_residual():
    z = zero_field(Interval(-1.0, 1.0))
    assert limit_residual(z, (0.0, np.linspace(-1, 1, 9)[:, None])).value == 0.0


def test_fd_residual_converges_at_second_order():
    f = rigid_rotation_ball(1.0, 0.7, 1.0)
    x = disk_points(0.9, 50)
    errs = [limit_residual(f, (0.4, x), method="fd", h=h).value for h in (1e-2, 5e-3, 2.5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_one_dimensional_fields_are_zero():
    f = limit_field(Interval(-1.0, 1.0), "rigid_rotation", omega0=3.0)
    assert f.name == "zero"
    np.testing.assert_array_equal(f(0.0, np.linspace(-1, 1, 5)[:, None]), 0.0)
    assert extend_divfree(f) is f


def test_limit_field_factory():
    from quasineutral.equilibrium import solve_isotropic, solve_quadratic
    ball = solve_isotropic(math.pi, 2).domain
    f = limit_field(ball, "rigid_rotation", omega0=1.0)
    assert f.name == "rigid_rotation" and f.params["radius"] == pytest.approx(1.0)
    ell = solve_quadratic((2.0, 1.0), 1.0).domain
    assert limit_field(ell, "rotation", omega0=1.0).name == "elliptic_rotation"
    with pytest.raises(ValueError):
        limit_field(ball, "vortex")


def test_smooth_cutoff_profile():
    r = np.linspace(0, 3, 301)
    chi, dchi = smooth_cutoff(r, 1.5, 2.0)
    assert np.all(chi[r <= 1.5] == 1.0) and np.all(chi[r >= 2.0] == 0.0)
    assert np.all(np.diff(chi) <= 0)
    fd = np.gradient(chi, r)
    np.testing.assert_allclose(dchi[5:-5], fd[5:-5], atol=0.05)


@pytest.mark.parametrize("family", ["rotation", "ellipse"])
def test_extension_conditions(family):
    f = rigid_rotation_ball(1.3, 0.2, 1.0) if family == "rotation" \
        else elliptic_rotation((2.0, 1.0), 0.8, 0.0)
    W = extend_divfree(f)
    R = W.radius
    g = np.linspace(-2.6 * R, 2.6 * R, 121)
    x = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    r = np.linalg.norm(x, axis=-1)
    vals = W(0.4, x)
    inner = r <= 1.5 * R
    np.testing.assert_array_equal(vals[inner], f(0.4, x[inner]))
    assert np.all(vals[r >= 2 * R] == 0.0)
    div = discrete_divergence(W.at(0.4), x, 1e-3 * R, order=8)
    assert np.abs(div).max() < 1e-8 * np.abs(vals).max()
