import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from quasineutral.core import ball_volume, gamma, sigma_a
from quasineutral.equilibrium import (Convex1D, QuadraticAniso, QuadraticEquilibrium,
                                      RadialProfile, ZInverseError, boundary_flux_bound,
                                      ellipsoid_newtonian_gradient,
                                      ellipsoid_newtonian_potential, phi_e_quadratic_eval, solve,
                                      solve_convex_1d, solve_isotropic, solve_quadratic,
                                      solve_radial, z_inverse, z_jacobian, z_map, zeta)
from quasineutral.errors import (NoEquilibriumError, PreconditionError,
                                 UnsupportedEquilibriumError)


def fd_laplacian(f, x, h):
    dim = x.shape[-1]
    return sum(f(x + h * e) + f(x - h * e) - 2 * f(x) for e in np.eye(dim)) / h**2


def fd_gradient(f, x, h):
    return np.stack([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(x.shape[-1])],
                    axis=-1)


# -- zeta and the Z map ---------------------------------------------------------------

def test_zeta_examples():
    assert zeta([1.0, 1.0]) == pytest.approx(4 * math.log(2), rel=1e-15)
    assert zeta([1.0, 1.0, 1.0]) == pytest.approx(-2.0, rel=1e-12)


def test_zeta_3d_against_carlson():
    a = np.array([0.3, 2.0, 7.5])
    assert zeta(a) == pytest.approx(-2 * special.elliprf(*a), rel=1e-12)


def test_zeta_gradient():
    # 2D: grad zeta = Z; 3D: the printed zeta has gradient Z / 2
    h = 1e-6
    for a, factor in ((np.array([4.0, 1.0]), 1.0), (np.array([0.5, 1.0, 3.0]), 0.5)):
        fd = np.array([(zeta(a + h * e) - zeta(a - h * e)) / (2 * h) for e in np.eye(a.size)])
        np.testing.assert_allclose(fd, factor * z_map(a), rtol=1e-6)


@pytest.mark.parametrize("alpha,expected", [
    ([1.0, 1.0], [1.0, 1.0]),
    ([4.0, 1.0], [1 / 3, 2 / 3]),
    ([1.0, 1.0, 1.0], [2 / 3, 2 / 3, 2 / 3]),
])
def test_z_map_examples(alpha, expected):
    np.testing.assert_allclose(z_map(alpha), expected, rtol=1e-12)


def test_z_map_3d_against_carlson():
    rng = np.random.default_rng(1)
    alpha = np.exp(rng.uniform(-4, 4, size=(50, 3)))
    oracle = np.stack([2 / 3 * special.elliprd(alpha[:, (j + 1) % 3], alpha[:, (j + 2) % 3],
                                               alpha[:, j]) for j in range(3)], axis=-1)
    np.testing.assert_allclose(z_map(alpha), oracle, rtol=1e-12)


def test_z_map_2d_matches_integral_definition():
    alpha = np.array([0.2, 3.0])
    quad = [integrate.quad(lambda s, j=j: 1 / ((alpha[j] + s) * np.sqrt(np.prod(alpha + s))),
                           0, np.inf, epsabs=0, epsrel=1e-12)[0] for j in range(2)]
    np.testing.assert_allclose(z_map(alpha), quad, rtol=1e-10)


@pytest.mark.parametrize("dim", [2, 3])
def test_z_identities(dim):
    rng = np.random.default_rng(dim)
    alpha = rng.uniform(0.1, 10, size=(20, dim))
    z = z_map(alpha)
    # sum_k Z_k = 2 / prod sqrt(alpha_k), and homogeneity of degree -N/2
    np.testing.assert_allclose(z.sum(-1), 2 / np.sqrt(alpha.prod(-1)), rtol=1e-12)
    np.testing.assert_allclose(z_map(3.0 * alpha), 3.0 ** (-dim / 2) * z, rtol=1e-12)


def test_z_jacobian_matches_finite_differences():
    a = np.array([1.0, 2.0, 3.0])
    h = 1e-6
    fd = np.stack([(z_map(a + h * e) - z_map(a - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    np.testing.assert_allclose(z_jacobian(a), fd, rtol=1e-7, atol=1e-10)


@pytest.mark.parametrize("z,expected", [
    ([1.0, 1.0], [1.0, 1.0]),
    ([1 / 3, 2 / 3], [4.0, 1.0]),
    ([2 / 3, 2 / 3, 2 / 3], [1.0, 1.0, 1.0]),
])
def test_z_inverse_examples(z, expected):
    np.testing.assert_allclose(z_inverse(z), expected, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=3, max_size=3))
def test_z_round_trip_3d(alpha):
    alpha = np.asarray(alpha)
    np.testing.assert_allclose(z_inverse(z_map(alpha)), alpha, rtol=1e-10)


def test_z_inverse_nonconvergence_carries_state():
    with pytest.raises(ZInverseError) as info:
        z_inverse([0.01, 1.0, 50.0], max_iter=1)
    assert info.value.alpha.shape == (3,)
    assert np.all(info.value.residual > 0)


def test_domain_errors():
    with pytest.raises(ValueError):
        z_map([1.0, -1.0])
    with pytest.raises(ValueError):
        zeta([0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        z_inverse([1.0, 0.0])


# -- potential of the uniform ellipsoid -------------------------------------------------

def test_ball_potential_3d():
    a = (1.0, 1.0, 1.0)
    assert ellipsoid_newtonian_potential(np.zeros(3), a) == pytest.approx(0.5, abs=1e-12)
    assert ellipsoid_newtonian_potential(np.array([0.0, 2.0, 0.0]), a) == pytest.approx(
        1 / 6, abs=1e-12)


def test_disk_potential_2d():
    pts = np.array([[0.0, 0.0], [0.3, 0.4], [2.0, 0.0], [0.0, -7.0]])
    r = np.linalg.norm(pts, axis=-1)
    exact = np.where(r <= 1, (1 - r**2) / 4, -np.log(np.maximum(r, 1)) / 2)
    np.testing.assert_allclose(ellipsoid_newtonian_potential(pts, (1.0, 1.0)), exact,
                               atol=1e-13)


def test_ellipse_potential_against_direct_integration():
    a = (2.0, 1.0)

    def brute(x):
        f = lambda r, t: -math.log(math.hypot(x[0] - a[0] * r * math.cos(t),
                                              x[1] - a[1] * r * math.sin(t))) \
            / (2 * math.pi) * a[0] * a[1] * r
        return integrate.dblquad(f, 0, 2 * math.pi, 0, 1, epsabs=1e-11, epsrel=1e-11)[0]

    for x in [(3.0, 1.0), (2.5, 0.0), (0.0, 1.3)]:
        assert ellipsoid_newtonian_potential(np.array(x), a) == pytest.approx(brute(x), abs=1e-9)


def test_ellipse_far_field_matches_point_charge():
    a = (2.0, 0.5)
    x = np.array([3e3, 4e3])
    area = math.pi * a[0] * a[1]
    # quadrupole correction is O(a^2 / |x|^2)
    assert ellipsoid_newtonian_potential(x, a) == pytest.approx(area * gamma(x, 2), abs=1e-6)


def test_ellipsoid_potential_3d_against_direct_integration():
    a = (1.0, 2.0, 0.5)
    x = np.array([1.0, 1.5, 1.0])

    def f(r, t, p):
        y = np.array([a[0] * r * math.sin(t) * math.cos(p), a[1] * r * math.sin(t) * math.sin(p),
                      a[2] * r * math.cos(t)])
        return np.prod(a) * r * r * math.sin(t) / (4 * math.pi * np.linalg.norm(x - y))

    brute = integrate.tplquad(f, 0, 2 * math.pi, 0, math.pi, 0, 1, epsabs=1e-10, epsrel=1e-10)[0]
    assert ellipsoid_newtonian_potential(x, a) == pytest.approx(brute, rel=1e-9)


@pytest.mark.parametrize("a", [(2.0, 1.0), (2.0, 1.0, 1.0)])
def test_ellipsoid_gradient_matches_finite_differences(a):
    rng = np.random.default_rng(3)
    n = len(a)
    x = rng.uniform(-3, 3, size=(30, n))
    fd = fd_gradient(lambda y: ellipsoid_newtonian_potential(y, a), x, 1e-5)
    np.testing.assert_allclose(ellipsoid_newtonian_gradient(x, a), fd, atol=1e-8)


# -- isotropic ----------------------------------------------------------------------------

def test_isotropic_examples():
    eq = solve_isotropic(math.pi, 2)
    assert eq.radius == pytest.approx(1.0, rel=1e-15)
    assert eq.phi_e(np.array([0.3, -0.2])) == 0.0
    eq1 = solve_isotropic(2.0, 1)
    assert eq1.radius == 1.0
    assert eq1.phi_e(2.0) == pytest.approx(0.5, rel=1e-14)
    assert eq1.robin_constant == pytest.approx(-0.5, rel=1e-15)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_isotropic_robin_constant_is_level_of_potential(dim):
    eq = solve_isotropic(1.7, dim)
    # Gamma * n_e + Phi_ext = C* on K; evaluate at the boundary point R e_1
    R = eq.radius
    x = np.zeros(dim)
    x[0] = R
    assert eq.mass * gamma(x, dim) + eq.phi_ext(x) == pytest.approx(eq.robin_constant, rel=1e-14)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_isotropic_gradient_and_continuity(dim):
    eq = solve_isotropic(2.5, dim)
    rng = np.random.default_rng(dim)
    u = rng.normal(size=(40, dim))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    r = eq.radius * rng.uniform(1.05, 3.0, size=(40, 1))
    x = r * u
    np.testing.assert_allclose(eq.grad_phi_e(x), fd_gradient(eq.phi_e, x, 1e-6),
                               rtol=1e-6, atol=1e-9)
    # near and far evaluation paths agree where they meet
    edge = eq.radius * (1 + 0.25) * u[:1]
    lo = eq.phi_e(edge * (1 - 1e-9))
    hi = eq.phi_e(edge * (1 + 1e-9))
    assert lo == pytest.approx(hi, rel=1e-7)


# -- quadratic -------------------------------------------------------------------------

def test_quadratic_example():
    eq = solve_quadratic([1.0, 1.0], math.pi)
    np.testing.assert_allclose(eq.axes, [1 / math.sqrt(2)] * 2, rtol=1e-14)
    assert eq.n_e(np.zeros(2)) == pytest.approx(2.0)


def test_quadratic_aspect_ratio_and_mass():
    rng = np.random.default_rng(7)
    for _ in range(20):
        lam = rng.uniform(0.3, 3.0, size=2)
        m = rng.uniform(0.1, 10.0)
        eq = solve_quadratic(lam, m)
        a = np.asarray(eq.axes)
        assert a[0] / a[1] == pytest.approx((lam[0] / lam[1]) ** 2, rel=1e-12)
        assert eq.mass_by_quadrature() == pytest.approx(m, rel=1e-12)
        # closed-form 2D semi-axis
        assert a[0] == pytest.approx(math.sqrt(m / math.pi) * lam[0]
                                     / math.sqrt(1 + lam[1] ** 2 / lam[0] ** 2), rel=1e-12)


@pytest.mark.parametrize("dim", [2, 3])
def test_isotropic_quadratic_trap_gives_the_ball(dim):
    m = 2.3
    lam = [math.sqrt(dim)] * dim  # sum x^2 / (2 dim)
    quad = solve_quadratic(lam, m)
    ball = solve_isotropic(m, dim)
    np.testing.assert_allclose(quad.axes, ball.radius, rtol=1e-12)
    assert quad.robin_constant == pytest.approx(ball.robin_constant, rel=1e-12)
    rng = np.random.default_rng(0)
    x = rng.uniform(-3, 3, size=(50, dim))
    np.testing.assert_allclose(quad.phi_e(x), ball.phi_e(x), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(quad.grad_phi_e(x), ball.grad_phi_e(x), rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("lam", [(2.0, 1.0), (1.0, 1.5, 0.7)])
def test_quadratic_robin_constant_is_level_of_potential(lam):
    eq = solve_quadratic(lam, 1.3)
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, size=(10, len(lam))) * np.asarray(eq.axes) / 2
    level = eq.density_value * ellipsoid_newtonian_potential(x, eq.axes) + eq.phi_ext(x)
    np.testing.assert_allclose(level, eq.robin_constant, rtol=1e-12)


@pytest.mark.parametrize("lam", [(2.0, 1.0), (1.0, 1.5, 0.7)])
def test_quadratic_phi_e_equals_definition_outside(lam):
    eq = solve_quadratic(lam, 1.3)
    rng = np.random.default_rng(2)
    x = rng.uniform(-4, 4, size=(30, len(lam)))
    direct = (eq.phi_ext(x) + eq.density_value * ellipsoid_newtonian_potential(x, eq.axes)
              - eq.robin_constant)
    inside = eq.contains(x)
    np.testing.assert_allclose(eq.phi_e(x)[~inside], direct[~inside], rtol=1e-10, atol=1e-12)
    assert np.all(eq.phi_e(x)[inside] == 0.0)
    assert np.all(eq.phi_e(x)[~inside] > 0)


def test_from_semi_axes_round_trip():
    eq = QuadraticEquilibrium.from_semi_axes((2.0, 1.0), mass=3.0)
    again = solve_quadratic(eq.potential.lam, 3.0)
    np.testing.assert_allclose(again.axes, (2.0, 1.0), rtol=1e-12)


def test_phi_e_quadratic_eval_near_boundary():
    eq = solve_quadratic((2.0, 1.0), 2.0)
    a = np.asarray(eq.axes)
    t = np.linspace(0, 2 * np.pi, 17)[:-1]
    normal = np.stack([np.cos(t) / a[0], np.sin(t) / a[1]], -1)
    normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
    boundary = np.stack([a[0] * np.cos(t), a[1] * np.sin(t)], -1)
    ratios, grads = [], []
    for k in range(1, 7):
        x = boundary + 10.0**-k * normal
        val, grad = phi_e_quadratic_eval(x, eq)
        sig = sigma_a(x, a)
        ratios.append(val / sig**2)
        grads.append(np.linalg.norm(grad, axis=-1) / sig)
    ratios, grads = np.array(ratios), np.array(grads)
    # Phi_e >= sigma^2 / C and |grad Phi_e| = O(sigma): both ratios settle to finite limits
    assert ratios.min() > 0
    np.testing.assert_allclose(ratios[-1], ratios[-2], rtol=1e-3)
    np.testing.assert_allclose(grads[-1], grads[-2], rtol=1e-3)
    val, grad = phi_e_quadratic_eval(np.zeros((1, 2)), eq)
    assert val[0] == 0.0 and np.all(grad == 0.0)


def test_phi_e_quadratic_eval_rejects_other_classes():
    with pytest.raises(TypeError):
        phi_e_quadratic_eval(np.zeros(2), solve_isotropic(1.0, 2))


@pytest.mark.parametrize("lam", [(2.0, 1.0), (1.0, 1.5, 0.7)])
def test_quadratic_gradient_matches_finite_differences(lam):
    eq = solve_quadratic(lam, 1.0)
    rng = np.random.default_rng(4)
    x = rng.uniform(-3, 3, size=(40, len(lam)))
    x = x[sigma_a(x, eq.axes) > 0.05]
    np.testing.assert_allclose(eq.grad_phi_e(x), fd_gradient(eq.phi_e, x, 1e-5),
                               rtol=1e-6, atol=1e-9)


def test_quadratic_convex_on_random_segments():
    eq = solve_quadratic((2.0, 1.0), 2.0)
    rng = np.random.default_rng(5)
    p, q = rng.uniform(-4, 4, size=(2, 10_000, 2))
    mid = eq.phi_e(0.5 * (p + q))
    assert np.all(mid <= 0.5 * (eq.phi_e(p) + eq.phi_e(q)) + 1e-12)


def test_quadratic_rejects_1d():
    with pytest.raises(ValueError):
        solve_quadratic([1.0], 1.0)


# -- 1D convex ---------------------------------------------------------------------------

def test_convex_1d_example():
    eq = solve_convex_1d(Convex1D.polynomial([0, 0, 0.5]), 2.0)
    assert eq.lo == pytest.approx(-1.0, abs=1e-15)
    assert eq.hi == pytest.approx(1.0, abs=1e-15)
    assert eq.robin_constant == pytest.approx(-0.5, abs=1e-15)
    assert eq.phi_e(2.0) == pytest.approx(0.5, rel=1e-14)
    np.testing.assert_allclose(eq.n_e(np.array([-0.5, 0.9, 1.5])), [1.0, 1.0, 0.0])


def test_convex_1d_against_convolution_oracle():
    pot = Convex1D.polynomial([0.0, 0.3, 0.5, 0.0, 0.1])
    m = 3.0
    eq = solve_convex_1d(pot, m)
    assert abs(pot.dphi(eq.hi) - m / 2) < 1e-12
    assert abs(pot.dphi(eq.lo) + m / 2) < 1e-12

    def direct(x):
        conv = integrate.quad(lambda y: -0.5 * abs(x - y) * pot.d2phi(y), eq.lo, eq.hi,
                              points=[x] if eq.lo < x < eq.hi else None,
                              epsabs=1e-13, epsrel=1e-13)[0]
        return conv + pot.phi(x) - eq.robin_constant

    for x in (-2.5, -1.3, -1.17, 0.2, 0.91, 1.4):
        expected = direct(x) if not eq.lo <= x <= eq.hi else 0.0
        assert eq.phi_e(x) == pytest.approx(expected, abs=1e-11)


def test_convex_1d_gradient_and_convexity():
    eq = solve_convex_1d(Convex1D.polynomial([0.0, 0.3, 0.5, 0.0, 0.1]), 3.0)
    x = np.concatenate([np.linspace(-4, eq.lo - 0.01, 30), np.linspace(eq.hi + 0.01, 4, 30)])
    np.testing.assert_allclose(eq.grad_phi_e(x)[:, 0], fd_gradient(eq.phi_e, x[:, None], 1e-6)[:, 0],
                               rtol=1e-6, atol=1e-9)
    rng = np.random.default_rng(0)
    p, q = rng.uniform(-4, 4, size=(2, 10_000))
    assert np.all(eq.phi_e(0.5 * (p + q)) <= 0.5 * (eq.phi_e(p) + eq.phi_e(q)) + 1e-12)


def test_convex_1d_errors():
    with pytest.raises(UnsupportedEquilibriumError):
        solve_convex_1d(Convex1D.polynomial([0, 0, 0, 0, 0.25]), 2.0)
    bounded = Convex1D(lambda x: np.sqrt(1 + x * x), lambda x: x / np.sqrt(1 + x * x),
                       lambda x: (1 + x * x) ** -1.5)
    with pytest.raises(NoEquilibriumError):
        solve_convex_1d(bounded, 4.0)
    with pytest.raises(ValueError):
        Convex1D.polynomial([0, 0, -1])


# -- radial ------------------------------------------------------------------------------

def test_radial_linear_profile_example():
    eq = solve_radial(RadialProfile.power(2, 1.0, 1.0), 2 * math.pi)
    assert eq.radius == pytest.approx(1.0, rel=1e-14)
    x = np.array([[0.5, 0.0], [0.0, -0.25], [0.6, 0.6]])
    np.testing.assert_allclose(eq.n_e(x), 1 / np.linalg.norm(x, axis=-1), rtol=1e-14)
    assert eq.mass_by_quadrature() == pytest.approx(2 * math.pi, rel=1e-10)
    assert abs(eq.phi_e(np.array([1.0 + 1e-12, 0.0]))) < 1e-10


@pytest.mark.parametrize("dim", [2, 3])
def test_radial_reduces_to_isotropic(dim):
    m = 1.9
    rad = solve_radial(RadialProfile.power(dim, 1 / (2 * dim), 2.0), m)
    iso = solve_isotropic(m, dim)
    assert rad.radius == pytest.approx(iso.radius, rel=1e-13)
    assert rad.robin_constant == pytest.approx(iso.robin_constant, rel=1e-12)
    x = np.random.default_rng(0).uniform(-3, 3, size=(50, dim))
    np.testing.assert_allclose(rad.phi_e(x), iso.phi_e(x), rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(rad.n_e(x), iso.n_e(x), rtol=1e-12)


def test_radial_annulus():
    eq = solve_radial(RadialProfile.shifted_quadratic(2, 1.0, 0.5), math.pi)
    assert eq.r_min == pytest.approx(0.5, abs=1e-14)
    assert eq.n_e(np.array([0.2, 0.1])) == 0.0
    assert eq.mass_by_quadrature() == pytest.approx(math.pi, rel=1e-10)
    assert eq.phi_e(np.array([0.2, 0.1])) == 0.0


def test_radial_errors():
    flat = RadialProfile(lambda r: 0 * r, lambda r: 0 * r, lambda r: 0 * r, 2)
    with pytest.raises(NoEquilibriumError):
        solve_radial(flat, 1.0)
    wiggly = RadialProfile(lambda r: r + np.sin(4 * r), lambda r: 1 + 0.9 * np.cos(40 * r),
                           lambda r: -36 * np.sin(40 * r), 2)
    with pytest.raises(PreconditionError):
        solve_radial(wiggly, 3.0)
    with pytest.raises(ValueError):
        solve_radial(RadialProfile.power(1), 1.0)


# -- shared invariants -----------------------------------------------------------------

CASES = {
    "isotropic-2d": lambda: solve_isotropic(2.0, 2),
    "isotropic-3d": lambda: solve_isotropic(2.0, 3),
    "quadratic-2d": lambda: solve_quadratic((2.0, 1.0), 2.0),
    "quadratic-3d": lambda: solve_quadratic((1.0, 1.5, 0.7), 2.0),
    "radial-power": lambda: solve_radial(RadialProfile.power(2, 0.5, 3.0), 2.0),
    "radial-annulus": lambda: solve_radial(RadialProfile.shifted_quadratic(3, 2.0, 0.3), 2.0),
    "convex-1d": lambda: solve_convex_1d(Convex1D.polynomial([0.0, 0.3, 0.5, 0.0, 0.1]), 3.0),
}


def _distance_to_boundary_ok(eq, x, margin):
    shifts = [x + margin * s * e for e in np.eye(eq.dim) for s in (-1, 1)]
    c0 = eq.contains(x)
    return np.all([eq.contains(y) == c0 for y in shifts], axis=0)


@pytest.mark.parametrize("name", sorted(CASES))
def test_pde_residual_away_from_boundary(name):
    eq = CASES[name]()
    rng = np.random.default_rng(11)
    lo, hi = eq.domain.bounding_box()
    x = rng.uniform(2 * lo - 0.5, 2 * hi + 0.5, size=(60, eq.dim))
    errors = []
    for h in (4e-3, 2e-3):
        keep = _distance_to_boundary_ok(eq, x, 3 * 4e-3)
        lap = fd_laplacian(eq.phi_e, x[keep], h)
        target = np.where(eq.contains(x[keep]), 0.0, eq.potential.laplacian(x[keep]))
        errors.append(np.abs(lap - target).max())
    assert errors[1] < 1e-3
    assert errors[1] <= errors[0] / 2 or errors[1] < 1e-6


@pytest.mark.parametrize("name", sorted(CASES))
def test_sign_support_and_mass(name):
    eq = CASES[name]()
    rng = np.random.default_rng(12)
    lo, hi = eq.domain.bounding_box()
    x = rng.uniform(2 * lo - 0.5, 2 * hi + 0.5, size=(400, eq.dim))
    vals = eq.phi_e(x)
    inside = eq.contains(x)
    assert np.all(vals[inside] == 0.0)
    assert np.all(vals[~inside] > 0)
    assert np.all(eq.n_e(x)[~inside] == 0.0)
    assert eq.mass_by_quadrature() == pytest.approx(eq.mass, rel=1e-8)


@pytest.mark.parametrize("name", sorted(CASES))
def test_density_is_laplacian_of_external_potential(name):
    eq = CASES[name]()
    rng = np.random.default_rng(13)
    lo, hi = eq.domain.bounding_box()
    x = rng.uniform(lo, hi, size=(200, eq.dim))
    x = x[eq.contains(x) & (np.linalg.norm(x, axis=-1) > 1e-3)]
    np.testing.assert_allclose(eq.n_e(x), eq.potential.laplacian(x), rtol=1e-12)


def test_solve_dispatch_and_summary():
    eq = solve(QuadraticAniso((2.0, 1.0)), 1.0)
    summary = eq.summary()
    assert summary["class"] == "quadratic"
    assert summary["domain_params"]["type"] == "ellipsoid"
    assert summary["mass"] == 1.0
    with pytest.raises(TypeError):
        solve(object(), 1.0)


@pytest.mark.parametrize("m", [0.0, -1.0, float("nan"), float("inf")])
def test_mass_must_be_positive(m):
    with pytest.raises(ValueError):
        solve_isotropic(m, 2)


# -- boundary flux ------------------------------------------------------------------

def test_flux_bound_zero_field():
    eq = solve_isotropic(math.pi, 2)
    pts = np.array([[1.5, 0.0], [0.0, 2.0]])
    assert boundary_flux_bound(eq, lambda x: np.zeros_like(x), pts) == 0.0


def test_flux_bound_rotation_on_ball_and_skipping():
    eq = solve_isotropic(math.pi, 2)
    rot = lambda x: np.stack([-x[:, 1], x[:, 0]], -1)
    t = np.linspace(0, 2 * np.pi, 50)
    bounds = []
    for k in range(1, 7):
        r = 1 + 10.0**-k
        bounds.append(boundary_flux_bound(eq, rot, np.stack([r * np.cos(t), r * np.sin(t)], -1)))
    assert max(bounds) < 1e-6  # rotation is tangent to every circle
    assert boundary_flux_bound(eq, rot, np.array([[0.1, 0.2]])) == 0.0


def test_flux_bound_ellipse_tangent_field():
    eq = QuadraticEquilibrium.from_semi_axes((2.0, 1.0), mass=2 * math.pi)
    a = np.asarray(eq.axes)
    field = lambda x: np.stack([-(a[0] / a[1]) * x[:, 1], (a[1] / a[0]) * x[:, 0]], -1)
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False) + 0.01
    normal = np.stack([np.cos(t) / a[0], np.sin(t) / a[1]], -1)
    normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
    boundary = np.stack([a[0] * np.cos(t), a[1] * np.sin(t)], -1)
    bounds = [boundary_flux_bound(eq, field, boundary + 10.0**-k * normal) for k in range(1, 7)]
    assert np.all(np.isfinite(bounds))
    assert bounds[-1] <= 1.05 * max(bounds[:3])
