"""Equilibrium triples ``(n_e, K, Phi_e)`` and the solvers that build them.

Throughout, ``Phi_e = Phi_ext + Gamma * n_e - C*`` with ``n_e`` the
equilibrium density, ``K`` its support and ``C*`` the Robin constant. It
vanishes on ``K``, is positive outside and satisfies
``Laplacian Phi_e = Laplacian Phi_ext`` off ``K``. Evaluators return exact
zeros on ``K`` instead of subtracting nearly equal numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from ..core import _as_points, ball_volume, check_dim, gamma_radial, sigma_a
from ..errors import (InternalInconsistencyError, NoEquilibriumError,
                      PreconditionError, UnsupportedEquilibriumError)
from .domains import Ball, EllipsoidDomain, Interval, RadialSupport
from .ellipsoid import _interior_constant, boundary_integrals, z_inverse, z_map
from .potentials import Convex1D, Isotropic, Potential, QuadraticAniso, RadialProfile

__all__ = [
    "Equilibrium",
    "IsotropicEquilibrium",
    "QuadraticEquilibrium",
    "RadialEquilibrium",
    "ConvexEquilibrium1D",
    "solve_isotropic",
    "solve_quadratic",
    "solve_radial",
    "solve_convex_1d",
    "solve",
    "phi_e_quadratic_eval",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
# beyond this fraction of the support's size the closed forms lose nothing
# to cancellation; closer in, the gradient is integrated from the boundary
_NEAR = 0.25


def _integrate_from(g, start, stop):
    """``int_start^stop g`` by 24-point Gauss-Legendre, batched over ``stop``."""
    half = 0.5 * (stop - start)
    s = start + half[:, None] * (_GL_X + 1.0)
    return half * np.sum(g(s) * _GL_W, axis=-1)


def _shape_out(vals, shape):
    vals = vals.reshape(shape)
    return vals[()] if shape == () else vals


class Equilibrium:
    """Common interface of the equilibrium classes.

    Attributes ``potential``, ``domain``, ``mass``, ``robin_constant`` and
    ``dim`` are set by subclasses; instances are immutable.
    """

    kind = "abstract"
    potential: Potential
    mass: float
    robin_constant: float

    @property
    def dim(self) -> int:
        return self.potential.dim

    def contains(self, x):
        return self.domain.contains(x)

    def phi_ext(self, x):
        return self.potential.value(x)

    def grad_phi_ext(self, x):
        return self.potential.gradient(x)

    def n_e(self, x):
        raise NotImplementedError

    def phi_e(self, x):
        raise NotImplementedError

    def grad_phi_e(self, x):
        raise NotImplementedError

    def phi_e_and_grad(self, x):
        return self.phi_e(x), self.grad_phi_e(x)

    def mass_by_quadrature(self) -> float:
        """Integral of ``n_e`` computed independently of the stored mass."""
        raise NotImplementedError

    def summary(self) -> dict:
        return {
            "class": self.kind,
            "potential": self.potential.describe(),
            "domain_params": self.domain.params(),
            "mass": self.mass,
            "robin_constant": self.robin_constant,
        }


# -- radially symmetric classes -------------------------------------------------

class _RadialBase(Equilibrium):
    """Shared evaluation for ``Phi_e(x) = F(|x|)`` with ``F = 0`` on ``[0, R]``."""

    radius: float

    def _slope(self, r):
        """``F'(r)`` for ``r >= R``."""
        raise NotImplementedError

    def _far(self, r):
        """Closed form of ``F(r)`` for ``r >= R``."""
        raise NotImplementedError

    def phi_e(self, x):
        x = _as_points(x, self.dim)
        shape = x.shape[:-1]
        r = np.linalg.norm(x, axis=-1).ravel()
        out = np.zeros_like(r)
        R = self.radius
        near = (r > R) & (r - R < _NEAR * R)
        far = r - R >= _NEAR * R
        if np.any(near):
            out[near] = _integrate_from(self._slope, R, r[near])
        if np.any(far):
            out[far] = self._far(r[far])
        return _shape_out(out, shape)

    def grad_phi_e(self, x):
        x = _as_points(x, self.dim)
        r = np.linalg.norm(x, axis=-1)
        out = np.zeros_like(x)
        outside = r > self.radius
        if np.any(outside):
            ro = r[outside]
            out[outside] = (self._slope(ro) / ro)[:, None] * x[outside]
        return out


@dataclass(frozen=True, eq=False)
class IsotropicEquilibrium(_RadialBase):
    """``n_e = 1`` on the ball of volume ``m`` for ``Phi_ext = |x|^2/(2N)``."""

    potential: Isotropic
    mass: float
    radius: float
    robin_constant: float
    kind = "isotropic"

    @property
    def domain(self):
        return Ball(self.radius, self.dim)

    def n_e(self, x):
        return self.domain.contains(x).astype(float)

    def mass_by_quadrature(self):
        return ball_volume(self.dim) * self.radius**self.dim

    def _slope(self, r):
        n, R = self.dim, self.radius
        return (r - R**n * r ** (1 - n)) / n

    def _far(self, r):
        n, R = self.dim, self.radius
        if n == 1:
            return 0.5 * (r - R) ** 2
        if n == 2:
            return 0.25 * (r**2 - R**2) - 0.5 * R**2 * np.log(r / R)
        return r**2 / (2 * n) + R**n / (n * (n - 2) * r ** (n - 2)) - R**2 / (2 * (n - 2))


@dataclass(frozen=True, eq=False)
class RadialEquilibrium(_RadialBase):
    """Equilibrium of a radial profile ``phi(|x|)``.

    ``n_e = phi'' + (N - 1) phi' / r`` on ``B(0, R)``; it vanishes on
    ``B(0, r_min)`` when ``phi`` is flat there.
    """

    potential: RadialProfile
    mass: float
    radius: float
    r_min: float
    robin_constant: float
    kind = "radial"

    @property
    def domain(self):
        return RadialSupport(self.r_min, self.radius, self.dim)

    def n_e(self, x):
        r = np.linalg.norm(_as_points(x, self.dim), axis=-1)
        inside = r <= self.radius
        with np.errstate(invalid="ignore"):
            dens = self.potential.radial_laplacian(np.where(inside, r, self.radius))
        return np.where(inside, dens, 0.0)

    def mass_by_quadrature(self):
        n = self.dim
        shell = lambda r: n * ball_volume(n) * r ** (n - 1) * float(
            self.potential.radial_laplacian(np.float64(r)))
        pieces = [p for p in (0.0, self.r_min, self.radius) if p >= 0]
        total = 0.0
        for lo, hi in zip(pieces[:-1], pieces[1:]):
            if hi > lo:
                total += integrate.quad(shell, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]
        return total

    def _slope(self, r):
        n = self.dim
        return (np.asarray(self.potential.dphi(r), dtype=float)
                - self.mass / (n * ball_volume(n) * r ** (n - 1)))

    def _far(self, r):
        R, p = self.radius, self.potential
        return (p.phi(r) - p.phi(R)
                + self.mass * (gamma_radial(r, self.dim) - gamma_radial(R, self.dim)))


# -- quadratic potentials ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadraticEquilibrium(Equilibrium):
    """Uniform density ``sum lambda_j^-2`` on the ellipsoid with semi-axes ``a``.

    Outside ``K_a``,

        Phi_e = L (prod a / 4) int_0^sigma (sum_j x_j^2/(a_j^2+s) - 1) w(s) ds,
        d_k Phi_e = L (prod a / 2) x_k int_0^sigma (a_k^2+s)^-1 w(s) ds,

    with ``L = sum lambda_j^-2``, ``w = prod (a_j^2+s)^-1/2`` and
    ``sigma = sigma_a(x)``.
    """

    potential: QuadraticAniso
    mass: float
    axes: tuple
    robin_constant: float
    kind = "quadratic"

    @classmethod
    def from_semi_axes(cls, axes, mass: float):
        """The quadratic trap whose equilibrium of mass ``mass`` is ``K_axes``."""
        a = np.asarray(axes, dtype=float)
        n = a.size
        inv_sq = mass * z_map(a**2) / (2 * ball_volume(n))
        return _build_quadratic(QuadraticAniso(tuple(inv_sq ** -0.5)), float(mass), a)

    @property
    def domain(self):
        return EllipsoidDomain(self.axes)

    @property
    def density_value(self) -> float:
        return float(self.potential.inv_sq.sum())

    def n_e(self, x):
        return self.density_value * self.domain.contains(x)

    def mass_by_quadrature(self):
        return self.density_value * ball_volume(self.dim) * float(np.prod(self.axes))

    def _prefactor(self):
        return self.density_value * float(np.prod(self.axes))

    def phi_e(self, x):
        x = _as_points(x, self.dim)
        shape = x.shape[:-1]
        flat = x.reshape(-1, self.dim)
        sig = np.atleast_1d(sigma_a(flat, self.axes))
        out = np.zeros(flat.shape[0])
        outside = sig > 0
        if np.any(outside):
            i_val, _ = boundary_integrals(flat[outside], self.axes, sig[outside])
            out[outside] = 0.25 * self._prefactor() * i_val
        return _shape_out(out, shape)

    def grad_phi_e(self, x):
        return self.phi_e_and_grad(x)[1]

    def phi_e_and_grad(self, x):
        x = _as_points(x, self.dim)
        shape = x.shape[:-1]
        flat = x.reshape(-1, self.dim)
        sig = np.atleast_1d(sigma_a(flat, self.axes))
        val = np.zeros(flat.shape[0])
        grad = np.zeros_like(flat)
        outside = sig > 0
        if np.any(outside):
            xo = flat[outside]
            i_val, j_val = boundary_integrals(xo, self.axes, sig[outside])
            val[outside] = 0.25 * self._prefactor() * i_val
            grad[outside] = 0.5 * self._prefactor() * xo * j_val
        return _shape_out(val, shape), grad.reshape(x.shape)


def phi_e_quadratic_eval(x, eq: QuadraticEquilibrium):
    """``(Phi_e(x), grad Phi_e(x))`` for an equilibrium built by :func:`solve_quadratic`."""
    if not isinstance(eq, QuadraticEquilibrium):
        raise TypeError("expected an equilibrium of a quadratic potential")
    return eq.phi_e_and_grad(x)


# -- one-dimensional convex potentials ------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvexEquilibrium1D(Equilibrium):
    """``n_e = Phi''`` on ``[a_-, a_+]`` where ``Phi'(a_+-) = +-m/2``.

    Off the interval ``Phi_e`` is ``Phi`` minus its tangent line at the
    nearer endpoint, for example ``Phi(x) - Phi(a_+) - (m/2)(x - a_+)`` on
    the right.
    """

    potential: Convex1D
    mass: float
    lo: float
    hi: float
    robin_constant: float
    kind = "convex1d"

    @property
    def domain(self):
        return Interval(self.lo, self.hi)

    def n_e(self, x):
        x = _as_points(x, 1)[..., 0]
        inside = (x >= self.lo) & (x <= self.hi)
        dens = np.asarray(self.potential.d2phi(np.clip(x, self.lo, self.hi)), dtype=float)
        return np.where(inside, dens, 0.0)

    def mass_by_quadrature(self):
        f = lambda x: float(self.potential.d2phi(np.float64(x)))
        return integrate.quad(f, self.lo, self.hi, epsabs=0, epsrel=1e-13, limit=200)[0]

    def _side(self, x, sign):
        end = self.hi if sign > 0 else self.lo
        p, half = self.potential, 0.5 * self.mass
        return p.dphi(x) - sign * half, p.phi(x) - p.phi(end) - sign * half * (x - end)

    def phi_e(self, x):
        x = _as_points(x, 1)[..., 0]
        shape = x.shape
        x = x.ravel()
        out = np.zeros_like(x)
        scale = _NEAR * max(self.hi - self.lo, 1e-300)
        for sign, end in ((1, self.hi), (-1, self.lo)):
            d = sign * (x - end)
            near = (d > 0) & (d < scale)
            far = d >= scale
            if np.any(near):
                slope = lambda s, sign=sign: self._side(s, sign)[0]
                out[near] = _integrate_from(slope, end, x[near])
            if np.any(far):
                out[far] = self._side(x[far], sign)[1]
        return _shape_out(out, shape)

    def grad_phi_e(self, x):
        x = _as_points(x, 1)
        xs = x[..., 0]
        out = np.zeros_like(xs)
        right, left = xs > self.hi, xs < self.lo
        if np.any(right):
            out[right] = self._side(xs[right], 1)[0]
        if np.any(left):
            out[left] = self._side(xs[left], -1)[0]
        return out[..., None]


# -- solvers -------------------------------------------------------------------------

def _check_mass(m):
    m = float(m)
    if not (m > 0 and math.isfinite(m)):
        raise ValueError(f"mass must be positive and finite, got {m!r}")
    return m


def solve_isotropic(m: float, dim: int) -> IsotropicEquilibrium:
    """Ball of volume ``m`` for ``Phi_ext = |x|^2/(2 dim)``."""
    m = _check_mass(m)
    dim = check_dim(dim)
    R = (m / ball_volume(dim)) ** (1.0 / dim)
    robin = m * float(gamma_radial(R, dim)) + R**2 / (2 * dim)
    return IsotropicEquilibrium(Isotropic(dim), m, R, robin)


def _build_quadratic(pot: QuadraticAniso, m: float, a: np.ndarray) -> QuadraticEquilibrium:
    n = a.size
    dens = float(pot.inv_sq.sum())
    implied = ball_volume(n) * float(np.prod(a)) * dens
    if abs(implied - m) > 1e-8 * m:
        raise InternalInconsistencyError(
            f"mass identity violated: |B_1| prod(a) sum(lambda^-2) = {implied!r}, m = {m!r}")
    robin = 0.25 * dens * float(np.prod(a)) * _interior_constant(a)
    return QuadraticEquilibrium(pot, m, tuple(float(v) for v in a), robin)


def solve_quadratic(lam, m: float) -> QuadraticEquilibrium:
    """Ellipsoidal equilibrium of ``sum x_j^2/(2 lambda_j^2)``, N = 2 or 3.

    The semi-axes solve ``(m / (2|B_1|)) Z(a^2) = (lambda_j^-2)_j``, which is
    exactly the condition that ``Phi_ext + Gamma * n_e`` is constant on the
    ellipsoid; the mass identity is then checked as a postcondition.
    """
    pot = lam if isinstance(lam, QuadraticAniso) else QuadraticAniso(tuple(np.atleast_1d(lam)))
    m = _check_mass(m)
    n = pot.dim
    if n not in (2, 3):
        raise ValueError("quadratic equilibria are built for N = 2 or 3; use solve_isotropic in 1D")
    z = 2 * ball_volume(n) / m * pot.inv_sq
    a = np.sqrt(z_inverse(z))
    return _build_quadratic(pot, m, a)


def _expand_bracket(f, start=1.0, limit=1e12):
    x = start
    while x <= limit:
        if f(x) > 0:
            return x
        x *= 2.0
    return None


def solve_radial(profile: RadialProfile, m: float) -> RadialEquilibrium:
    """Ball ``B(0, R)`` with ``N |B_1| R^(N-1) phi'(R) = m``."""
    m = _check_mass(m)
    n = profile.dim
    if n < 2:
        raise ValueError("radial equilibria need N >= 2; use solve_convex_1d on the line")
    vol = ball_volume(n)

    def flux(r):
        return n * vol * r ** (n - 1) * float(profile.dphi(np.float64(r))) - m

    hi = _expand_bracket(flux)
    if hi is None:
        raise NoEquilibriumError("the radial profile cannot confine this mass: "
                                 "N |B_1| R^(N-1) phi'(R) stays below m")
    R = optimize.brentq(flux, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    grid = np.linspace(0.0, R, 513)
    d1 = np.asarray(profile.dphi(grid), dtype=float)
    if d1[0] < 0 or np.any(np.diff(d1) < -1e-12 * max(1.0, abs(d1).max())):
        raise PreconditionError("phi' must be nonnegative at 0 and nondecreasing")

    if float(profile.dphi(np.float64(0.0))) > 0:
        r_min = 0.0
    else:
        lo, up = 0.0, R
        for _ in range(200):
            mid = 0.5 * (lo + up)
            if float(profile.dphi(np.float64(mid))) <= 0:
                lo = mid
            else:
                up = mid
            if up - lo <= 4 * np.finfo(float).eps * R:
                break
        r_min = lo
    robin = m * float(gamma_radial(R, n)) + float(profile.phi(np.float64(R)))
    return RadialEquilibrium(profile, m, float(R), float(r_min), robin)


def solve_convex_1d(potential: Convex1D, m: float) -> ConvexEquilibrium1D:
    """Interval ``[a_-, a_+]`` with ``Phi'(a_+-) = +-m/2`` and ``n_e = Phi''``."""
    m = _check_mass(m)
    dphi = lambda x: float(potential.dphi(np.float64(x)))
    half = 0.5 * m
    up = _expand_bracket(lambda x: dphi(x) - half)
    down = _expand_bracket(lambda x: -dphi(-x) - half)
    if up is None or down is None:
        raise NoEquilibriumError("Phi' does not exceed m/2 at +infinity and fall below "
                                 "-m/2 at -infinity")
    lo_end, hi_end = -down, up
    tol = dict(xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    a_plus = optimize.brentq(lambda x: dphi(x) - half, lo_end, hi_end, **tol)
    a_minus = optimize.brentq(lambda x: dphi(x) + half, lo_end, hi_end, **tol)

    grid = np.linspace(a_minus, a_plus, 1025)
    d2 = np.asarray(potential.d2phi(grid), dtype=float) + 0.0 * grid
    if np.any(d2 < 0):
        raise PreconditionError("Phi'' is negative inside the support: Phi is not convex")
    if d2.min() <= 1e-10 * d2.max():
        raise UnsupportedEquilibriumError(
            "Phi'' vanishes inside (a_-, a_+); the density is not bounded below on its support")
    p = potential
    robin = 0.5 * (float(p.phi(a_plus)) + float(p.phi(a_minus))) - 0.25 * m * (a_plus - a_minus)
    return ConvexEquilibrium1D(p, m, float(a_minus), float(a_plus), robin)


def solve(potential: Potential, m: float) -> Equilibrium:
    """Dispatch on the potential family."""
    if isinstance(potential, Isotropic):
        return solve_isotropic(m, potential.dim)
    if isinstance(potential, QuadraticAniso):
        return solve_quadratic(potential, m)
    if isinstance(potential, RadialProfile):
        return solve_radial(potential, m)
    if isinstance(potential, Convex1D):
        return solve_convex_1d(potential, m)
    raise TypeError(f"unsupported potential {type(potential).__name__}")
