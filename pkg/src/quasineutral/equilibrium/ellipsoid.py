"""Potential of a uniformly charged ellipsoid and the map that sizes it.

For ``alpha`` in the positive orthant,

    Z_j(alpha) = int_0^inf (alpha_j + s)^-1 prod_k (alpha_k + s)^-1/2 ds

is the gradient of a strictly concave function: ``zeta`` itself in 2D and
``2 zeta`` in 3D, where differentiating under the integral brings a factor 1/2. Inside the
ellipsoid ``K_a`` the Newtonian potential of its indicator is a quadratic
polynomial whose coefficients are ``-(prod a) Z_k(a^2) / 4``; inverting ``Z``
therefore fixes the semi-axes of the equilibrium cloud for a quadratic trap.

All functions accept batches: ``alpha`` has shape ``(..., N)``.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import QuasineutralError
from ..core import halfline_quad, interval_quad, sigma_a

__all__ = [
    "ZInverseError",
    "zeta",
    "z_map",
    "z_jacobian",
    "z_inverse",
    "ellipsoid_newtonian_potential",
    "ellipsoid_newtonian_gradient",
    "boundary_integrals",
]


class ZInverseError(QuasineutralError, RuntimeError):
    """Damped Newton for ``Z^-1`` did not converge.

    ``alpha`` holds the last iterate and ``residual`` the sup-norm of
    ``Z(alpha) - z`` for each batch entry.
    """

    def __init__(self, message, alpha, residual):
        super().__init__(message)
        self.alpha = alpha
        self.residual = residual


def _positive(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape[-1] not in (2, 3):
        raise ValueError(f"the Z map is implemented for N = 2 or 3, got N = {alpha.shape[-1]}")
    if np.any(~(alpha > 0)):
        raise ValueError("all components must be positive")
    return alpha


def _weight(alpha, s):
    # prod_k (alpha_k + s)^-1/2 with alpha (..., N, 1) against s (..., 1, M)
    return np.prod(alpha + s, axis=-2) ** -0.5


def _geo_scale(alpha):
    return np.exp(np.mean(np.log(alpha), axis=-1))


def zeta(alpha):
    """``4 ln(sqrt(a1) + sqrt(a2))`` in 2D, ``-int_0^inf prod(alpha_k+s)^-1/2 ds`` in 3D."""
    alpha = _positive(alpha)
    if alpha.shape[-1] == 2:
        return 4.0 * np.log(np.sqrt(alpha[..., 0]) + np.sqrt(alpha[..., 1]))
    al = alpha[..., :, None]
    val, _ = halfline_quad(lambda s: _weight(al, s[..., None, :]), _geo_scale(alpha),
                           tail_power=1.5)
    return -val


def z_map(alpha):
    """The map ``Z``; closed form in 2D, exp-sinh quadrature in 3D."""
    alpha = _positive(alpha)
    if alpha.shape[-1] == 2:
        g = np.sqrt(alpha[..., 0] * alpha[..., 1])
        return 2.0 / (alpha + g[..., None])
    al = alpha[..., :, None]

    def integrand(s):
        den = al + s[..., 0, :][..., None, :]
        return np.prod(den, axis=-2, keepdims=True) ** -0.5 / den

    val, _ = halfline_quad(integrand, _geo_scale(alpha)[..., None], tail_power=2.5)
    return val


def z_jacobian(alpha):
    """Jacobian ``dZ_j / dalpha_k`` (the Hessian of ``zeta``), shape ``(..., N, N)``.

    ``-1/2 int (alpha_j+s)^-1 (alpha_k+s)^-1 w ds`` off the diagonal and
    ``-3/2 int (alpha_j+s)^-2 w ds`` on it, with ``w = prod (alpha+s)^-1/2``.
    """
    alpha = _positive(alpha)
    n = alpha.shape[-1]
    al = alpha[..., :, None]

    def integrand(s):
        den = al + s[..., 0, 0, :][..., None, :]
        inv = 1.0 / den
        w = np.prod(den, axis=-2) ** -0.5
        return inv[..., :, None, :] * inv[..., None, :, :] * w[..., None, None, :]

    val, _ = halfline_quad(integrand, _geo_scale(alpha)[..., None, None],
                           tail_power=n / 2 + 2)
    factor = -0.5 * (1.0 + 2.0 * np.eye(n))
    return val * factor


def _z_inverse_2d(z):
    z1, z2 = z[..., 0], z[..., 1]
    tot = z1 + z2
    return np.stack([2 * z2 / (z1 * tot), 2 * z1 / (z2 * tot)], axis=-1)


def z_inverse(z, *, atol: float = 1e-10, rtol: float = 1e-13, max_iter: int = 100):
    """Inverse of :func:`z_map`.

    In 2D this is the closed form. In 3D it minimises the strictly convex
    function ``alpha -> z . alpha - 2 zeta(alpha)`` by damped Newton: the
    Hessian is ``-dZ/dalpha``, and steps are halved until the iterate stays in
    the positive orthant and the objective does not increase. The start
    ``alpha_j = (N z_j / 2)^(-2/N)`` is exact for isotropic ``z``.

    An entry is converged once ``|Z(alpha) - z|_inf`` is below both ``atol``
    and ``rtol |z|_inf``; the relative test keeps round trips tight when
    ``z`` is large.
    """
    z = _positive(z)
    n = z.shape[-1]
    if n == 2:
        return _z_inverse_2d(z)
    shape = z.shape
    zb = z.reshape(-1, n)
    alpha = (n * zb / 2.0) ** (-2.0 / n)
    tol = np.minimum(atol, rtol * np.abs(zb).max(axis=1))

    def objective(zz, a):
        return np.sum(zz * a, axis=1) - 2.0 * zeta(a)

    resid = np.full(zb.shape[0], np.inf)
    for _ in range(max_iter):
        za = z_map(alpha)
        grad = zb - za
        resid = np.abs(grad).max(axis=1)
        todo = resid > tol
        if not np.any(todo):
            return alpha.reshape(shape)
        idx = np.flatnonzero(todo)
        a = alpha[idx]
        hess = -z_jacobian(a)
        step = -np.linalg.solve(hess, grad[idx][..., None])[..., 0]
        zi = zb[idx]
        f0 = objective(zi, a)
        t = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        for _ in range(60):
            cand = a + t[:, None] * step
            pos = np.all(cand > 0, axis=1)
            f1 = np.full(idx.size, np.inf)
            if np.any(pos):
                f1[pos] = objective(zi[pos], cand[pos])
            ok = pos & (f1 <= f0 + 1e-14 * np.abs(f0))
            accepted |= ok
            a = np.where((ok & (t > 0))[:, None], cand, a)
            t = np.where(ok, 0.0, 0.5 * t)
            if np.all(accepted):
                break
        alpha[idx] = a
    raise ZInverseError(
        f"Z inverse did not converge in {max_iter} iterations "
        f"(max residual {float(resid.max()):.3e})",
        alpha.reshape(shape), resid.reshape(shape[:-1]))


# -- potential of the uniform ellipsoid ------------------------------------------

def boundary_integrals(x, a, sigma):
    """Finite integrals over ``[0, sigma]`` used outside the ellipsoid.

    Returns ``(I, J)`` where

        I = int_0^sigma (sum_j x_j^2/(a_j^2+s) - 1) w(s) ds          (...)
        J_k = int_0^sigma (a_k^2+s)^-1 w(s) ds                        (..., N)

    with ``w(s) = prod (a_j^2 + s)^-1/2``. The bracket in ``I`` is rewritten as
    ``(sigma - s) sum_j x_j^2 / ((a_j^2+s)(a_j^2+sigma))`` so the integrand keeps
    full relative accuracy next to the boundary, where both factors are small.
    ``sigma`` must be positive.
    """
    a2 = np.asarray(a, dtype=float) ** 2
    x = np.asarray(x, dtype=float)
    sig = np.asarray(sigma, dtype=float)
    x2 = x**2
    den_sig = a2 + sig[..., None]

    def integrand_i(s):
        den = a2[:, None] + s[..., None, :]            # (..., N, M)
        w = np.prod(den, axis=-2) ** -0.5
        frac = np.sum(x2[..., :, None] / (den * den_sig[..., :, None]), axis=-2)
        return (sig[..., None] - s) * frac * w

    def integrand_j(k):
        def f(s):
            den = a2[:, None] + s[..., None, :]
            return np.prod(den, axis=-2) ** -0.5 / den[..., k, :]
        return f

    scale = np.full(sig.shape, a2.min())
    i_val = interval_quad(integrand_i, sig, scale=scale)
    j_val = np.stack([interval_quad(integrand_j(k), sig, scale=scale)
                      for k in range(a2.size)], axis=-1)
    return i_val, j_val


def _interior_constant(a):
    a = np.asarray(a, dtype=float)
    a2 = a**2
    if a.size == 2:
        # exact additive constant of the true logarithmic convolution:
        # far-field matching with |K_a| Gamma(x) fixes it to 1 + ln 2
        return 1.0 + math.log(2.0) - math.log(0.5 * (a[0] + a[1]) ** 2)
    return -float(zeta(a2))


def ellipsoid_newtonian_potential(x, a):
    """``Gamma * 1_{K_a}`` at ``x`` for the ellipsoid with semi-axes ``a`` (N = 2, 3)."""
    a = np.asarray(a, dtype=float)
    n = a.size
    if n not in (2, 3):
        raise ValueError("ellipsoid potential is implemented for N = 2 or 3")
    x = np.asarray(x, dtype=float)
    pref = 0.25 * float(np.prod(a))
    zk = z_map(a**2)
    val = pref * (_interior_constant(a) - np.sum(x**2 * zk, axis=-1))
    sig = sigma_a(x, a)
    out = np.asarray(val, dtype=float).copy()
    outside = np.asarray(sig > 0)
    if np.any(outside):
        xo = x[outside] if x.ndim > 1 else x
        i_val, _ = boundary_integrals(xo, a, np.asarray(sig)[outside] if x.ndim > 1 else sig)
        if x.ndim > 1:
            out[outside] += pref * i_val
        else:
            out = out + pref * i_val
    return out[()] if out.ndim == 0 else out


def ellipsoid_newtonian_gradient(x, a):
    """Gradient of :func:`ellipsoid_newtonian_potential`.

    ``-(prod a / 2) x_k int_sigma^inf (a_k^2+s)^-1 w(s) ds`` with the lower
    limit clipped at 0 inside the ellipsoid.
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    zk = z_map(a**2)
    coef = np.broadcast_to(zk, x.shape).copy()
    sig = np.asarray(sigma_a(x, a))
    outside = sig > 0
    if np.any(outside):
        if x.ndim > 1:
            _, j_val = boundary_integrals(x[outside], a, sig[outside])
            coef[outside] -= j_val
        else:
            _, j_val = boundary_integrals(x, a, sig)
            coef = coef - j_val
    return -0.5 * float(np.prod(a)) * x * coef
