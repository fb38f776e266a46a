"""Kernel and geometry primitives shared by the rest of the package.

Points are numpy arrays whose last axis holds the ``dim`` coordinates, so a
single point has shape ``(dim,)`` and a cloud of points ``(n, dim)``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import QuasineutralError

__all__ = [
    "SIGMA_AT_ORIGIN",
    "SingularEvaluationError",
    "check_dim",
    "ball_volume",
    "gamma",
    "gamma_radial",
    "gamma_gradient",
    "sigma_a",
    "halfline_quad",
    "interval_quad",
    "cell_average_gamma",
]

#: Value returned by :func:`sigma_a` at the origin. Callers branch on
#: ``sigma <= 0`` before doing arithmetic with it.
SIGMA_AT_ORIGIN = -math.inf


class SingularEvaluationError(QuasineutralError, ValueError):
    """Raised when the fundamental solution is evaluated at its pole."""


def check_dim(dim: int) -> int:
    if dim not in (1, 2, 3):
        raise ValueError(f"spatial dimension must be 1, 2 or 3, got {dim!r}")
    return int(dim)


def ball_volume(dim: int) -> float:
    """Lebesgue measure of the unit ball of R^dim."""
    check_dim(dim)
    return (2.0, math.pi, 4.0 * math.pi / 3.0)[dim - 1]


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with last axis {dim}, got shape {x.shape}")
    return x


def gamma_radial(r, dim: int):
    """Fundamental solution of -Laplacian as a function of ``r = |x|``."""
    check_dim(dim)
    r = np.asarray(r, dtype=float)
    if np.any(r == 0):
        raise SingularEvaluationError("fundamental solution evaluated at x = 0")
    if dim == 1:
        out = -0.5 * r
    elif dim == 2:
        out = -np.log(r) / (2 * math.pi)
    else:
        out = 1.0 / (dim * (dim - 2) * ball_volume(dim) * r ** (dim - 2))
    return out[()] if out.ndim == 0 else out


def gamma(x, dim: int):
    """Fundamental solution ``Gamma`` of ``-Laplacian`` in R^dim.

    ``-|x|/2`` in 1D, ``-ln|x|/(2 pi)`` in 2D and ``1/(4 pi |x|)`` in 3D.
    """
    x = _as_points(x, dim)
    return gamma_radial(np.linalg.norm(x, axis=-1), dim)


def gamma_gradient(x, dim: int):
    """Exact gradient of :func:`gamma`; same shape as ``x``.

    Every branch has the form ``-x / (dim |B_1| |x|^dim)``.
    """
    x = _as_points(x, dim)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularEvaluationError("gradient of fundamental solution at x = 0")
    coef = -1.0 / (dim * ball_volume(dim) * r**dim)
    return coef[..., None] * x


def sigma_a(x, a, *, bisection_steps: int = 60, newton_steps: int = 4):
    """Ellipsoidal radial coordinate.

    Returns the largest root ``s`` of ``sum_j x_j^2 / (a_j^2 + s) = 1``;
    ``x`` lies in the ellipsoid with semi-axes ``a`` iff the result is
    ``<= 0``. The origin maps to :data:`SIGMA_AT_ORIGIN`.

    The left-hand side is strictly decreasing in ``s`` on the half-line
    beyond the largest relevant pole, so the root is bracketed and found by
    bisection, then polished by Newton steps kept inside the bracket.
    """
    a2 = np.asarray(a, dtype=float) ** 2
    if np.any(a2 <= 0):
        raise ValueError("semi-axes must be positive")
    dim = a2.size
    x = _as_points(x, dim)
    shape = x.shape[:-1]
    x2 = (x**2).reshape(-1, dim)
    out = np.full(x2.shape[0], SIGMA_AT_ORIGIN)
    live = np.any(x2 > 0, axis=1)
    if not np.any(live):
        return out.reshape(shape)[()] if shape == () else out.reshape(shape)
    x2 = x2[live]

    # the pole that bounds the decreasing branch comes from the smallest
    # a_j^2 among coordinates that are actually nonzero
    masked = np.where(x2 > 0, a2, np.inf)
    lo = -masked.min(axis=1)
    hi = x2.sum(axis=1)  # F(hi) < 0 here since a_j^2 > 0

    def residual(s):
        return (x2 / (a2 + s[:, None])).sum(axis=1) - 1.0

    # for points a hair off the origin the root rounds onto the pole; the
    # resulting infinities are rejected by the bracket test below
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            pos = residual(mid) > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        s = 0.5 * (lo + hi)
        for _ in range(newton_steps):
            den = a2 + s[:, None]
            f = (x2 / den).sum(axis=1) - 1.0
            df = -(x2 / den**2).sum(axis=1)
            step = np.where(df != 0, f / df, 0.0)
            cand = s - step
            inside = (cand > lo) & (cand < hi)
            s = np.where(inside, cand, s)
    out[live] = s
    out = out.reshape(shape)
    return out[()] if shape == () else out


# -- quadrature ---------------------------------------------------------------

def _exp_sinh_nodes(h: float, tmax: float = 4.5):
    k = np.arange(-int(math.ceil(tmax / h)), int(math.ceil(tmax / h)) + 1)
    t = k * h
    u = 0.5 * math.pi * np.sinh(t)
    s = np.exp(u)
    w = h * 0.5 * math.pi * np.cosh(t) * s
    return s, w


@lru_cache(maxsize=16)
def _cached_nodes(level: int):
    h = 0.5**level
    s, w = _exp_sinh_nodes(h)
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def halfline_quad(func, scale, *, tail_power: float, rtol: float = 1e-13,
                  max_level: int = 8):
    """Integrate ``func`` over ``[0, inf)`` with an exp-sinh rule.

    ``func`` maps a 1-D array of abscissae ``s`` to an array whose last axis
    matches ``s``; integration runs along that axis, so batched integrands
    are handled in one call. ``scale`` (scalar or array broadcasting against
    the leading axes) sets where the rule is centred. ``tail_power`` is the
    decay exponent ``p`` of the integrand (``|func(s)| ~ s^-p``, ``p > 1``),
    used for the explicit bound on the part of the half-line beyond the last
    node.

    The step is halved until two successive estimates agree to ``rtol``.
    Returns ``(value, error_estimate)``.
    """
    scale = np.asarray(scale, dtype=float)
    prev = None
    for level in range(2, max_level + 1):
        s, w = _cached_nodes(level)
        ss = scale[..., None] * s
        vals = func(ss)
        est = np.sum(vals * w * scale[..., None], axis=-1)
        # tail beyond the last node, bounded by the power law through it
        s_last = ss[..., -1]
        tail = np.abs(vals[..., -1]) * s_last / (tail_power - 1.0)
        if prev is not None:
            err = np.abs(est - prev) + tail
            if np.all(err <= rtol * np.maximum(np.abs(est), 1e-300)):
                return est + 0.0, err
        prev = est
    return est, np.abs(est - prev) + tail


@lru_cache(maxsize=8)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def interval_quad(func, upper, *, scale, nodes: int = 64):
    """Integrate ``func`` over ``[0, upper]`` for a batch of upper limits.

    Uses the substitution ``s = scale (e^u - 1)`` so that integrands with
    singularities at ``s = -a^2`` (``a^2 >= scale``) stay well resolved for
    large ``upper``, followed by Gauss-Legendre in ``u``. ``func`` receives
    ``s`` with shape ``upper.shape + (nodes,)``.
    """
    upper = np.asarray(upper, dtype=float)
    scale = np.asarray(scale, dtype=float)
    xg, wg = _gauss_legendre(nodes)
    umax = np.log1p(upper / scale)
    u = umax[..., None] * xg
    s = scale[..., None] * np.expm1(u)
    ds = scale[..., None] * np.exp(u)
    return np.sum(func(s) * ds * wg, axis=-1) * umax


# -- cell-averaged kernel -------------------------------------------------------

def _cell_integral(h: np.ndarray) -> float:
    # Integral over the cell [-h/2, h/2]^dim of ln|x| (2D) or 1/|x| (3D),
    # reduced to smooth face integrals with the divergence theorem:
    # div(x ln r) = 2 ln r + 1 in 2D and div(x / r) = 2 / r in 3D.
    opts = dict(epsabs=1e-14, epsrel=1e-12)
    if h.size == 2:
        total = 0.0
        for i in range(2):
            d, w = 0.5 * h[i], 0.5 * h[1 - i]
            face, _ = integrate.quad(lambda y: 0.5 * math.log(d * d + y * y), -w, w, **opts)
            total += 2 * d * face
        return 0.5 * (total - h[0] * h[1])
    total = 0.0
    for i in range(3):
        d = 0.5 * h[i]
        w1, w2 = (0.5 * h[j] for j in range(3) if j != i)
        face, _ = integrate.dblquad(lambda z, y: 1.0 / math.sqrt(d * d + y * y + z * z),
                                    -w1, w1, -w2, w2, **opts)
        total += 2 * d * face
    return 0.5 * total


@lru_cache(maxsize=64)
def _cell_average(h: tuple) -> float:
    h = np.asarray(h)
    vol = float(np.prod(h))
    if h.size == 2:
        return -_cell_integral(h) / (2 * math.pi * vol)
    return _cell_integral(h) / (4 * math.pi * vol)


def cell_average_gamma(h, dim: int) -> float:
    """Average of ``Gamma`` over the grid cell ``[-h/2, h/2]^dim`` centred at 0.

    ``h`` is a scalar spacing or a per-axis sequence.
    """
    check_dim(dim)
    h = np.broadcast_to(np.asarray(h, dtype=float), (dim,))
    if dim == 1:
        return -h[0] / 8.0
    return _cell_average(tuple(float(v) for v in h))
