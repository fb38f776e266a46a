"""Limit velocity fields of the quasi-neutral regime.

In 2D the limit flow on the support ``K`` solves the incompressible Euler
system with linear friction

    d_t V + (V . grad) V + grad p + gamma V = 0,   div V = 0,   V . nu = 0 on dK.

Rotations give exact solutions on discs and ellipses; :func:`limit_residual`
measures how well a field solves the system, and :func:`extend_divfree`
continues a field to the whole plane as a compactly supported divergence-free
field. In 1D the only admissible field is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import _as_points
from .equilibrium.domains import Ball, EllipsoidDomain, Interval

__all__ = [
    "LimitField",
    "ExtendedField",
    "Residual",
    "rigid_rotation_ball",
    "elliptic_rotation",
    "zero_field",
    "limit_field",
    "extend_divfree",
    "limit_residual",
    "discrete_divergence",
    "smooth_cutoff",
]


def _perp(x):
    return np.stack([-x[..., 1], x[..., 0]], axis=-1)


@dataclass(frozen=True)
class LimitField:
    """Time-dependent velocity field with its pressure.

    ``velocity(t, x)`` and ``pressure(t, x)`` take a scalar or per-point time
    and points of shape ``(..., dim)``. When known in closed form,
    ``streamfunction`` (2D, ``V = (-d_2 h, d_1 h)``), ``velocity_dt``,
    ``jacobian`` (``J[..., i, j] = d_j V_i``) and ``pressure_gradient`` are
    supplied too.
    """

    name: str
    dim: int
    domain: object
    friction: float
    velocity: Callable
    pressure: Callable
    streamfunction: Optional[Callable] = None
    velocity_dt: Optional[Callable] = None
    jacobian: Optional[Callable] = None
    pressure_gradient: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __call__(self, t, x):
        return self.velocity(t, x)

    def at(self, t):
        """Freeze time: a callable ``x -> V(t, x)``."""
        return lambda x: self.velocity(t, x)

    def describe(self):
        return {"family": self.name, "friction": self.friction, **self.params}


def _omega(omega0, gamma, t):
    return omega0 * np.exp(-gamma * np.asarray(t, dtype=float))


def elliptic_rotation(axes, omega0: float, gamma: float = 0.0) -> LimitField:
    """``V = omega(t) (-(a1/a2) x2, (a2/a1) x1)`` with ``omega = omega0 e^(-gamma t)``.

    Tangent to every ellipse ``x1^2/a1^2 + x2^2/a2^2 = c``. Its convective
    term is ``-omega^2 x``, balanced by ``p = omega^2 |x|^2 / 2``.
    """
    a1, a2 = (float(v) for v in axes)
    if a1 <= 0 or a2 <= 0:
        raise ValueError("semi-axes must be positive")
    omega0, gamma = float(omega0), float(gamma)
    if gamma < 0:
        raise ValueError("friction must be nonnegative")
    k1, k2 = a1 / a2, a2 / a1

    def w(t, x):
        return _omega(omega0, gamma, t)[..., None] if np.ndim(t) else _omega(omega0, gamma, t)

    def velocity(t, x):
        x = _as_points(x, 2)
        return w(t, x) * np.stack([-k1 * x[..., 1], k2 * x[..., 0]], axis=-1)

    def velocity_dt(t, x):
        return -gamma * velocity(t, x)

    def jacobian(t, x):
        x = _as_points(x, 2)
        om = np.broadcast_to(_omega(omega0, gamma, t), x.shape[:-1])
        jac = np.zeros(x.shape[:-1] + (2, 2))
        jac[..., 0, 1] = -k1 * om
        jac[..., 1, 0] = k2 * om
        return jac

    def pressure(t, x):
        x = _as_points(x, 2)
        return 0.5 * _omega(omega0, gamma, t) ** 2 * np.sum(x**2, axis=-1)

    def pressure_gradient(t, x):
        x = _as_points(x, 2)
        return w(t, x) ** 2 * x

    def streamfunction(t, x):
        x = _as_points(x, 2)
        return _omega(omega0, gamma, t) * 0.5 * (k2 * x[..., 0] ** 2 + k1 * x[..., 1] ** 2)

    domain = Ball(a1, 2) if a1 == a2 else EllipsoidDomain((a1, a2))
    name = "rigid_rotation" if a1 == a2 else "elliptic_rotation"
    params = {"omega0": omega0}
    params.update({"radius": a1} if a1 == a2 else {"axes": [a1, a2]})
    return LimitField(name, 2, domain, gamma, velocity, pressure, streamfunction,
                      velocity_dt, jacobian, pressure_gradient, params)


def rigid_rotation_ball(omega0: float, gamma: float, radius: float) -> LimitField:
    """``V = omega(t) (-x2, x1)`` on ``B(0, radius)``, ``p = omega^2 |x|^2 / 2``."""
    return elliptic_rotation((radius, radius), omega0, gamma)


def zero_field(domain, dim: int | None = None) -> LimitField:
    dim = dim if dim is not None else domain.dim

    def zeros(t, x):
        return np.zeros_like(_as_points(x, dim))

    def zero_scalar(t, x):
        return np.zeros(_as_points(x, dim).shape[:-1])

    def zero_jac(t, x):
        x = _as_points(x, dim)
        return np.zeros(x.shape[:-1] + (dim, dim))

    return LimitField("zero", dim, domain, 0.0, zeros, zero_scalar,
                      zero_scalar if dim == 2 else None, zeros, zero_jac, zeros, {})


def limit_field(domain, family: str = "zero", *, omega0: float = 0.0,
                gamma: float = 0.0) -> LimitField:
    """Build a limit field on an equilibrium support.

    On an interval only ``V = 0`` is divergence-free with no flux, so every
    family collapses to :func:`zero_field` in 1D.
    """
    if isinstance(domain, Interval) or getattr(domain, "dim", 2) == 1:
        return zero_field(domain, 1)
    if family == "zero":
        return zero_field(domain)
    if family in ("rigid_rotation", "elliptic_rotation", "rotation"):
        if domain.dim != 2:
            raise ValueError("rotation families are planar")
        axes = getattr(domain, "axes", None)
        if axes is None:
            axes = (domain.radius, domain.radius)
        return elliptic_rotation(axes, omega0, gamma)
    raise ValueError(f"unknown flow family {family!r}")


# -- solenoidal extension -----------------------------------------------------------

def _bump(u):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)


def _bump_d(u):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        safe = np.where(u > 0, u, 1.0)
        return np.where(u > 0, np.exp(-1.0 / safe) / safe**2, 0.0)


def smooth_cutoff(r, inner: float, outer: float):
    """C-infinity ``chi(r)``: 1 for ``r <= inner``, 0 for ``r >= outer``.

    Returns ``(chi, dchi/dr)``.
    """
    width = outer - inner
    u = (outer - np.asarray(r, dtype=float)) / width
    f, g = _bump(u), _bump(1.0 - u)
    den = f + g
    chi = f / den
    dchi_du = (_bump_d(u) * g + f * _bump_d(1.0 - u)) / den**2
    return chi, -dchi_du / width


@dataclass(frozen=True)
class ExtendedField:
    """``W = perp-grad(chi h)``: equals ``V`` on ``B(0, 3R/2)``, vanishes off ``B(0, 2R)``."""

    base: LimitField
    radius: float

    @property
    def dim(self):
        return 2

    def __call__(self, t, x):
        x = _as_points(x, 2)
        r = np.linalg.norm(x, axis=-1)
        chi, dchi = smooth_cutoff(r, 1.5 * self.radius, 2.0 * self.radius)
        h = self.base.streamfunction(t, x)
        v = self.base.velocity(t, x)
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(r > 0, dchi / np.where(r > 0, r, 1.0), 0.0)
        return chi[..., None] * v + (h * radial)[..., None] * _perp(x)

    def at(self, t):
        return lambda x: self(t, x)


def extend_divfree(field: LimitField, cutoff_radius: float | None = None):
    """Compactly supported divergence-free continuation of a planar field.

    ``field`` must carry a streamfunction. ``cutoff_radius`` ``R`` defaults to
    the largest semi-axis of the field's domain; the result agrees with the
    field on ``B(0, 3R/2)`` (which contains the domain) and is zero outside
    ``B(0, 2R)``. 1D fields are returned unchanged (they are zero).
    """
    if field.dim == 1:
        return field
    if field.streamfunction is None:
        raise ValueError("extension needs the field's streamfunction")
    if cutoff_radius is None:
        dom = field.domain
        cutoff_radius = max(dom.axes) if hasattr(dom, "axes") else dom.radius
    return ExtendedField(field, float(cutoff_radius))


# -- residual of the limit system -------------------------------------------------------

_STENCILS = {
    2: ([1], [1 / 2]),
    4: ([1, 2], [2 / 3, -1 / 12]),
    6: ([1, 2, 3], [3 / 4, -3 / 20, 1 / 60]),
    8: ([1, 2, 3, 4], [4 / 5, -1 / 5, 4 / 105, -1 / 280]),
}


def _central(f, x, h, axis, order):
    offsets, weights = _STENCILS[order]
    e = np.zeros(x.shape[-1])
    e[axis] = h
    return sum(w * (f(x + k * e) - f(x - k * e)) for k, w in zip(offsets, weights)) / h


def discrete_divergence(vfunc, x, h: float, order: int = 8):
    """Centered finite-difference divergence of ``vfunc`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    return sum(_central(lambda y: vfunc(y)[..., i], x, h, i, order) for i in range(x.shape[-1]))


class Residual(NamedTuple):
    value: float
    skipped: int


def limit_residual(field: LimitField, probes, gamma: float | None = None, *,
                   method: str = "auto", h: float = 1e-4) -> Residual:
    """``max |d_t V + (V . grad) V + grad p + gamma V|`` over probes inside the domain.

    ``probes`` is ``(t, x)`` with ``t`` of shape ``(n,)`` (or scalar) and ``x``
    of shape ``(n, dim)``. ``gamma`` defaults to the field's own friction.
    ``method="analytic"`` uses the closed-form derivatives, ``"fd"`` centered
    differences of step ``h`` (second order), ``"auto"`` the former when
    available. Probes outside the domain are skipped and counted.
    """
    t, x = probes
    x = _as_points(x, field.dim).reshape(-1, field.dim)
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:1])
    gamma = field.friction if gamma is None else float(gamma)
    inside = np.asarray(field.domain.contains(x), dtype=bool).reshape(-1)
    skipped = int((~inside).sum())
    x, t = x[inside], t[inside]
    if x.shape[0] == 0:
        return Residual(0.0, skipped)
    analytic = field.jacobian is not None and field.velocity_dt is not None \
        and field.pressure_gradient is not None
    if method == "analytic" and not analytic:
        raise ValueError("field has no closed-form derivatives")
    v = field.velocity(t, x)
    if method == "fd" or (method == "auto" and not analytic):
        dt = (field.velocity(t + h, x) - field.velocity(t - h, x)) / (2 * h)
        cols = []
        grad_p = np.empty_like(x)
        for j in range(field.dim):
            e = np.zeros(field.dim)
            e[j] = h
            cols.append((field.velocity(t, x + e) - field.velocity(t, x - e)) / (2 * h))
            grad_p[:, j] = (field.pressure(t, x + e) - field.pressure(t, x - e)) / (2 * h)
        jac = np.stack(cols, axis=-1)
    else:
        dt = field.velocity_dt(t, x)
        jac = field.jacobian(t, x)
        grad_p = field.pressure_gradient(t, x)
    res = dt + np.einsum("nij,nj->ni", jac, v) + grad_p + gamma * v
    return Residual(float(np.linalg.norm(res, axis=-1).max()), skipped)
