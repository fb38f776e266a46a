"""External confining potentials.

Four families are supported, each a small immutable object exposing
``value``, ``gradient`` and ``laplacian`` on point arrays of shape
``(..., dim)`` (1D accepts plain arrays of abscissae too).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from ..core import _as_points, check_dim

__all__ = ["Potential", "Isotropic", "QuadraticAniso", "RadialProfile", "Convex1D"]


class Potential:
    dim: int
    kind: str = "abstract"

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def laplacian(self, x):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Isotropic(Potential):
    """``|x|^2 / (2 dim)``; its Laplacian is 1, so the equilibrium density is 1."""

    dim: int
    kind = "isotropic"

    def __post_init__(self):
        check_dim(self.dim)

    def value(self, x):
        x = _as_points(x, self.dim)
        return np.sum(x**2, axis=-1) / (2 * self.dim)

    def gradient(self, x):
        return _as_points(x, self.dim) / self.dim

    def laplacian(self, x):
        x = _as_points(x, self.dim)
        return np.ones(x.shape[:-1])

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True)
class QuadraticAniso(Potential):
    """``sum_j x_j^2 / (2 lambda_j^2)``."""

    lam: tuple
    kind = "quadratic"

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(self.lam))
        check_dim(len(lam))
        if not all(v > 0 and math.isfinite(v) for v in lam):
            raise ValueError("lambda_j must be positive and finite")
        object.__setattr__(self, "lam", lam)

    @property
    def dim(self):
        return len(self.lam)

    @property
    def inv_sq(self) -> np.ndarray:
        return np.asarray(self.lam) ** -2.0

    def value(self, x):
        x = _as_points(x, self.dim)
        return 0.5 * np.sum(x**2 * self.inv_sq, axis=-1)

    def gradient(self, x):
        return _as_points(x, self.dim) * self.inv_sq

    def laplacian(self, x):
        x = _as_points(x, self.dim)
        return np.full(x.shape[:-1], self.inv_sq.sum())

    def describe(self):
        return {"kind": self.kind, "lambda": list(self.lam)}


def _radial_call(f, r):
    return np.asarray(f(np.asarray(r, dtype=float)), dtype=float) + 0.0 * r


@dataclass(frozen=True)
class RadialProfile(Potential):
    """``phi(|x|)`` with ``phi'`` continuous, nondecreasing and ``phi'(0) >= 0``.

    ``phi``, ``dphi`` and ``d2phi`` are vectorised callables of the radius.
    ``d2phi`` may be piecewise (it is only evaluated, never differentiated).
    """

    phi: Callable
    dphi: Callable
    d2phi: Callable
    dim: int
    label: str = "custom"
    params: dict = field(default_factory=dict)
    kind = "radial"

    def __post_init__(self):
        check_dim(self.dim)

    @classmethod
    def power(cls, dim: int, coefficient: float = 1.0, exponent: float = 2.0):
        """``c r^p`` with ``c > 0`` and ``p >= 1``."""
        c, p = float(coefficient), float(exponent)
        if c <= 0 or p < 1:
            raise ValueError("power profile needs coefficient > 0 and exponent >= 1")

        def d2(r):
            if p == 1:
                return np.zeros_like(r)
            with np.errstate(divide="ignore"):
                return c * p * (p - 1) * r ** (p - 2)

        return cls(lambda r: c * r**p, lambda r: c * p * r ** (p - 1), d2, dim,
                   "power", {"coefficient": c, "exponent": p})

    @classmethod
    def shifted_quadratic(cls, dim: int, coefficient: float = 1.0, shift: float = 0.5):
        """``(c/2) max(r - r0, 0)^2``: flat up to ``r0``, so the support is an annulus."""
        c, r0 = float(coefficient), float(shift)
        if c <= 0 or r0 < 0:
            raise ValueError("shifted quadratic needs coefficient > 0 and shift >= 0")
        return cls(lambda r: 0.5 * c * np.maximum(r - r0, 0.0) ** 2,
                   lambda r: c * np.maximum(r - r0, 0.0),
                   lambda r: np.where(r > r0, c, 0.0), dim,
                   "shifted_quadratic", {"coefficient": c, "shift": r0})

    def radial_laplacian(self, r):
        """``phi''(r) + (dim - 1) phi'(r) / r``; the limit ``dim phi''(0)`` at
        the origin when ``phi'(0) = 0`` and ``+inf`` otherwise."""
        r = np.asarray(r, dtype=float)
        d1 = _radial_call(self.dphi, r)
        d2 = _radial_call(self.d2phi, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = d2 + (self.dim - 1) * d1 / r
        at0 = r == 0
        if np.any(at0):
            lim = np.where(d1 > 0, np.inf, self.dim * d2) if self.dim > 1 else d2
            out = np.where(at0, lim, out)
        return out

    def value(self, x):
        r = np.linalg.norm(_as_points(x, self.dim), axis=-1)
        return _radial_call(self.phi, r)

    def gradient(self, x):
        x = _as_points(x, self.dim)
        r = np.linalg.norm(x, axis=-1)
        d1 = _radial_call(self.dphi, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(r > 0, d1 / r, 0.0)
        return coef[..., None] * x

    def laplacian(self, x):
        r = np.linalg.norm(_as_points(x, self.dim), axis=-1)
        return self.radial_laplacian(r)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "profile": self.label, **self.params}


@dataclass(frozen=True)
class Convex1D(Potential):
    """Convex potential on the line given by ``Phi``, ``Phi'`` and ``Phi''``."""

    phi: Callable
    dphi: Callable
    d2phi: Callable
    label: str = "custom"
    params: dict = field(default_factory=dict)
    kind = "convex1d"
    dim = 1

    @classmethod
    def polynomial(cls, coefficients):
        """``sum_k c_k x^k`` (coefficients in increasing degree).

        The second derivative must be nonnegative everywhere; it has even
        degree, so checking it at the real critical points suffices.
        """
        poly = Polynomial(np.asarray(coefficients, dtype=float))
        d1, d2 = poly.deriv(1), poly.deriv(2)
        if poly.degree() < 2 or poly.degree() % 2:
            raise ValueError("a confining polynomial potential has even degree >= 2")
        if d2.coef[-1] <= 0:
            raise ValueError("leading coefficient must be positive")
        d3 = d2.deriv()
        probes = [r.real for r in d3.roots() if abs(r.imag) < 1e-9] if d3.degree() > 0 else []
        if any(d2(p) < 0 for p in probes) or d2(0.0) < 0:
            raise ValueError("polynomial potential is not convex")
        return cls(poly, d1, d2, "polynomial", {"coefficients": [float(c) for c in poly.coef]})

    def value(self, x):
        x = _as_points(x, 1)[..., 0]
        return _radial_call(self.phi, x)

    def gradient(self, x):
        x = _as_points(x, 1)
        return _radial_call(self.dphi, x[..., 0])[..., None]

    def laplacian(self, x):
        x = _as_points(x, 1)[..., 0]
        return _radial_call(self.d2phi, x)

    def describe(self):
        return {"kind": self.kind, "profile": self.label, **self.params}
