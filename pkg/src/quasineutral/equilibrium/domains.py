"""Supports of equilibrium densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import _as_points

__all__ = ["Ball", "EllipsoidDomain", "Interval", "RadialSupport"]


@dataclass(frozen=True)
class Ball:
    radius: float
    dim: int

    def contains(self, x):
        return np.linalg.norm(_as_points(x, self.dim), axis=-1) <= self.radius

    def bounding_box(self):
        r = np.full(self.dim, self.radius)
        return -r, r

    @property
    def inradius(self):
        return self.radius

    @property
    def diameter(self):
        return 2 * self.radius

    def params(self):
        return {"type": "ball", "radius": self.radius}


@dataclass(frozen=True)
class EllipsoidDomain:
    axes: tuple

    @property
    def dim(self):
        return len(self.axes)

    def contains(self, x):
        # same set as sigma_a(x) <= 0, without the root solve
        x = _as_points(x, self.dim)
        return np.sum((x / np.asarray(self.axes)) ** 2, axis=-1) <= 1.0

    def bounding_box(self):
        a = np.asarray(self.axes)
        return -a, a

    @property
    def inradius(self):
        return min(self.axes)

    @property
    def diameter(self):
        return 2 * max(self.axes)

    def params(self):
        return {"type": "ellipsoid", "axes": list(self.axes)}


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    dim: int = 1

    def contains(self, x):
        x = _as_points(x, 1)[..., 0]
        return (x >= self.lo) & (x <= self.hi)

    def bounding_box(self):
        return np.array([self.lo]), np.array([self.hi])

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def inradius(self):
        return 0.5 * (self.hi - self.lo)

    @property
    def diameter(self):
        return self.hi - self.lo

    def params(self):
        return {"type": "interval", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class RadialSupport:
    """Ball ``B(0, radius)`` on which the density lives, possibly with a hole
    of radius ``r_min`` where it vanishes."""

    r_min: float
    radius: float
    dim: int

    def contains(self, x):
        return np.linalg.norm(_as_points(x, self.dim), axis=-1) <= self.radius

    def bounding_box(self):
        r = np.full(self.dim, self.radius)
        return -r, r

    @property
    def inradius(self):
        return self.radius

    @property
    def diameter(self):
        return 2 * self.radius

    def params(self):
        return {"type": "radial", "r_min": self.r_min, "radius": self.radius}
