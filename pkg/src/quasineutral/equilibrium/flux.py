"""Boundary-layer control of the confinement potential."""

from __future__ import annotations

import numpy as np

from ..core import _as_points

__all__ = ["boundary_flux_bound"]


def boundary_flux_bound(eq, velocity, samples) -> float:
    """``sup |V . grad Phi_e| / Phi_e`` over the samples lying outside ``K``.

    For a field tangent to the boundary the ratio stays bounded as the
    samples approach ``K``. Samples where ``Phi_e`` vanishes are skipped,
    since both numerator and denominator are zero there.
    """
    x = _as_points(samples, eq.dim).reshape(-1, eq.dim)
    val, grad = eq.phi_e_and_grad(x)
    val = np.atleast_1d(val)
    grad = grad.reshape(x.shape)
    keep = val > 0
    if not np.any(keep):
        return 0.0
    v = np.asarray(velocity(x[keep]), dtype=float).reshape(-1, eq.dim)
    ratio = np.abs(np.sum(v * grad[keep], axis=-1)) / val[keep]
    return float(ratio.max())
