"""CSV dumps of particle ensembles and field grids.

Floats are written with ``repr`` so files read back bit-for-bit.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .kinetic import FieldGrid, ParticleEnsemble

__all__ = ["particle_header", "grid_header", "write_particles", "read_particles",
           "write_grid", "write_profile"]

_AXES = "xyz"


def particle_header(dim):
    return [f"x{k + 1}" for k in range(dim)] + [f"v{k + 1}" for k in range(dim)] + ["w"]


def grid_header(dim):
    return ["ijk"[k] for k in range(dim)] + ["rho", "psi"] + [f"gpsi_{_AXES[k]}" for k in range(dim)]


def _write(path, header, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([repr(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def write_particles(path, ens: ParticleEnsemble):
    cols = [ens.positions[:, k].tolist() for k in range(ens.dim)]
    cols += [ens.velocities[:, k].tolist() for k in range(ens.dim)]
    cols.append(ens.weights.tolist())
    return _write(path, particle_header(ens.dim), cols)


def read_particles(path, eps: float, theta: float = 0.0) -> ParticleEnsemble:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    dim = (data.shape[1] - 1) // 2
    return ParticleEnsemble(data[:, :dim], data[:, dim:2 * dim], data[:, -1], eps, theta)


def write_grid(path, grid: FieldGrid):
    idx = np.indices(grid.shape).reshape(grid.dim, -1)
    cols = [idx[k].tolist() for k in range(grid.dim)]
    cols += [grid.rho.ravel().tolist(), grid.psi.ravel().tolist()]
    cols += [grid.grad_psi[k].ravel().tolist() for k in range(grid.dim)]
    return _write(path, grid_header(grid.dim), cols)


def write_profile(path, eq, points: int = 401, extent: float | None = None):
    """``coord,n_e,phi_e,grad_phi_e_norm`` along the first axis through the origin."""
    lo, hi = eq.domain.bounding_box()
    extent = 2.0 * float(max(np.abs(lo).max(), np.abs(hi).max())) if extent is None else extent
    s = np.linspace(-extent, extent, points)
    x = np.zeros((points, eq.dim))
    x[:, 0] = s
    ne = np.asarray(eq.n_e(x), dtype=float).reshape(points)
    phi = np.asarray(eq.phi_e(x), dtype=float).reshape(points)
    grad = np.linalg.norm(np.asarray(eq.grad_phi_e(x)).reshape(points, eq.dim), axis=-1)
    return _write(path, ["coord", "n_e", "phi_e", "grad_phi_e_norm"],
                  [s.tolist(), ne.tolist(), phi.tolist(), grad.tolist()])
