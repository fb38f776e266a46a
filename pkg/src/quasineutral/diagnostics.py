"""Convergence functionals computed from particle and grid state.

All energies are reductions over the particle arrays or the grid in a
fixed order, so they are reproducible run to run. The entropy term is a
plug-in histogram estimate and is biased; columns derived from it are
approximations.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .core import ball_volume

__all__ = [
    "DiagnosticSeries",
    "EnergyParts",
    "GronwallResult",
    "Recorder",
    "modulated_energy",
    "fluctuation_energy",
    "entropy_estimate",
    "partition_function",
    "modulated_entropy_fp",
    "energy_budget",
    "density_distance",
    "current_pairings",
    "default_test_fields",
    "gronwall_check",
    "fit_gronwall_rate",
    "gronwall_tolerance",
]

_BATCHES = 10


# -- energies ------------------------------------------------------------------

class EnergyParts(NamedTuple):
    kinetic: float      # 1/2 sum w |v - V(x)|^2
    fluctuation: float  # 1/2 ||grad Psi||^2 on the grid
    confinement: float  # (1/eps) sum w Phi_e(x)

    @property
    def total(self) -> float:
        return self.kinetic + self.fluctuation + self.confinement


def fluctuation_energy(grid) -> float:
    return 0.5 * float(np.sum(grid.grad_psi**2)) * grid.cell_volume


def _confinement(ens, eq) -> float:
    if ens.n == 0:
        return 0.0
    phi = np.asarray(eq.phi_e(ens.positions)).reshape(ens.n)
    return float(ens.weights @ phi) / ens.eps


def _mean_velocity(V, ens, t):
    if V is None:
        return 0.0
    return np.asarray(V(t, ens.positions), dtype=float).reshape(ens.n, ens.dim)


def modulated_energy(ens, grid, eq, V=None, t: float = 0.0) -> EnergyParts:
    """The three nonnegative parts of the modulated energy at time ``t``.

    ``V(t, x)`` should be defined on all of space, for instance the output
    of ``fluid.extend_divfree``; ``None`` modulates by zero.
    """
    rel = ens.velocities - _mean_velocity(V, ens, t)
    kin = 0.5 * float(ens.weights @ np.sum(rel * rel, axis=1)) if ens.n else 0.0
    return EnergyParts(kin, fluctuation_energy(grid), _confinement(ens, eq))


def entropy_estimate(positions, velocities, weights, *, edges=None):
    """Histogram estimate of ``iint f ln f`` for the empirical phase-space density.

    Uses ``ceil(n^(1/(2d)))`` bins per axis over the data range, ``d`` the
    phase-space dimension. Returns ``(value, edges)`` so that sub-samples
    can reuse the same bins.
    """
    z = np.concatenate([positions, velocities], axis=1)
    n, d = z.shape
    if n == 0:
        return 0.0, edges
    if edges is None:
        bins = max(1, math.ceil(n ** (1.0 / (2 * d))))
        lo, hi = z.min(axis=0), z.max(axis=0)
        pad = 1e-9 * np.maximum(hi - lo, 1.0)
        edges = [np.linspace(lo[k] - pad[k], hi[k] + pad[k], bins + 1) for k in range(d)]
    mass, _ = np.histogramdd(z, bins=edges, weights=weights)
    vol = np.prod(np.meshgrid(*[np.diff(e) for e in edges], indexing="ij"), axis=0)
    occ = mass > 0
    return float(np.sum(mass[occ] * np.log(mass[occ] / vol[occ]))), edges


def partition_function(eq, eps: float, theta: float) -> float:
    """``Z = int exp(-Phi_e / (eps theta)) dx`` over all of space."""
    if theta <= 0:
        raise ValueError("the partition function needs theta > 0")
    beta = 1.0 / (eps * theta)
    dim = eq.dim
    kind = eq.kind
    if kind in ("isotropic", "radial"):
        R = eq.radius
        sphere = dim * ball_volume(dim)
        unit = np.zeros(dim)
        unit[0] = 1.0

        def tail(r):
            return r ** (dim - 1) * math.exp(-beta * float(eq.phi_e(r * unit)))

        width = math.sqrt(1.0 / beta)
        out = integrate.quad(tail, R, R + 60 * width + R, limit=200,
                             epsabs=0, epsrel=1e-11)[0]
        return ball_volume(dim) * R**dim + sphere * out
    if kind == "convex1d":
        width = math.sqrt(1.0 / beta)

        def f(x):
            return math.exp(-beta * float(eq.phi_e(np.array([x]))))

        span = 60 * width + (eq.hi - eq.lo)
        right = integrate.quad(f, eq.hi, eq.hi + span, limit=200, epsabs=0, epsrel=1e-11)[0]
        left = integrate.quad(f, eq.lo - span, eq.lo, limit=200, epsabs=0, epsrel=1e-11)[0]
        return (eq.hi - eq.lo) + left + right
    # general support: tensor trapezoid rule on a box where the integrand is negligible
    lo, hi = eq.domain.bounding_box()
    pad = 0.1 * eq.domain.diameter
    while True:
        probe = np.diag(hi + pad)
        if np.all(beta * np.asarray(eq.phi_e(probe)) > 40):
            break
        pad *= 1.5
    n = {1: 4001, 2: 801, 3: 161}[dim]
    axes = [np.linspace(lo[k] - pad, hi[k] + pad, n) for k in range(dim)]
    x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.exp(-beta * np.asarray(eq.phi_e(x)))
    for k in reversed(range(dim)):
        vals = integrate.trapezoid(vals, axes[k], axis=-1)
    return float(vals)


def modulated_entropy_fp(ens, grid, eq, V=None, t: float = 0.0, *, Z=None,
                         entropy=None) -> float:
    """Modulated free energy relative to ``N_eps M_{V,theta}``.

    ``H + theta iint f ln f + (N m theta / 2) ln(2 pi theta) - theta m ln(m / Z)``,
    with the entropy integral from the histogram estimator.
    """
    theta = ens.theta
    if theta <= 0:
        raise ValueError("the Fokker-Planck modulated functional needs theta > 0")
    Z = partition_function(eq, ens.eps, theta) if Z is None else Z
    S = entropy_estimate(ens.positions, ens.velocities, ens.weights)[0] if entropy is None \
        else entropy
    m = ens.charge
    H = modulated_energy(ens, grid, eq, V, t).total
    return (H + theta * S + 0.5 * ens.dim * m * theta * math.log(2 * math.pi * theta)
            - theta * m * math.log(m / Z))


def energy_budget(ens, grid, eq):
    """``(E, F)``: the conserved energy and, when ``theta > 0``, the free energy ``E + theta S``."""
    if ens.n == 0:
        return 0.0, (0.0 if ens.theta > 0 else None)
    kin = 0.5 * float(ens.weights @ np.sum(ens.velocities**2, axis=1))
    E = kin + _confinement(ens, eq) + fluctuation_energy(grid)
    if ens.theta <= 0:
        return E, None
    S = entropy_estimate(ens.positions, ens.velocities, ens.weights)[0]
    return E, E + ens.theta * S


def density_distance(grid, eps: float):
    """``(L1, H^-1)`` distances between the deposited density and ``n_e``."""
    l1 = float(np.sum(np.abs(grid.rho - grid.n_e))) * grid.cell_volume
    return l1, math.sqrt(eps * float(np.sum(grid.grad_psi**2)) * grid.cell_volume)


def default_test_fields(dim: int, scale: float = 1.0):
    """Gaussian-weighted coordinate fields ``e_k exp(-|x|^2 / (2 s^2))`` and, in 2D,
    a rotational one. Smooth and negligible beyond a few ``s``."""

    def make(k):
        def theta(x):
            w = np.exp(-0.5 * np.sum(x * x, axis=-1) / scale**2)
            out = np.zeros(x.shape)
            out[..., k] = w
            return out
        return theta

    fields = [make(k) for k in range(dim)]
    if dim == 2:
        def swirl(x):
            w = np.exp(-0.5 * np.sum(x * x, axis=-1) / scale**2)
            return np.stack([-x[..., 1] * w, x[..., 0] * w], axis=-1)
        fields.append(swirl)
    return fields


def current_pairings(ens, grid, test_fields, V=None, t: float = 0.0):
    """``int (J - n_e V) . Theta`` for each test field ``Theta(x)``.

    The current ``J`` is a particle sum; ``n_e V`` is integrated on the
    grid nodes.
    """
    nodes = grid.nodes()
    ne = grid.n_e
    mask = ne > 0
    xin = nodes[mask]
    Vn = np.zeros_like(xin) if V is None else np.asarray(V(t, xin), dtype=float)
    out = []
    for th in test_fields:
        part = float(ens.weights @ np.sum(ens.velocities * th(ens.positions), axis=1)) \
            if ens.n else 0.0
        fluid = float(np.sum(ne[mask] * np.sum(Vn * th(xin), axis=-1))) * grid.cell_volume
        out.append(part - fluid)
    return out


# -- Grönwall trend ------------------------------------------------------------

class GronwallResult(NamedTuple):
    passed: bool
    margin: float   # max of H(t) - e^{Ct}(H(0) + tol); <= 0 when the bound holds
    tol: float
    rate: float


def gronwall_tolerance(H0: float, n_particles: int) -> float:
    """Monte-Carlo floor ``max(3 H(0) / sqrt(n_p), 1e-6)``."""
    return max(3.0 * H0 / math.sqrt(n_particles), 1e-6) if n_particles else 1e-6


def gronwall_check(series, C: float, *, tol=None, n_particles=None) -> GronwallResult:
    """Test ``H(t) <= e^{Ct} (H(0) + tol)`` on every row of ``series``."""
    t = np.asarray(series["t"])
    H = np.asarray(series["H_mod"])
    if tol is None:
        tol = gronwall_tolerance(H[0], n_particles) if n_particles else 0.0
    bound = np.exp(C * (t - t[0])) * (H[0] + tol)
    margin = float(np.max(H - bound))
    return GronwallResult(margin <= 0, margin, tol, C)


def fit_gronwall_rate(series, *, tol=None, n_particles=None) -> float:
    """Smallest ``C >= 0`` for which ``gronwall_check`` passes."""
    t = np.asarray(series["t"])
    H = np.asarray(series["H_mod"])
    if tol is None:
        tol = gronwall_tolerance(H[0], n_particles) if n_particles else 0.0
    ref = H[0] + tol
    dt = t - t[0]
    later = dt > 0
    if ref <= 0:
        return 0.0 if np.all(H[later] <= 0) else math.inf
    rates = np.log(np.maximum(H[later], 1e-300) / ref) / dt[later]
    return float(max(0.0, rates.max())) if rates.size else 0.0


# -- series --------------------------------------------------------------------

@dataclass
class DiagnosticSeries:
    """Rows of named float columns with a lossless CSV form."""

    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def append(self, row: dict):
        if not self.columns:
            self.columns = list(row)
        elif list(row) != self.columns:
            raise ValueError("row keys differ from the series columns")
        self.rows.append([float(row[c]) for c in self.columns])

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, name):
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def last(self) -> dict:
        return dict(zip(self.columns, self.rows[-1]))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(v) for v in r])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "DiagnosticSeries":
        """Parse CSV text or a path to a CSV file."""
        if "\n" not in str(source):
            with open(source, newline="") as fh:
                source = fh.read()
        reader = csv.reader(io.StringIO(source))
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV") from None
        rows = []
        for line in reader:
            if len(line) != len(header):
                raise ValueError("ragged CSV row")
            rows.append([float(v) for v in line])
        return cls(header, rows)


class Recorder:
    """Builds one diagnostics row per call, caching ``Z`` and the test fields."""

    def __init__(self, eq, V=None, *, theta: float = 0.0, test_fields=(), batches=_BATCHES):
        self.eq = eq
        self.V = V
        self.theta = theta
        self.test_fields = list(test_fields)
        self.batches = batches
        self._Z = None

    def row(self, t, ens, grid) -> dict:
        eq = self.eq
        parts = modulated_energy(ens, grid, eq, self.V, t)
        e_kin = 0.5 * float(ens.weights @ np.sum(ens.velocities**2, axis=1))
        energy = e_kin + parts.confinement + parts.fluctuation
        l1, hm1 = density_distance(grid, ens.eps)
        row = {
            "t": t,
            "E_kin": e_kin,
            "E_phi_e": parts.confinement,
            "E_fluct": parts.fluctuation,
            "K_mod": parts.kinetic,
            "H_mod": parts.total,
            "energy": energy,
        }
        if self.theta > 0:
            if self._Z is None:
                self._Z = partition_function(eq, ens.eps, self.theta)
            S, edges = entropy_estimate(ens.positions, ens.velocities, ens.weights)
            row["entropy_estimate"] = S
            row["H_fp"] = modulated_entropy_fp(ens, grid, eq, self.V, t, Z=self._Z, entropy=S)
            row["free_energy"] = energy + self.theta * S
            row["free_energy_std"] = self._free_energy_std(ens, eq, edges, parts.fluctuation)
        row["charge"] = ens.charge
        for k, p in enumerate(ens.momentum):
            row[f"momentum_{k + 1}"] = p
        row["dist_L1"] = l1
        row["dist_Hminus1"] = hm1
        for k, p in enumerate(current_pairings(ens, grid, self.test_fields, self.V, t)):
            row[f"pairing_{k + 1}"] = p
        return row

    def _free_energy_std(self, ens, eq, edges, fluct):
        """Standard error of the free energy from interleaved particle batches."""
        B = self.batches
        if ens.n < 2 * B:
            return 0.0
        phi = np.asarray(eq.phi_e(ens.positions)).reshape(ens.n)
        vals = []
        for b in range(B):
            sl = slice(b, None, B)
            w = ens.weights[sl] * (ens.n / len(ens.weights[sl]))
            kin = 0.5 * float(w @ np.sum(ens.velocities[sl] ** 2, axis=1))
            S = entropy_estimate(ens.positions[sl], ens.velocities[sl], w, edges=edges)[0]
            vals.append(kin + float(w @ phi[sl]) / ens.eps + fluct + self.theta * S)
        return float(np.std(vals, ddof=1) / math.sqrt(B))
