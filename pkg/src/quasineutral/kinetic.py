"""Particle-in-cell discretisation of the scaled Vlasov-Poisson(-Fokker-Planck) system.

Particles carry equal weights ``m / n_p``. Each step is a kick-drift-kick
Störmer-Verlet update in the total force

    a = -(1/eps) grad Phi_e(x) - (1/sqrt(eps)) grad Psi(x),

where ``Phi_e`` is the equilibrium confinement (evaluated in closed form)
and ``Psi`` solves ``Laplacian Psi = (n_e - rho) / sqrt(eps)`` in free space
on a node-centred grid. With ``theta > 0`` the velocities then take an
exact Ornstein-Uhlenbeck step.

Random numbers come from counter-based Philox streams keyed by
``(seed, purpose)`` with the counter set from ``(chunk, step)``. Particles are
processed in fixed-size chunks, so results do not depend on the number of
worker threads.
"""

from __future__ import annotations

import functools
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft
from scipy.special import ndtri
from scipy.stats import qmc

from .core import _as_points, cell_average_gamma, gamma
from .errors import ConfigurationError, ParticleOutOfBoxError, PreconditionError

__all__ = [
    "VP",
    "VPFP",
    "ParticleEnsemble",
    "FieldGrid",
    "SimConfig",
    "SimulationResult",
    "philox",
    "bump",
    "init_well_prepared",
    "deposit_density",
    "solve_fluctuation_potential",
    "gather",
    "acceleration",
    "push_particles",
    "fokker_planck_step",
    "time_step",
    "run",
]

VP = "vlasov-poisson"
VPFP = "vlasov-poisson-fokker-planck"

# Philox key purposes
_POSITIONS, _VELOCITIES, _NOISE, _SOBOL = 1, 2, 3, 4
_MASK64 = (1 << 64) - 1


def philox(seed: int, purpose: int, chunk: int = 0, step: int = 0) -> np.random.Generator:
    """Generator for one ``(seed, purpose, chunk, step)`` stream.

    Chunk and step occupy the high counter words; draws advance the low
    ones, so distinct streams never overlap.
    """
    bits = np.random.Philox(key=[int(seed) & _MASK64, purpose],
                            counter=[0, 0, int(chunk), int(step)])
    return np.random.Generator(bits)


# -- state ---------------------------------------------------------------------

@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    eps: float
    theta: float = 0.0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=float)
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must both have shape (n, dim)")
        if self.weights.shape != self.positions.shape[:1]:
            raise ValueError("one weight per particle")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def charge(self) -> float:
        return float(np.sum(self.weights))

    @property
    def momentum(self) -> np.ndarray:
        return self.weights @ self.velocities

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.positions.copy(), self.velocities.copy(),
                                self.weights.copy(), self.eps, self.theta)


class FieldGrid:
    """Node-centred grid ``lower + i h`` carrying ``rho``, ``n_e``, ``Psi`` and ``grad Psi``.

    ``n_e`` is stored as the hat-weighted average that CIC deposition
    would produce from the continuous density, rescaled to the exact mass,
    so the grid background is neutral against the particle charge.
    """

    def __init__(self, lower, h, shape):
        self.lower = np.asarray(lower, dtype=float)
        self.h = np.broadcast_to(np.asarray(h, dtype=float), self.lower.shape).copy()
        self.shape = tuple(int(s) for s in shape)
        if len(self.shape) != self.lower.size or min(self.shape) < 4:
            raise ValueError("grid needs at least 4 nodes per axis")
        self.rho = np.zeros(self.shape)
        self.n_e = np.zeros(self.shape)
        self.psi = np.zeros(self.shape)
        self.grad_psi = np.zeros((self.dim,) + self.shape)
        self._kernel_hat = None
        self._strides = np.array([int(np.prod(self.shape[k + 1:])) for k in range(self.dim)])

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def upper(self):
        return self.lower + self.h * (np.array(self.shape) - 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def axes(self):
        return [self.lower[k] + self.h[k] * np.arange(self.shape[k]) for k in range(self.dim)]

    def nodes(self) -> np.ndarray:
        """Node coordinates with shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    @classmethod
    def for_equilibrium(cls, eq, h=None, *, margin=None, fill=True, subsamples=8):
        """Box around ``K`` widened by ``margin`` (default: the diameter of ``K``)."""
        dom = eq.domain
        lo, hi = dom.bounding_box()
        diam = dom.diameter
        margin = diam if margin is None else float(margin)
        if margin < diam:
            raise ValueError("the margin around K must be at least its diameter")
        if h is None:
            h = diam / {1: 400, 2: 64, 3: 24}[eq.dim]
        h = float(h)
        if h <= 0:
            raise ValueError("grid spacing must be positive")
        lower = lo - margin
        shape = np.ceil((hi + margin - lower) / h).astype(int) + 1
        grid = cls(lower, h, shape)
        if fill:
            grid.fill_background(eq, subsamples)
        return grid

    def fill_background(self, eq, subsamples=8):
        """Hat-weighted averages of ``n_e`` on the nodes, summing to ``eq.mass``."""
        s = int(subsamples)
        # midpoints of 2s sub-cells spanning [-h, h], weighted by the hat
        u = (np.arange(2 * s) + 0.5) / s - 1.0
        hat = (1.0 - np.abs(u)) / s
        lo, hi = eq.domain.bounding_box()
        axes = self.axes()
        # only nodes within h of the bounding box of K can see mass
        sel = [np.nonzero((ax >= lo[k] - self.h[k]) & (ax <= hi[k] + self.h[k]))[0]
               for k, ax in enumerate(axes)]
        acc = np.zeros([len(ix) for ix in sel])
        sub = [axes[k][sel[k]] for k in range(self.dim)]
        for offs in itertools.product(range(2 * s), repeat=self.dim):
            pts = np.meshgrid(*[sub[k] + u[o] * self.h[k] for k, o in enumerate(offs)],
                              indexing="ij")
            x = np.stack(pts, axis=-1)
            w = np.prod([hat[o] for o in offs])
            acc += w * np.asarray(eq.n_e(x))
        total = acc.sum() * self.cell_volume
        if total <= 0:
            raise ConfigurationError("grid too coarse to resolve the support of n_e")
        self.n_e[:] = 0.0
        self.n_e[np.ix_(*sel)] = acc * (eq.mass / total)

    def kernel_hat(self):
        """Transform of the free-space Green's function on the doubled grid."""
        if self._kernel_hat is None:
            offs = []
            for k, n in enumerate(self.shape):
                i = np.arange(2 * n)
                offs.append(np.where(i <= n, i, i - 2 * n) * self.h[k])
            d = np.stack(np.meshgrid(*offs, indexing="ij"), axis=-1)
            origin = (0,) * self.dim
            d[origin] = 1.0  # placeholder, replaced by the cell average below
            g = gamma(d, self.dim)
            g[origin] = cell_average_gamma(self.h, self.dim)
            self._kernel_hat = sfft.rfftn(g)
        return self._kernel_hat

    def locate(self, x):
        """Base node index and fractional offset of each point; raises outside the box."""
        s = (x - self.lower) / self.h
        i0 = np.floor(s).astype(np.int64)
        bad = np.any((i0 < 0) | (i0 > np.array(self.shape) - 2), axis=1)
        if np.any(bad):
            raise ParticleOutOfBoxError(
                f"{int(bad.sum())} particle(s) left the box [{self.lower}, {self.upper}]")
        return i0, s - i0

    def cic(self, x):
        """Flat node indices and CIC weights, each of shape ``(n, 2**dim)``."""
        i0, f = self.locate(x)
        idx, w = [], []
        for corner in itertools.product((0, 1), repeat=self.dim):
            c = np.array(corner)
            idx.append((i0 + c) @ self._strides)
            w.append(np.prod(np.where(c == 1, f, 1.0 - f), axis=1))
        return np.stack(idx, axis=1), np.stack(w, axis=1)


# -- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Run parameters.

    ``dt_factor`` and ``cfl`` set ``dt = min(dt_factor sqrt(eps), cfl h / max|v|)``,
    then shrink it so that an integer number of steps reaches ``T``.
    ``init_sigma`` and ``init_delta`` default to ``sqrt(eps)`` and ``eps``.
    """

    eps: float
    theta: float = 0.0
    T: float = 1.0
    particles: int = 10_000
    seed: int = 0
    grid_spacing: float | None = None
    dt_factor: float = 0.05
    cfl: float = 0.25
    cadence: int = 10
    deposition_order: int = 1
    init_sigma: float | None = None
    init_delta: float | None = None
    bump_fraction: float = 0.5
    sampler: str = "sobol"
    jobs: int = 1
    chunk_size: int = 1 << 15
    mode: str | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("eps must be positive")
        if self.theta < 0:
            raise ConfigurationError("theta must be non-negative")
        if self.T < 0:
            raise ConfigurationError("T must be non-negative")
        if self.particles < 1:
            raise ConfigurationError("need at least one particle")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be a positive number of steps")
        if self.deposition_order != 1:
            raise ConfigurationError("only first-order (cloud-in-cell) deposition is implemented")
        if self.sampler not in ("sobol", "random"):
            raise ConfigurationError(f"unknown sampler {self.sampler!r}")
        if self.jobs < 1 or self.chunk_size < 1:
            raise ConfigurationError("jobs and chunk_size must be positive")
        if not 0 < self.bump_fraction <= 1:
            raise ConfigurationError("bump_fraction must lie in (0, 1]")
        expected = VPFP if self.theta > 0 else VP
        if self.mode is None:
            object.__setattr__(self, "mode", expected)
        elif self.mode != expected:
            raise ConfigurationError(f"mode {self.mode!r} is inconsistent with theta={self.theta}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.eps) if self.init_sigma is None else self.init_sigma

    @property
    def delta(self) -> float:
        return self.eps if self.init_delta is None else self.init_delta

    def with_(self, **kw) -> "SimConfig":
        kw.setdefault("mode", None)
        return replace(self, **kw)


# -- initial data --------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _unit_bump_lap_max(dim):
    """``max |Laplacian g(|y|^2)|`` over the unit ball, by dense sampling of ``q``."""
    q = np.linspace(0.0, 1.0, 200001)[:-1]
    g = np.exp(1.0 - 1.0 / (1.0 - q))
    lap = 4 * q * g * (2 * q - 1) / (1 - q) ** 4 - 2 * dim * g / (1 - q) ** 2
    return float(np.abs(lap).max())


def bump(x, center, radius):
    """Bump ``chi`` supported in ``B(center, radius)`` and its Laplacian.

    ``chi = c r^2 exp(1 - 1/(1-q))`` with ``q = |x-c|^2/r^2`` and ``c`` chosen so
    that ``sup |Laplacian chi| = 1``; then ``n_e - delta Laplacian chi`` stays
    nonnegative whenever ``delta`` is below the minimum of ``n_e`` on the bump.
    Returns ``(chi, Laplacian chi)``.
    """
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    scale = 1.0 / _unit_bump_lap_max(dim)
    y = (x - center) / radius
    q = np.sum(y * y, axis=-1)
    inside = q < 1.0
    qi = q[inside]
    g = np.zeros_like(q)
    g[inside] = np.exp(1.0 - 1.0 / (1.0 - qi))
    gi = g[inside]
    d1 = -gi / (1.0 - qi) ** 2
    d2 = gi * (2.0 * qi - 1.0) / (1.0 - qi) ** 4
    lap = np.zeros_like(q)
    lap[inside] = scale * (4.0 * qi * d2 + 2.0 * dim * d1)
    return scale * radius**2 * g, lap


def _domain_center(dom):
    lo, hi = dom.bounding_box()
    return 0.5 * (lo + hi)


def _proposals(cfg, dim, lo, hi, count, round_):
    """``count`` points in ``box x [0,1] x [0,1]^dim`` (position, acceptance, velocity quantile)."""
    if cfg.sampler == "sobol":
        seed = philox(cfg.seed, _SOBOL, 0, 0).integers(0, 2**63)
        eng = qmc.Sobol(2 * dim + 1, scramble=True, seed=np.random.default_rng(seed))
        if round_:
            eng.fast_forward(round_)
        u = eng.random(count)
    else:
        u = philox(cfg.seed, _POSITIONS, round_, 0).random((count, 2 * dim + 1))
    return lo + (hi - lo) * u[:, :dim], u[:, dim], u[:, dim + 1:]


def init_well_prepared(eq, cfg: SimConfig, flow=None) -> ParticleEnsemble:
    """Particles distributed as ``(n_e - delta Laplacian chi) x N(V_0, sigma^2)``.

    The bump ``chi`` is centred in ``K`` with radius ``bump_fraction`` times
    the inradius. Positions come from rejection sampling over the bounding
    box of ``K``; with the default ``sobol`` sampler the proposals form a
    scrambled low-discrepancy sequence (a quiet start). ``flow`` is the
    (extended) velocity field; ``None`` means zero mean velocity.
    """
    dom = eq.domain
    dim = eq.dim
    lo, hi = dom.bounding_box()
    center = _domain_center(dom)
    r0 = cfg.bump_fraction * dom.inradius
    delta = cfg.delta

    # envelope: the density maximum on a probe lattice plus the bump bound
    probe = np.stack(np.meshgrid(*[np.linspace(lo[k], hi[k], 257 if dim < 3 else 65)
                                   for k in range(dim)], indexing="ij"), -1).reshape(-1, dim)
    ne_probe = np.asarray(eq.n_e(probe), dtype=float)
    if not np.all(np.isfinite(ne_probe)):
        raise ConfigurationError("n_e is unbounded; rejection sampling needs a bounded density")
    env = float(ne_probe.max()) * 1.05 + abs(delta) * 1.001
    _, lap_probe = bump(probe, center, r0)
    dens_probe = ne_probe - delta * lap_probe
    if np.any(dens_probe[ne_probe > 0] < 0) or np.any(dens_probe < -1e-14):
        raise PreconditionError("n_e - delta Laplacian chi is negative somewhere; reduce delta")

    n = cfg.particles
    taken_x, taken_u, have, round_ = [], [], 0, 0
    batch = 1 << max(12, math.ceil(math.log2(4 * n)))  # Sobol balance wants powers of two
    proposed = 0
    while have < n:
        x, acc, uv = _proposals(cfg, dim, lo, hi, batch, round_ * batch)
        ne = np.asarray(eq.n_e(x), dtype=float)
        _, lap = bump(x, center, r0)
        dens = np.where(ne > 0, ne - delta * lap, 0.0)
        if np.any(dens > env):
            raise ConfigurationError("density exceeds the rejection envelope")
        keep = acc * env < dens
        proposed += batch
        taken_x.append(x[keep])
        taken_u.append(uv[keep])
        have += int(keep.sum())
        round_ += 1
        if proposed >= 100 * n and have < 0.01 * proposed:
            raise ConfigurationError(
                f"rejection efficiency {have / proposed:.2e} below 1%; the envelope is too loose")
    pos = np.concatenate(taken_x)[:n]
    uq = np.concatenate(taken_u)[:n]
    if cfg.sampler == "sobol":
        # quantiles in (0,1) are never exactly 0 or 1 for scrambled Sobol points
        xi = ndtri(np.clip(uq, 1e-300, 1 - 1e-16))
    else:
        xi = philox(cfg.seed, _VELOCITIES).standard_normal((n, dim))
    mean = np.zeros((n, dim)) if flow is None else np.asarray(flow(0.0, pos), dtype=float)
    vel = mean + cfg.sigma * xi
    w = np.full(n, eq.mass / n)
    return ParticleEnsemble(pos, vel, w, cfg.eps, cfg.theta)


# -- grid operations -----------------------------------------------------------

def _chunks(n, size):
    return [slice(a, min(a + size, n)) for a in range(0, n, size)]


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def deposit_density(ens: ParticleEnsemble, grid: FieldGrid, *, jobs: int = 1,
                    chunk_size: int = 1 << 15) -> np.ndarray:
    """Cloud-in-cell charge density on the nodes; stored in ``grid.rho``."""
    size = int(np.prod(grid.shape))

    def part(sl):
        idx, w = grid.cic(ens.positions[sl])
        return np.bincount(idx.ravel(), weights=(w * ens.weights[sl, None]).ravel(),
                           minlength=size)

    total = np.zeros(size)
    for piece in _map(part, _chunks(ens.n, chunk_size), jobs):
        total += piece  # fixed chunk order keeps the sum reproducible
    grid.rho = total.reshape(grid.shape) / grid.cell_volume
    return grid.rho


def solve_fluctuation_potential(grid: FieldGrid, eps: float, *, jobs: int = 1):
    """``Psi = Gamma * (rho - n_e) / sqrt(eps)`` and its centred-difference gradient.

    The convolution runs on the doubled grid (Hockney's method), which
    reproduces the free-space sum exactly on the original nodes.
    """
    q = (grid.rho - grid.n_e) / math.sqrt(eps)
    big = tuple(2 * n for n in grid.shape)
    qh = sfft.rfftn(q, s=big, workers=jobs)
    full = sfft.irfftn(qh * grid.kernel_hat(), s=big, workers=jobs)
    grid.psi = full[tuple(slice(0, n) for n in grid.shape)] * grid.cell_volume
    grads = np.gradient(grid.psi, *grid.h, edge_order=2)
    grid.grad_psi = np.stack(grads if grid.dim > 1 else [grads], axis=0)
    return grid.psi, grid.grad_psi


def gather(field_stack, grid: FieldGrid, x, *, jobs: int = 1, chunk_size: int = 1 << 15):
    """CIC interpolation of ``field_stack`` (shape ``(c,) + grid.shape``) to points ``x``."""
    x = _as_points(x, grid.dim)
    flat = field_stack.reshape(field_stack.shape[0], -1)

    def part(sl):
        idx, w = grid.cic(x[sl])
        return np.einsum("cnk,nk->nc", flat[:, idx], w)

    pieces = _map(part, _chunks(x.shape[0], chunk_size), jobs)
    return np.concatenate(pieces, axis=0) if pieces else np.zeros((0, flat.shape[0]))


def acceleration(ens: ParticleEnsemble, grid: FieldGrid, eq, *, jobs: int = 1,
                 chunk_size: int = 1 << 15):
    conf = np.asarray(eq.grad_phi_e(ens.positions)).reshape(ens.n, ens.dim)
    fluct = gather(grid.grad_psi, grid, ens.positions, jobs=jobs, chunk_size=chunk_size)
    return -conf / ens.eps - fluct / math.sqrt(ens.eps)


def _refresh(ens, grid, jobs, chunk_size):
    deposit_density(ens, grid, jobs=jobs, chunk_size=chunk_size)
    solve_fluctuation_potential(grid, ens.eps, jobs=jobs)


def push_particles(ens: ParticleEnsemble, grid: FieldGrid, eq, dt: float, *,
                   jobs: int = 1, chunk_size: int = 1 << 15, accel=None):
    """One kick-drift-kick step. ``grid`` must hold the fields of the current positions.

    Returns the acceleration at the new positions, which the next step
    can reuse as ``accel``.
    """
    a = acceleration(ens, grid, eq, jobs=jobs, chunk_size=chunk_size) if accel is None else accel
    ens.velocities += 0.5 * dt * a
    ens.positions += dt * ens.velocities
    _refresh(ens, grid, jobs, chunk_size)
    a = acceleration(ens, grid, eq, jobs=jobs, chunk_size=chunk_size)
    ens.velocities += 0.5 * dt * a
    return a


def fokker_planck_step(ens: ParticleEnsemble, dt: float, seed: int, step: int, *,
                       chunk_size: int = 1 << 15):
    """Exact Ornstein-Uhlenbeck update ``v e^{-dt} + sqrt(theta (1 - e^{-2dt})) xi``."""
    if ens.theta == 0:
        return
    decay = math.exp(-dt)
    amp = math.sqrt(ens.theta * -math.expm1(-2 * dt))
    for c, sl in enumerate(_chunks(ens.n, chunk_size)):
        xi = philox(seed, _NOISE, c, step).standard_normal((sl.stop - sl.start, ens.dim))
        ens.velocities[sl] = decay * ens.velocities[sl] + amp * xi


def time_step(cfg: SimConfig, grid: FieldGrid, ens: ParticleEnsemble):
    """``(dt, steps)``: the stability bound, shrunk to land exactly on ``T``."""
    dt = cfg.dt_factor * math.sqrt(cfg.eps)
    vmax = float(np.abs(ens.velocities).max()) if ens.n else 0.0
    if vmax > 0:
        dt = min(dt, cfg.cfl * float(grid.h.min()) / vmax)
    if cfg.T == 0:
        return dt, 0
    steps = max(1, math.ceil(cfg.T / dt - 1e-9))
    return cfg.T / steps, steps


# -- driver --------------------------------------------------------------------

@dataclass
class SimulationResult:
    series: object
    ensemble: ParticleEnsemble
    grid: FieldGrid
    dt: float
    steps: int
    snapshots: list = field(default_factory=list)


def run(cfg: SimConfig, eq, flow=None, *, test_fields=(), ensemble=None, grid=None,
        snapshot_every: int | None = None, callback=None) -> SimulationResult:
    """Evolve well-prepared data up to ``cfg.T`` and record diagnostics.

    ``flow`` is the limit field (``fluid.LimitField``); its divergence-free
    extension supplies both the initial mean velocity and the modulating
    velocity in the diagnostics. A diagnostics row is written at ``t = 0``,
    every ``cfg.cadence`` steps and at ``T``. ``snapshot_every`` stores
    copies of the ensemble at that step cadence; ``callback(step, t, ens,
    grid)`` runs after each step.
    """
    from .diagnostics import DiagnosticSeries, Recorder
    from .fluid import extend_divfree, zero_field

    if flow is None:
        flow = zero_field(eq.domain, eq.dim)
    ext = extend_divfree(flow)
    grid = FieldGrid.for_equilibrium(eq, cfg.grid_spacing) if grid is None else grid
    ens = init_well_prepared(eq, cfg, ext) if ensemble is None else ensemble
    ens.theta = cfg.theta
    jobs, chunk = cfg.jobs, cfg.chunk_size
    _refresh(ens, grid, jobs, chunk)
    dt, steps = time_step(cfg, grid, ens)

    rec = Recorder(eq, ext, theta=cfg.theta, test_fields=test_fields)
    series = DiagnosticSeries()
    series.append(rec.row(0.0, ens, grid))
    snaps = []
    if snapshot_every:
        snaps.append((0.0, ens.copy()))
    accel = None
    for k in range(1, steps + 1):
        accel = push_particles(ens, grid, eq, dt, jobs=jobs, chunk_size=chunk, accel=accel)
        if cfg.theta > 0:
            fokker_planck_step(ens, dt, cfg.seed, k, chunk_size=chunk)
        t = k * dt
        if k % cfg.cadence == 0 or k == steps:
            series.append(rec.row(t, ens, grid))
        if snapshot_every and (k % snapshot_every == 0 or k == steps):
            snaps.append((t, ens.copy()))
        if callback is not None:
            callback(k, t, ens, grid)
    return SimulationResult(series, ens, grid, dt, steps, snaps)
