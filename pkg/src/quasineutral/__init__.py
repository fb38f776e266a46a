"""Quasi-neutral limit of confined non-neutral plasmas.

Subpackages and modules:

``equilibrium``
    equilibrium densities, supports and confinement potentials
``fluid``
    limit velocity fields and their divergence-free extensions
``kinetic``
    particle-in-cell solver for the scaled Vlasov-Poisson(-Fokker-Planck) system
``diagnostics``
    modulated energies, distances and budgets computed from simulation state
``cli``
    the ``quasineutral`` command
"""

from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0+unknown"

from . import diagnostics, equilibrium, fluid, kinetic  # noqa: E402
from .equilibrium import (solve, solve_convex_1d, solve_isotropic, solve_quadratic,  # noqa: E402
                          solve_radial)
from .kinetic import SimConfig, run  # noqa: E402

__all__ = ["__version__", "diagnostics", "equilibrium", "fluid", "kinetic", "solve",
           "solve_isotropic", "solve_quadratic", "solve_radial", "solve_convex_1d",
           "SimConfig", "run"]
