"""Quasi-neutral equilibria: density, support and confinement potential."""

from .domains import Ball, EllipsoidDomain, Interval, RadialSupport
from .ellipsoid import (ZInverseError, ellipsoid_newtonian_gradient,
                        ellipsoid_newtonian_potential, z_inverse, z_jacobian, z_map, zeta)
from .flux import boundary_flux_bound
from .potentials import Convex1D, Isotropic, Potential, QuadraticAniso, RadialProfile
from .solutions import (ConvexEquilibrium1D, Equilibrium, IsotropicEquilibrium,
                        QuadraticEquilibrium, RadialEquilibrium, phi_e_quadratic_eval, solve,
                        solve_convex_1d, solve_isotropic, solve_quadratic, solve_radial)

__all__ = [
    "Ball", "EllipsoidDomain", "Interval", "RadialSupport",
    "ZInverseError", "zeta", "z_map", "z_jacobian", "z_inverse",
    "ellipsoid_newtonian_potential", "ellipsoid_newtonian_gradient",
    "boundary_flux_bound",
    "Potential", "Isotropic", "QuadraticAniso", "RadialProfile", "Convex1D",
    "Equilibrium", "IsotropicEquilibrium", "QuadraticEquilibrium", "RadialEquilibrium",
    "ConvexEquilibrium1D", "solve", "solve_isotropic", "solve_quadratic", "solve_radial",
    "solve_convex_1d", "phi_e_quadratic_eval",
]
