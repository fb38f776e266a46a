"""
Quasi-neutral equilibria
========================

Four families of confining potential and the electron densities they hold.
Figures are written to the working directory as SVG.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from quasineutral import equilibrium as E

# %%
# Isotropic trap: a ball of constant density 1.  The disk of area pi has
# radius exactly 1.
disk = E.solve_isotropic(np.pi, 2)
print(disk.summary())

# %%
# Anisotropic quadratic trap.  The semi-axes come out of a small convex
# problem; here the stiffer direction is squeezed by a factor 4.
ell = E.solve_quadratic([2.0, 1.0], 1.0)
print("semi-axes", ell.axes, "aspect", max(ell.axes) / min(ell.axes))

# %%
# Radial power law and a 1D quartic well, where the density is no longer flat.
rad = E.solve_radial(E.RadialProfile.power(2, 1.0, 3.0), 2.0)
well = E.solve_convex_1d(E.Convex1D.polynomial([0, 0, 0.5, 0, 0.2]), 2.0)

# %%
# Profiles along the first axis.  Outside the support the density vanishes
# and the equilibrium potential grows.
fig, axes = plt.subplots(2, 2, figsize=(8, 6))
for ax, eq, title in zip(axes.ravel(), (disk, ell, rad, well),
                         ("isotropic", "quadratic", "radial r^3", "1D quartic")):
    lo, hi = eq.domain.bounding_box()
    s = np.linspace(-2 * np.max(np.abs(hi)), 2 * np.max(np.abs(hi)), 400)
    x = np.zeros((s.size, eq.dim))
    x[:, 0] = s
    ax.plot(s, eq.n_e(x), label="n_e")
    ax.plot(s, eq.phi_e(x), label="Phi_e")
    ax.set_title(title)
axes[0, 0].legend()
fig.tight_layout()
fig.savefig("equilibria.svg")
