"""
Relaxation with friction and noise
==================================

At temperature theta the particle velocities relax towards a Maxwellian and
the free energy decays to a plateau set by sampling noise.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from quasineutral import SimConfig, run
from quasineutral.equilibrium import solve_isotropic

eq = solve_isotropic(2.0, 1)
cfg = SimConfig(eps=1e-2, theta=0.1, T=3.0, particles=20_000, seed=5, cadence=10)
res = run(cfg, eq)
s = res.series

# %%
# Velocity spread against the target temperature.
print("velocity variance", res.ensemble.velocities.var(), "theta", cfg.theta)

# %%
# Free energy with its batch standard deviation as a band.
t, F, sd = s["t"], s["free_energy"], s["free_energy_std"]
fig, ax = plt.subplots()
ax.plot(t, F)
ax.fill_between(t, F - 3 * sd, F + 3 * sd, alpha=0.3)
ax.set_xlabel("t")
ax.set_ylabel("free energy")
fig.savefig("free_energy.svg")
print("F(0) =", F[0], " F(T) =", F[-1], " max increase =", np.max(np.diff(F)))
