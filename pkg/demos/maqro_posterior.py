"""Posterior over the CSL parameters for the MAQRO-like scenario.

Simulates 1e4 arrival positions without collapse, updates the MDIP prior on
an 80 x 80 grid and prints the 95% exclusion line at a few collapse radii.

    python3 demos/maqro_posterior.py [out_dir]
"""

import sys
import warnings

import numpy as np

from talbotcsl.errors import TalbotDomainWarning
from talbotcsl.io import GridSpec, maqro_preset
from talbotcsl.pipeline import run_posterior

warnings.simplefilter("ignore", TalbotDomainWarning)

out = sys.argv[1] if len(sys.argv) > 1 else None
scenario = maqro_preset().replace(grid=GridSpec(shape=(80, 80)), n_points=10_000, seed=1)
run = run_posterior(scenario, out)

c = run.design.controls
print(f"controls: phi0 = {c.phi0:.4f} rad, t2 = {c.t2:.4f} s (objective {run.design.objective:.4f})")
print(f"below-curve mass {run.exclusion.mass:.4f}")
for rc in (1e-8, 1e-7, 1e-6, 1e-5):
    print(f"  r_c = {rc:.0e} m: lambda_c < {run.exclusion.lam_at(rc):.3e} 1/s")

# where the posterior mass sits along lambda_c, summed over r_c
grid = run.posterior.grid
mass_per_row = run.posterior.density * grid.weights
cum = np.cumsum(mass_per_row.sum(axis=1))
for q in (0.5, 0.95):
    print(f"{q:.0%} of the mass below lambda_c = {grid.lam[np.searchsorted(cum, q)]:.2e} 1/s")
if out:
    print(f"files written to {out}")
