"""Optimal grating phase and free-fall time across particle masses.

For each mass the controls maximise the first-harmonic visibility removed by
the GRW collapse parameters, and the pulse realising the phase is reported.

    python3 demos/grating_design.py
"""

import warnings

from talbotcsl.errors import TalbotDomainWarning
from talbotcsl.io import maqro_preset
from talbotcsl.pipeline import design_summary

warnings.simplefilter("ignore", TalbotDomainWarning)

print("mass [u]   phi0 [rad]  t2 [s]     nu_sin   nu_red   E_G [J]")
for mass in (1e7, 1e8, 1e9):
    d = design_summary(maqro_preset(mass))
    print(f"{mass:8.0e}   {d['phi0_rad']:8.4f}  {d['t2_s']:9.4f}  {d['visibility_sin']:7.4f}  "
          f"{d['visibility_red']:7.4f}  {d['pulse_energy_j']:.3e}")
