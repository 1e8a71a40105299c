"""Physical constants (CODATA 2018 via scipy) and unit conversions."""

from scipy import constants as _c

h = _c.h
hbar = _c.hbar
k_B = _c.k
c = _c.c
m_u = 1.66053906660e-27  # atomic mass constant, kg

HPA = 100.0  # Pa per hPa
NM = 1e-9

# molecular hydrogen, the dominant residual gas in cryogenic vacuum
M_H2 = 2.01588 * m_u
