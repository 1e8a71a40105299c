"""Decoherence channels and the fringe reduction factors they produce.

A channel localises the particle at rate ``Gamma`` with spatial resolution
``f(x)``; over the flight time it multiplies the n-th fringe amplitude by
``exp{-Gamma [1 - f(x_n)] (t1 + t2)}`` where ``x_n = n h t2 / (m D)``.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special
from scipy.special import roots_legendre

from . import constants as const
from .errors import InvalidConfigurationError, NumericalFailureError
from .physics import susceptibility

ALPHA_MAX = 12.0  # e^-144 tail of the CSL Gaussian weight is negligible
CSL_EPSREL = 1e-12
BAND_DECADES = 500.0
WIEN_X = 2.821439372122079
TAIL_TOL = 1e-6


# ---------------------------------------------------------------------------
# special-function helpers
# ---------------------------------------------------------------------------

def si_ratio(z):
    """``Si(z) / z`` with the removable singularity at 0 filled in."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    big = special.sici(zs)[0] / zs
    z2 = z * z
    return np.where(small, 1 - z2 / 18 + z2 * z2 / 600, big)


def sinc2(z):
    z = np.asarray(z, dtype=float)
    return np.sinc(z / np.pi) ** 2


def j1_zeros_below(zmax):
    """Positive zeros of the spherical Bessel function ``j1`` below ``zmax``.

    They solve ``tan z = z``; Newton on ``sin z - z cos z`` from the
    asymptotic guess converges in a few steps.
    """
    kmax = int(zmax / np.pi) + 1
    k = np.arange(1, kmax + 1)
    q = (k + 0.5) * np.pi
    z = q - 1 / q
    for _ in range(6):
        z = z - (np.sin(z) - z * np.cos(z)) / (z * np.sin(z))
    return z[z < zmax]


# ---------------------------------------------------------------------------
# CSL
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CSLParams:
    """Collapse rate ``lam`` (s^-1) and localisation length ``rc`` (m)."""

    lam: float
    rc: float

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise InvalidConfigurationError(f"lambda_c must be >= 0, got {self.lam!r}")
        if not (self.rc > 0 and np.isfinite(self.rc)):
            raise InvalidConfigurationError(f"r_c must be > 0, got {self.rc!r}")

    @property
    def vector(self):
        return np.array([self.lam, self.rc])


NO_COLLAPSE = CSLParams(0.0, 1e-7)


def _csl_breakpoints(beta):
    if beta <= 5:
        return None
    return list(j1_zeros_below(ALPHA_MAX * beta) / beta)


def gaussian_quad(g, beta=0.0, scale=1.0):
    """``int_0^inf exp(-a^2) g(a) da`` by adaptive quadrature on ``[0, 12]``.

    ``g`` may return an array (integrated componentwise). For ``beta > 5``
    the interval is split at the zeros of ``j1(a beta)``. ``scale`` sets the
    absolute error floor relative to the expected magnitude.
    """
    value, err = integrate.quad_vec(lambda a: np.exp(-a * a) * np.asarray(g(a), dtype=float),
                                    0.0, ALPHA_MAX, epsrel=CSL_EPSREL, epsabs=1e-15 * scale,
                                    points=_csl_breakpoints(beta), limit=20000, norm="max")
    return value, err


def csl_integrals(beta, gammas=()):
    """Weight and resolution integrals of the extended-sphere CSL kernel.

    Returns ``I = int_0^inf exp(-a^2) j1(a beta)^2 da`` and, for each
    ``gamma`` in ``gammas``, ``J = int exp(-a^2) j1(a beta)^2 Si(a gamma)/(a gamma) da``.
    The ratio ``J / I`` is the resolution function at ``x = gamma r_c``.
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))

    def integrand(a):
        w = special.spherical_jn(1, a * beta) ** 2
        return np.concatenate(([w], w * si_ratio(a * gammas)))

    # absolute floor scaled to the point-like size of I so tiny beta does not stall
    scale = np.sqrt(np.pi) / 4 * min(beta, 1.0) ** 2 / 9
    value, err = gaussian_quad(integrand, beta, scale)
    if not np.all(np.isfinite(value)) or err > 1e-9 * max(value[0], 1e-300):
        raise NumericalFailureError(f"CSL quadrature did not converge (beta={beta!r}, err={err!r})")
    return value[0], value[1:]


def csl_prefactor(rc, particle):
    """Dimensionless ``A = (36/sqrt(pi)) (m/m0)^2 (r_c/R)^2``."""
    return 36 / np.sqrt(np.pi) * (particle.mass / const.m_u) ** 2 * (rc / particle.radius) ** 2


def csl_rate_per_lambda(rc, particle):
    """``Gamma_CSL / lambda_c`` for a homogeneous sphere."""
    beta = particle.radius / rc
    weight, _ = csl_integrals(beta)
    return csl_prefactor(rc, particle) * weight


def csl_rate(theta, particle):
    """Localisation rate ``Gamma_CSL`` (s^-1) of the extended sphere."""
    if theta.lam == 0:
        return 0.0
    return theta.lam * csl_rate_per_lambda(theta.rc, particle)


def csl_resolution(x, theta, particle):
    """Resolution function ``f(x)`` of CSL for the extended sphere, ``f(0) = 1``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise InvalidConfigurationError("separation must be >= 0")
    weight, J = csl_integrals(particle.radius / theta.rc, np.ravel(x) / theta.rc)
    return (J / weight).reshape(x.shape)


def point_like_resolution(x, rc):
    """``sqrt(pi) (r_c/x) erf(x / 2 r_c)``, the R -> 0 limit."""
    x = np.asarray(x, dtype=float)
    z = x / (2 * rc)
    zs = np.where(z < 1e-8, 1.0, z)
    return np.where(z < 1e-8, 1 - z * z / 3, np.sqrt(np.pi) / 2 * special.erf(zs) / zs)


def csl_Rn(n, theta, geometry, particle):
    """CSL reduction factor ``R_n^mod`` of fringe order(s) ``n``."""
    n = np.asarray(n)
    if theta.lam == 0:
        return np.ones(n.shape)
    gamma = csl_rate(theta, particle)
    f = csl_resolution(geometry.separation(n.astype(float)), theta, particle)
    out = np.exp(-gamma * (1 - f) * geometry.total_time)
    return np.where(n == 0, 1.0, out)


@dataclass(frozen=True)
class CSLTable:
    """CSL rate and resolution tabulated against ``r_c`` for fixed separations.

    ``rate_per_lambda[j]`` is ``Gamma_CSL / lambda_c`` at ``rc[j]``;
    ``one_minus_f[j, n]`` is ``1 - f(x_n)`` at ``rc[j]`` for the separations
    of orders ``n = 0..n_max``.
    """

    rc: np.ndarray
    separations: np.ndarray
    rate_per_lambda: np.ndarray
    one_minus_f: np.ndarray

    def exponent(self, lam, total_time):
        """``Gamma (1 - f) T`` with shape ``lam.shape + rc.shape + (n,)``."""
        lam = np.asarray(lam, dtype=float)
        per = self.rate_per_lambda[:, None] * self.one_minus_f * total_time
        return lam[..., None, None] * per

    def reduction(self, lam, total_time):
        return np.exp(-self.exponent(lam, total_time))


def csl_table(rc_values, separations, particle):
    """Tabulate the CSL integrals once per ``r_c`` (lambda_c enters linearly)."""
    rc_values = np.atleast_1d(np.asarray(rc_values, dtype=float))
    separations = np.asarray(separations, dtype=float)
    rates = np.empty(rc_values.size)
    one_minus_f = np.empty((rc_values.size, separations.size))
    for j, rc in enumerate(rc_values):
        weight, J = csl_integrals(particle.radius / rc, separations / rc)
        rates[j] = csl_prefactor(rc, particle) * weight
        # 1 - J/I loses digits when x << r_c; use the complementary integrand
        one_minus_f[j] = _one_minus_f(particle.radius / rc, separations / rc, weight, J)
    return CSLTable(rc_values, separations, rates, one_minus_f)


def _one_minus_f(beta, gammas, weight, J):
    out = 1 - J / weight
    small = np.asarray(gammas) * ALPHA_MAX < 1e-2
    if np.any(small):
        # 1 - Si(z)/z = z^2/18 - z^4/600 + ...; integrate the series term by term
        moments = []
        for p in (2, 4, 6):
            val, _ = integrate.quad(lambda a: np.exp(-a * a) * special.spherical_jn(1, a * beta) ** 2 * a**p,
                                    0, ALPHA_MAX, epsrel=1e-13, epsabs=0, limit=2000,
                                    points=_csl_breakpoints(beta))
            moments.append(val / weight)
        g = np.asarray(gammas)[small]
        out = np.array(out, dtype=float)
        out[small] = g**2 / 18 * moments[0] - g**4 / 600 * moments[1] + g**6 / 35280 * moments[2]
    out[np.asarray(gammas) == 0] = 0.0
    return np.clip(out, 0.0, 1.0)


def csl_channel(theta, particle):
    rate = csl_rate(theta, particle)
    return DecoherenceChannel(
        label="CSL", rate=rate,
        resolution=lambda x: csl_resolution(x, theta, particle) if theta.lam > 0 else np.ones_like(x))


# ---------------------------------------------------------------------------
# generic channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecoherenceChannel:
    """Localisation process with rate ``rate`` (s^-1) and resolution ``resolution(x)``."""

    label: str
    rate: float
    resolution: Callable = field(repr=False)

    def reduction_factors(self, geometry, n_max):
        n = np.arange(n_max + 1)
        x = geometry.separation(n.astype(float))
        f = np.asarray(self.resolution(x), dtype=float)
        R = np.exp(-self.rate * (1 - f) * geometry.total_time)
        R[0] = 1.0
        return R


@dataclass(frozen=True)
class MeasurementChannel:
    """Gaussian read-out blur of width ``sigma_m`` at the detector."""

    sigma_m: float
    label: str = "measurement"

    def reduction_factors(self, geometry, n_max):
        return measurement_Rn(np.arange(n_max + 1), self.sigma_m, geometry.period)


def measurement_Rn(n, sigma_m, period):
    """``exp[-(2 pi n sigma_m / D)^2 / 2]``, the Fourier attenuation of a Gaussian blur."""
    if sigma_m < 0:
        raise InvalidConfigurationError("sigma_m must be >= 0")
    n = np.asarray(n, dtype=float)
    return np.exp(-0.5 * (2 * np.pi * n * sigma_m / period) ** 2)


def measurement_width(config, geometry):
    """``sigma_m(t1 + t2) = sigma_m0 + drift * (t1 + t2)``; offset defaults to sigma_x."""
    offset = geometry.sigma_x if config.sigma_m0 is None else config.sigma_m0
    return offset + config.drift_rate * geometry.total_time


# ---------------------------------------------------------------------------
# blackbody and gas
# ---------------------------------------------------------------------------

_BAND_NODES, _BAND_WEIGHTS = roots_legendre(400)


def _thermal_band(temperature):
    k_peak = WIEN_X * const.k_B * temperature / (const.hbar * const.c)
    lo, hi = np.log(k_peak / BAND_DECADES), np.log(k_peak * BAND_DECADES)
    u = 0.5 * (hi - lo) * _BAND_NODES + 0.5 * (hi + lo)
    k = np.exp(u)
    return k, 0.5 * (hi - lo) * _BAND_WEIGHTS * k


def _cross_section(kind, k, particle):
    chi = susceptibility(particle.eps_thermal, particle.volume)
    if kind in ("abs", "emis"):
        return k * chi.imag
    if kind == "sca":
        return k**4 * abs(chi) ** 2 / (6 * np.pi)
    raise InvalidConfigurationError(f"unknown blackbody channel {kind!r}")


def blackbody_spectral_rate(k, kind, temperature, particle):
    """Event rate per unit wavenumber ``c (k/pi)^2 sigma(k) / (exp(hbar c k / k_B T) - 1)``."""
    xk = const.hbar * const.c * k / (const.k_B * temperature)
    with np.errstate(over="ignore"):
        occupation = 1.0 / np.expm1(xk)
    return const.c * (k / np.pi) ** 2 * _cross_section(kind, k, particle) * occupation


def _bracket(kind, z):
    if kind == "sca":
        return 2 * si_ratio(2 * z) - sinc2(z)
    return si_ratio(z)


def blackbody_channel(kind, temperature, particle):
    """Absorption (``"abs"``), emission (``"emis"``) or Rayleigh scattering (``"sca"``).

    The rate integral runs over ``[k_peak/500, 500 k_peak]`` with Gauss-Legendre
    nodes in ``ln k``; the truncated tails are bounded analytically and must
    stay below ``1e-6`` of the rate.
    """
    label = {"abs": "blackbody-absorption", "emis": "blackbody-emission",
             "sca": "blackbody-scattering"}.get(kind)
    if label is None:
        raise InvalidConfigurationError(f"unknown blackbody channel {kind!r}")
    if temperature <= 0:
        return DecoherenceChannel(label, 0.0, lambda x: np.ones_like(np.asarray(x, dtype=float)))
    k, w = _thermal_band(temperature)
    gamma_k = blackbody_spectral_rate(k, kind, temperature, particle)
    rate = float(np.sum(w * gamma_k))
    if rate == 0:
        return DecoherenceChannel(label, 0.0, lambda x: np.ones_like(np.asarray(x, dtype=float)))

    # low end: gamma ~ k^p with p >= 2, so int_0^k0 <= gamma(k0) k0 / 3
    k_lo, k_hi = k[0], k[-1]
    g_lo = blackbody_spectral_rate(np.array([k_lo]), kind, temperature, particle)[0]
    g_hi = blackbody_spectral_rate(np.array([k_hi]), kind, temperature, particle)[0]
    kT = const.k_B * temperature / (const.hbar * const.c)
    tail = g_lo * k_lo / 3 + g_hi * kT * 2
    if tail > TAIL_TOL * rate:
        raise NumericalFailureError(f"blackbody band truncation {tail / rate:.2e} of the rate")

    norm = float(np.sum(w * gamma_k * _bracket(kind, 0.0)))

    def resolution(x):
        x = np.asarray(x, dtype=float)
        z = np.multiply.outer(x, k)
        return np.sum(w * gamma_k * _bracket(kind, z), axis=-1) / norm

    return DecoherenceChannel(label, rate, resolution)


def collision_rate(pressure, temperature, gas_mass, particle, cross_section=None):
    """Hard-sphere kinetic rate ``n_g v_mean sigma`` with ``sigma = pi R^2`` by default."""
    if pressure < 0:
        raise InvalidConfigurationError("pressure must be >= 0")
    n_gas = pressure / (const.k_B * temperature)
    v_mean = np.sqrt(8 * const.k_B * temperature / (np.pi * gas_mass))
    if cross_section is None:
        sigma = np.pi * particle.radius**2
    elif callable(cross_section):
        sigma = cross_section(particle)
    else:
        sigma = cross_section
    return n_gas * v_mean * sigma


def collision_channel(pressure, temperature, gas_mass, particle, cross_section=None):
    """Gas collisions resolve any fringe separation: ``f(0) = 1``, ``f(x > 0) = 0``."""
    rate = collision_rate(pressure, temperature, gas_mass, particle, cross_section)
    return DecoherenceChannel(
        "collision", rate, lambda x: np.where(np.asarray(x, dtype=float) == 0, 1.0, 0.0))


# ---------------------------------------------------------------------------
# combination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionFactors:
    """Per-channel and combined reduction factors for orders 0..n_max."""

    per_channel: dict
    mod: np.ndarray
    oth: np.ndarray

    @property
    def total(self):
        return self.mod * self.oth


def combine(channels, n_max, geometry):
    """Multiply channel factors order by order; CSL goes to ``mod``, the rest to ``oth``."""
    per = {}
    mod = np.ones(n_max + 1)
    oth = np.ones(n_max + 1)
    for ch in channels:
        R = np.asarray(ch.reduction_factors(geometry, n_max), dtype=float)
        key = ch.label
        i = 2
        while key in per:
            key = f"{ch.label}#{i}"
            i += 1
        per[key] = R
        if ch.label == "CSL":
            mod = mod * R
        else:
            oth = oth * R
    return ReductionFactors(per, mod, oth)


def environment_channels(config, particle, geometry):
    """Blackbody (absorption at T_env, emission at T_int, scattering at T_env),
    gas collisions and measurement blur for one configuration."""
    return [
        blackbody_channel("abs", config.t_env, particle),
        blackbody_channel("emis", config.t_int, particle),
        blackbody_channel("sca", config.t_env, particle),
        collision_channel(config.pressure, config.t_env, config.gas_mass, particle,
                          config.collision_cross_section),
        MeasurementChannel(measurement_width(config, geometry)),
    ]
