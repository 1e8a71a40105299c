"""Talbot interference pattern of a nanosphere behind a pulsed standing-wave grating.

The grating acts through a coherent phase ``zeta_coh`` plus incoherent
absorption and Rayleigh/Mie scattering masks. These combine into generalised
Talbot coefficients ``B_n``, which together with the thermal source width give
the fringe amplitudes ``A_n`` of the far-field pattern.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.special import roots_legendre

from . import constants as const
from .config import DerivedGeometry, derive_geometry  # noqa: F401  (re-export)
from .errors import (
    FormulaDomainError,
    InvalidConfigurationError,
    InvalidMaterialError,
    NumericalConsistencyError,
    NumericalFailureError,
    TalbotDomainWarning,
)
from .mie import mie_amplitudes, mie_efficiencies, rayleigh_amplitudes

NEGATIVITY_TOL = 1e-9
MASK_TOL = 1e-8
SERIES_TOL = 1e-12


# ---------------------------------------------------------------------------
# optical response
# ---------------------------------------------------------------------------

def susceptibility(eps, volume):
    """Clausius-Mossotti polarisability volume ``3 V (eps - 1) / (eps + 2)``."""
    eps = complex(eps)
    return 3.0 * volume * (eps - 1.0) / (eps + 2.0)


def force_factor(config, particle):
    """Dimensionless grating-force factor ``F_0 = k^3 Re(chi) / 2``.

    With this choice ``phi0 = 4 F_0 E_G / (hbar c k^3 a_G)`` reduces to the
    usual ``2 Re(chi) E_G / (hbar c a_G)`` of a dipole in a standing wave.
    """
    if config.force_factor is not None:
        return float(config.force_factor)
    k = config.laser_wavenumber
    return 0.5 * k**3 * susceptibility(particle.eps_grating, particle.volume).real


def fluence_for_phase(phi0, config, particle):
    """Pulse fluence ``E_G / a_G`` that produces phase parameter ``phi0``."""
    f0 = force_factor(config, particle)
    if not f0 > 0:
        raise InvalidMaterialError(f"force factor F_0 = {f0!r} cannot produce a phase grating")
    k = config.laser_wavenumber
    return phi0 * const.hbar * const.c * k**3 / (4.0 * f0)


def phase_for_fluence(fluence, config, particle):
    k = config.laser_wavenumber
    return 4.0 * force_factor(config, particle) * fluence / (const.hbar * const.c * k**3)


def grating_fluence(config, particle):
    if config.pulse_energy is not None:
        if config.spot_area == 0:
            raise InvalidConfigurationError("spot_area must be positive")
        return config.pulse_energy / config.spot_area
    return fluence_for_phase(config.phi0, config, particle)


def size_parameter(config, particle):
    return 2 * np.pi * particle.radius / config.grating_wavelength


def absorption_cross_section(config, particle):
    k = config.laser_wavenumber
    if config.use_mie:
        x = size_parameter(config, particle)
        _, _, q_abs = mie_efficiencies(x, np.sqrt(particle.eps_grating))
        return q_abs * np.pi * particle.radius**2
    return k * susceptibility(particle.eps_grating, particle.volume).imag


# ---------------------------------------------------------------------------
# grating masks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaskTerms:
    """Scattering and absorption mask terms at one or more shears.

    Attributes are arrays broadcast against the shear passed to
    :func:`grating_mask_terms`. ``a``, ``b`` and ``F`` map polarisation
    (``"theta"``, ``"phi"``) to values.
    """

    a: dict
    b: dict
    F: dict
    zeta_abs: np.ndarray
    zeta_coh: np.ndarray
    n0: float

    @property
    def a_total(self):
        return self.a["theta"] + self.a["phi"]

    @property
    def b_total(self):
        return self.b["theta"] + self.b["phi"]

    @property
    def F_total(self):
        return self.F["theta"] + self.F["phi"]

    def at(self, i):
        pick = lambda d: {key: np.asarray(val)[i] for key, val in d.items()}
        return MaskTerms(pick(self.a), pick(self.b), pick(self.F),
                         np.asarray(self.zeta_abs)[i], np.asarray(self.zeta_coh)[i], self.n0)

    @classmethod
    def zero(cls, zeta_coh=0.0):
        z = {"theta": 0.0, "phi": 0.0}
        return cls(dict(z), dict(z), dict(z), 0.0, zeta_coh, 0.0)


def _amplitude_table(mu, config, particle):
    """Forward- and backward-beam amplitudes on the ``cos(theta)`` nodes."""
    x = size_parameter(config, particle)
    m_rel = np.sqrt(particle.eps_grating)
    theta = np.arccos(mu)
    if config.use_mie:
        s1f, s2f = mie_amplitudes(theta, x, m_rel)
        s1b, s2b = mie_amplitudes(np.pi - theta, x, m_rel)
    else:
        s1f, s2f = rayleigh_amplitudes(theta, x, m_rel)
        s1b, s2b = rayleigh_amplitudes(np.pi - theta, x, m_rel)
    return s1f, s2f, s1b, s2b


def _mask_integrals(s, config, particle, n_mu, n_phi):
    k = config.laser_wavenumber
    mu, w_mu = roots_legendre(n_mu)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    w_phi = 2 * np.pi / n_phi
    s1f, s2f, s1b, s2b = _amplitude_table(mu, config, particle)
    cphi, sphi = np.cos(phi), np.sin(phi)

    # f = (i/k) S; the reversed beam is expressed in the forward polarisation basis
    amps = {
        "theta": ((s2f[:, None] * cphi), (-s2b[:, None] * cphi)),
        "phi": ((-s1f[:, None] * sphi), (-s1b[:, None] * sphi)),
    }
    s = np.atleast_1d(np.asarray(s, dtype=float))
    ks = (k * s)[:, None, None]
    nx = mu[None, :, None]
    weights = (w_mu[:, None] * w_phi)[None]
    out = {}
    for pol, (fp, fm) in amps.items():
        cross = np.conj(fp) * fm / k**2
        intensity_p = np.abs(fp) ** 2 / k**2
        intensity_m = np.abs(fm) ** 2 / k**2
        a = np.sum(weights * cross.real[None] * (np.cos(ks * nx) - np.cos(ks)), axis=(1, 2))
        b = np.sum(weights * cross.imag[None] * np.sin(ks * nx), axis=(1, 2))
        F = 0.5 * np.sum(weights * (intensity_p[None] * (np.cos(ks * (1 - nx)) - 1)
                                    + intensity_m[None] * (np.cos(ks * (1 + nx)) - 1)), axis=(1, 2))
        out[pol] = (a, b, F)
    return out


def grating_mask_terms(s, config, particle, fluence=None):
    """Mask terms ``a_nu, b_nu, F_nu, zeta_abs, zeta_coh, n_0`` at shear ``s``.

    The solid-angle integrals use Gauss-Legendre nodes in ``cos(theta)`` and
    the trapezoid rule in ``phi``, starting at 64 x 64 and doubling until the
    change falls below ``1e-8`` (relative to the scattering scale).

    Parameters
    ----------
    s : float or array_like
        Shear in metres.
    fluence : float, optional
        ``E_G / a_G`` in J m^-2. Defaults to the config's pulse, or to the
        fluence that realises ``config.phi0``.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if fluence is None:
        fluence = grating_fluence(config, particle)
    k = config.laser_wavenumber
    d = config.grating_pitch
    prefactor = 8 * np.pi / (const.hbar * const.c * k) * fluence
    n0 = 2.0 * absorption_cross_section(config, particle) * fluence / (const.hbar * const.c * k)
    phi0 = config.phi0 if config.pulse_energy is None else phase_for_fluence(fluence, config, particle)

    if prefactor == 0:
        zero = np.zeros_like(s_arr)
        pol = {"theta": zero, "phi": zero}
        a, b, F = dict(pol), dict(pol), dict(pol)
    else:
        n_mu = n_phi = 64
        prev = _mask_integrals(s_arr, config, particle, n_mu, n_phi)
        while True:
            n_mu *= 2
            n_phi *= 2
            cur = _mask_integrals(s_arr, config, particle, n_mu, n_phi)
            scale = max(np.max(np.abs(np.concatenate([np.ravel(v) for v in cur["theta"] + cur["phi"]]))), 1e-300)
            change = max(np.max(np.abs(np.asarray(c) - np.asarray(p)))
                         for pol in cur for c, p in zip(cur[pol], prev[pol]))
            if change <= MASK_TOL * scale:
                break
            if n_mu >= 1024:
                raise NumericalFailureError(f"mask quadrature did not converge (change {change / scale:.2e})")
            prev = cur
        a = {pol: prefactor * cur[pol][0] for pol in cur}
        b = {pol: prefactor * cur[pol][1] for pol in cur}
        F = {pol: prefactor * cur[pol][2] for pol in cur}

    phase = np.pi * s_arr / d
    zeta_abs = 0.5 * n0 * (1 - np.cos(phase))
    zeta_coh = phi0 * np.sin(phase)
    if np.ndim(s) == 0:
        a, b, F = ({p: v[0] for p, v in dd.items()} for dd in (a, b, F))
        zeta_abs, zeta_coh = zeta_abs[0], zeta_coh[0]
    return MaskTerms(a, b, F, zeta_abs, zeta_coh, n0)


# ---------------------------------------------------------------------------
# Talbot coefficients
# ---------------------------------------------------------------------------

def _scaled_power(w, p):
    """``(w/2)**p / p!`` for integer ``p >= 0`` without overflow."""
    p = np.asarray(p)
    half = np.abs(w) / 2.0
    with np.errstate(divide="ignore"):
        mag = np.where(p == 0, 1.0,
                       np.where(half == 0, 0.0,
                                np.exp(p * np.log(np.where(half == 0, 1.0, half)) - special.gammaln(p + 1))))
    sign = np.where((w < 0) & (p % 2 == 1), -1.0, 1.0)
    return sign * mag


def bessel_ratio_term(m, u, v):
    """``[(u+v)/(u-v)]^(m/2) J_m(sgn(u-v) sqrt(u^2 - v^2))`` for integer ``m``.

    Written as ``((u+v)/2)^m / m! * 0F1(; m+1; -(u^2 - v^2)/4)`` (and the
    mirror form for negative ``m``), which is entire in ``u`` and ``v``. It
    equals the bracketed expression wherever that is real and continues it
    analytically (modified Bessel regime) where ``|v| > |u|``.
    """
    m = np.asarray(m)
    y = (u - v) * (u + v)
    p = np.abs(m)
    hyp = special.hyp0f1(p + 1, -y / 4.0)
    pos = _scaled_power(u + v, p) * hyp
    neg = np.where(p % 2 == 1, -1.0, 1.0) * _scaled_power(u - v, p) * hyp
    return np.where(m >= 0, pos, neg)


def _series_orders(n, masks):
    u = masks.zeta_coh
    v = masks.a_total + masks.zeta_abs
    b = masks.b_total
    K = int(max(20, np.ceil(4 * (abs(u) + abs(masks.zeta_abs) + abs(masks.a_total) + abs(b)))))
    return u, v, b, K


def talbot_coefficient(n, masks, domain="raise"):
    """Generalised Talbot coefficient ``B_n`` from grating masks.

    Parameters
    ----------
    n : int
        Fringe order (may be negative).
    masks : MaskTerms
        Scalar mask terms at the shear ``s`` of interest.
    domain : {"raise", "continue", "warn"}
        What to do when the base ``(u+v)/(u-v)`` is negative (or infinite)
        while a term with half-integer exponent contributes: raise
        :class:`FormulaDomainError`, or use the analytic continuation,
        optionally with a :class:`TalbotDomainWarning`.

    Returns
    -------
    float
        ``B_n``; real for the symmetric masks used here.
    """
    u, v, b, K = _series_orders(n, masks)
    denom = u - v
    bad_base = denom == 0 or (u + v) / denom < 0
    while True:
        k = np.arange(-K, K + 1)
        jk = special.jv(k, b)
        terms = jk * bessel_ratio_term(n + k, u, v)
        total = terms.sum()
        tail = abs(terms[0]) + abs(terms[-1])
        if tail < SERIES_TOL * max(1.0, abs(total)) or b == 0:
            break
        K *= 2
        if K > 4096:
            raise NumericalFailureError("Talbot Bessel sum did not converge")
    if bad_base:
        # only half-integer powers (odd n+k) that actually contribute are ill-defined
        odd = (n + k) % 2 == 1
        if np.any(np.abs(terms[odd]) > SERIES_TOL * max(1.0, abs(total))):
            msg = (f"Talbot base (u+v)/(u-v) with u={u:.6g}, v={v:.6g} is negative or "
                   f"singular for odd order n+k; half-integer power undefined")
            if domain == "raise":
                raise FormulaDomainError(msg)
            if domain == "warn":
                warnings.warn(msg + "; using analytic continuation", TalbotDomainWarning, stacklevel=2)
    return float(np.exp(masks.F_total - masks.zeta_abs) * total)


@dataclass(frozen=True)
class TalbotSpectrum:
    """Fringe amplitudes and the coefficients they were built from."""

    orders: np.ndarray
    A: np.ndarray
    B: np.ndarray
    masks: MaskTerms


def fringe_amplitudes(geometry, config, particle, fluence=None):
    """``A_n = B_n(n d t2 / (t_T D)) exp[-2 (n pi sigma_x t2 / (D t1))^2]``, n = 0..n_max."""
    orders = np.arange(config.n_max + 1)
    shears = geometry.shear(orders)
    masks = grating_mask_terms(shears, config, particle, fluence=fluence)
    domain = "warn" if config.talbot_continuation else "raise"
    B = np.array([talbot_coefficient(int(n), masks.at(i), domain=domain)
                  for i, n in enumerate(orders)])
    envelope = np.exp(-2 * (orders * np.pi * geometry.sigma_x * geometry.t2
                            / (geometry.period * geometry.t1)) ** 2)
    return TalbotSpectrum(orders, B * envelope, B, masks)


def cosine_basis(x, geometry, n_max):
    """Rows ``cos(n k x)`` for n = 1..n_max."""
    n = np.arange(1, n_max + 1)[:, None]
    return np.cos(n * geometry.wavenumber * np.asarray(x, dtype=float)[None, :])


def pattern_density(x, A, R, geometry, window_half_width=None):
    """Unnormalised arrival density ``W(x) (m/Z) [1 + 2 sum_n R_n A_n cos(n k x)]``.

    ``A`` and ``R`` are indexed by order starting at ``n = 0``; the n = 0
    entries do not enter (the DC term is the leading 1).
    """
    x = np.asarray(x, dtype=float)
    A = np.asarray(A, dtype=float)
    R = np.asarray(R, dtype=float)
    c = R[1:] * A[1:]
    bracket = 1 + 2 * (c @ cosine_basis(np.ravel(x), geometry, len(c))).reshape(x.shape)
    if bracket.min(initial=np.inf) < -NEGATIVITY_TOL:
        raise NumericalConsistencyError(
            f"fringe density negative ({bracket.min():.3e}); coefficients or truncation inconsistent")
    density = geometry.mass / geometry.norm_z * bracket
    if window_half_width is not None:
        density = np.where(np.abs(x) <= window_half_width, density, 0.0)
    return density
