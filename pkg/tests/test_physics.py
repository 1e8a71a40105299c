import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from talbotcsl import constants as const
from talbotcsl.config import ExperimentConfig, Particle, derive_geometry
from talbotcsl.design import optimize_controls
from talbotcsl.errors import FormulaDomainError, InvalidConfigurationError, NumericalConsistencyError
from talbotcsl.mie import mie_amplitudes, mie_efficiencies, rayleigh_amplitudes
from talbotcsl.physics import (
    MaskTerms,
    bessel_ratio_term,
    cosine_basis,
    fringe_amplitudes,
    grating_mask_terms,
    pattern_density,
    susceptibility,
    talbot_coefficient,
)


@pytest.fixture(scope="module")
def maqro():
    return ExperimentConfig(), Particle.from_amu(1e8)


def pure_phase(zeta_coh):
    return MaskTerms.zero(zeta_coh)


# --- geometry -------------------------------------------------------------

def test_talbot_time_hand_value(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    # m d^2 / h by hand: 1e8 * 1.66053906660e-27 * (177e-9)^2 / 6.62607015e-34
    hand = 1e8 * 1.66053906660e-27 * 177e-9**2 / 6.62607015e-34
    assert geo.talbot_time == pytest.approx(hand, rel=1e-14)
    assert geo.talbot_time == pytest.approx(7.85, abs=0.005)


def test_period_and_kappa(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    assert geo.period == pytest.approx(1.5 * cfg.grating_pitch, rel=1e-14)
    assert geo.kappa == pytest.approx(2 / 3, rel=1e-14)
    assert geo.period > geo.pitch


def test_sigma_x_mpmath(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    mp.mp.dps = 40
    m = mp.mpf(1e8) * mp.mpf("1.66053906660e-27")
    kB = mp.mpf("1.380649e-23")
    oracle = mp.sqrt(kB * mp.mpf("0.02") / (4 * mp.pi**2 * m * mp.mpf(200e3) ** 2))
    assert geo.sigma_x == pytest.approx(float(oracle), rel=1e-13)
    assert geo.sigma_x == pytest.approx(1.03e-9, abs=0.005e-9)


def test_zero_trap_frequency_rejected(maqro):
    _, p = maqro
    with pytest.raises(InvalidConfigurationError):
        derive_geometry(ExperimentConfig(trap_frequency=0.0), p)


def test_window_and_sampling_invariants(maqro):
    _, p = maqro
    with pytest.raises(InvalidConfigurationError):
        derive_geometry(ExperimentConfig(window_half_width=0.5e-6), p)
    with pytest.raises(InvalidConfigurationError):
        derive_geometry(ExperimentConfig(samples_per_window=200, n_max=12), p)


def test_particle_radius_consistency():
    p = Particle.from_amu(1e8)
    assert 4 / 3 * np.pi * p.radius**3 * p.density == pytest.approx(p.mass, rel=1e-12)


# --- Mie --------------------------------------------------------------------

def mie_oracle(theta, x, m, nmax=40, dps=40):
    """Direct Mie series in arbitrary precision with library Bessel functions."""
    mp.mp.dps = dps
    x = mp.mpf(x)
    m = mp.mpc(m)
    mx = m * x
    psi = lambda n, z: z * mp.sqrt(mp.pi / (2 * z)) * mp.besselj(n + mp.mpf(1) / 2, z)
    xi = lambda n, z: z * mp.sqrt(mp.pi / (2 * z)) * (mp.besselj(n + mp.mpf(1) / 2, z)
                                                      + 1j * mp.bessely(n + mp.mpf(1) / 2, z))
    dpsi = lambda n, z: mp.diff(lambda t: psi(n, t), z)
    dxi = lambda n, z: mp.diff(lambda t: xi(n, t), z)
    mu = mp.cos(mp.mpf(theta))
    s1 = s2 = mp.mpc(0)
    for n in range(1, nmax + 1):
        a = ((m * psi(n, mx) * dpsi(n, x) - psi(n, x) * dpsi(n, mx))
             / (m * psi(n, mx) * dxi(n, x) - xi(n, x) * dpsi(n, mx)))
        b = ((psi(n, mx) * dpsi(n, x) - m * psi(n, x) * dpsi(n, mx))
             / (psi(n, mx) * dxi(n, x) - m * xi(n, x) * dpsi(n, mx)))
        dp = mp.diff(lambda t: mp.legendre(n, t), mu)
        tau = mu * dp - (1 - mu**2) * mp.diff(lambda t: mp.legendre(n, t), mu, 2)
        w = mp.mpf(2 * n + 1) / (n * (n + 1))
        s1 += w * (a * dp + b * tau)
        s2 += w * (a * tau + b * dp)
    return complex(s1), complex(s2)


@pytest.mark.parametrize("theta", [0.3, 1.2, 2.5])
def test_mie_against_arbitrary_precision(theta):
    s1, s2 = mie_amplitudes(theta, 0.5, 1.5)
    o1, o2 = mie_oracle(theta, 0.5, 1.5, nmax=14)
    assert s1 == pytest.approx(o1, rel=1e-10)
    assert s2 == pytest.approx(o2, rel=1e-10)


def test_mie_forward_symmetry():
    s1, s2 = mie_amplitudes(0.0, 0.7, 1.5 + 0.1j)
    assert s1 == pytest.approx(s2, rel=1e-12)


def test_mie_rayleigh_limit():
    x, m = 1e-3, 1.5 + 0.1j
    s1, s2 = mie_amplitudes(np.pi / 2, x, m)
    assert abs(s2 / s1) < 1e-6
    theta = np.linspace(0.1, 3.0, 7)
    s1, s2 = mie_amplitudes(theta, x, m)
    r1, r2 = rayleigh_amplitudes(theta, x, m)
    # S1 carries an O(x^2) size correction beyond the dipole term
    assert np.max(np.abs(s1 / r1 - 1)) < 1e-4
    assert np.max(np.abs(s2 / r2 - 1)) < 1e-4


def test_mie_efficiencies_small_sphere():
    x, m = 1e-2, 1.5 + 0.2j
    _, q_sca, q_abs = mie_efficiencies(x, m)
    K = (m**2 - 1) / (m**2 + 2)
    assert q_abs == pytest.approx(4 * x * K.imag, rel=1e-3)
    assert q_sca == pytest.approx(8 / 3 * x**4 * abs(K) ** 2, rel=1e-3)


# --- grating masks ----------------------------------------------------------

def test_masks_vanish_at_zero_shear(maqro):
    cfg, p = maqro
    m = grating_mask_terms(0.0, cfg, p)
    for d in (m.a, m.b, m.F):
        assert all(abs(v) == 0 for v in d.values())
    assert m.zeta_abs == 0 and m.zeta_coh == 0


def test_masks_vanish_without_pulse(maqro):
    cfg, p = maqro
    m = grating_mask_terms(60e-9, cfg.replace(phi0=0.0), p)
    assert m.a_total == 0 and m.b_total == 0 and m.F_total == 0 and m.zeta_abs == 0


def rayleigh_mask_oracle(s, cfg, p, fluence, n=640):
    """Midpoint rule on (theta, phi) at ten times the base resolution."""
    k = cfg.laser_wavenumber
    x = 2 * np.pi * p.radius / cfg.grating_wavelength
    K = (p.eps_grating - 1) / (p.eps_grating + 2)
    S = -1j * x**3 * K
    th = (np.arange(n) + 0.5) * np.pi / n
    ph = (np.arange(n) + 0.5) * 2 * np.pi / n
    T, P = np.meshgrid(th, ph, indexing="ij")
    dOmega = np.sin(T) * (np.pi / n) * (2 * np.pi / n)
    nx = np.cos(T)
    pref = 8 * np.pi / (const.hbar * const.c * k) * fluence
    amp = {"theta": S * np.cos(T) * np.cos(P), "phi": -S * np.sin(P)}
    out = {}
    for pol, f in amp.items():
        f2 = np.abs(f) ** 2 / k**2
        a = pref * np.sum(dOmega * f2 * (np.cos(k * nx * s) - np.cos(k * s)))
        F = pref * np.sum(dOmega * 0.5 * f2 * ((np.cos(k * (1 - nx) * s) - 1) + (np.cos(k * (1 + nx) * s) - 1)))
        out[pol] = (a, F)
    return out


def test_masks_against_fine_quadrature(maqro):
    cfg, p = maqro
    s = cfg.grating_pitch / 2
    fluence = 1.0e3
    m = grating_mask_terms(s, cfg, p, fluence=fluence)
    oracle = rayleigh_mask_oracle(s, cfg, p, fluence)
    for pol in ("theta", "phi"):
        a, F = oracle[pol]
        assert m.a[pol] == pytest.approx(a, rel=1e-5)
        assert m.F[pol] == pytest.approx(F, rel=1e-5)
        assert m.F[pol] <= 0
        assert abs(m.b[pol]) < 1e-12 * abs(m.F[pol])


def test_masks_with_mie_match_rayleigh_for_small_sphere():
    p = Particle.from_amu(1e6)
    cfg = ExperimentConfig()
    s = np.array([30e-9, 88.5e-9])
    ray = grating_mask_terms(s, cfg, p)
    mie = grating_mask_terms(s, cfg.replace(use_mie=True), p)
    assert np.allclose(mie.F_total, ray.F_total, rtol=2e-2)
    assert np.allclose(mie.a_total, ray.a_total, rtol=2e-2)


def test_absorption_and_phase_terms(maqro):
    cfg, p = maqro
    d = cfg.grating_pitch
    m = grating_mask_terms(d / 2, cfg, p)
    assert m.zeta_coh == pytest.approx(cfg.phi0, rel=1e-14)
    assert m.zeta_abs == pytest.approx(m.n0 / 2, rel=1e-14)


def test_susceptibility_clausius_mossotti():
    assert susceptibility(1.0, 1.0) == 0
    assert susceptibility(4.0, 2.0) == pytest.approx(3 * 2 * 3 / 6)


# --- Talbot coefficients ----------------------------------------------------

@given(n=st.integers(-8, 8), phi0=st.floats(0, 3 * np.pi), sd=st.floats(0, 4))
@settings(max_examples=200, deadline=None)
def test_pure_phase_reduces_to_bessel(n, phi0, sd):
    z = phi0 * np.sin(np.pi * sd)
    assert talbot_coefficient(n, pure_phase(z)) == pytest.approx(special.jv(n, z), abs=1e-10)


def test_no_grating_is_delta():
    for n in range(-3, 4):
        assert talbot_coefficient(n, pure_phase(0.0)) == (1.0 if n == 0 else 0.0)


@given(phi0=st.floats(0, 3 * np.pi), sd=st.floats(0, 4))
@settings(max_examples=50, deadline=None)
def test_pure_phase_parseval(phi0, sd):
    z = phi0 * np.sin(np.pi * sd)
    total = sum(talbot_coefficient(n, pure_phase(z)) ** 2 for n in range(-60, 61))
    assert total <= 1 + 1e-12


@pytest.mark.parametrize("u,v", [(1.3, 0.4), (0.9, -0.2), (-1.1, -0.5), (2.0, 1.2)])
@pytest.mark.parametrize("p", [0, 1, 2, 3, -1, -2, -5])
def test_ratio_term_matches_closed_form_in_real_domain(u, v, p):
    # the closed form ((u+v)/(u-v))^(p/2) J_p(sign(u-v) sqrt(u^2-v^2)) is real here
    base = (u + v) / (u - v)
    literal = np.sign(base) ** p * abs(base) ** (p / 2) * special.jv(p, np.sign(u - v) * np.sqrt(u * u - v * v))
    assert bessel_ratio_term(p, u, v) == pytest.approx(literal, rel=1e-12, abs=1e-15)


def test_domain_error_is_reported():
    masks = MaskTerms({"theta": 0.5, "phi": 0.0}, {"theta": 0.0, "phi": 0.0},
                      {"theta": -0.1, "phi": 0.0}, 0.0, 0.2, 0.0)
    with pytest.raises(FormulaDomainError):
        talbot_coefficient(1, masks, domain="raise")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        talbot_coefficient(1, masks, domain="warn")
    assert caught


def generating_oracle(n, u, v, b, F, zeta_abs, kmax):
    """B_n from the Fourier integral of exp(A t - B / t), t = e^{i phi}, summed over |k| <= kmax."""
    mp.mp.dps = 30
    A, B = mp.mpf(u + v) / 2, mp.mpf(u - v) / 2

    def T(p):
        f = lambda phi: mp.re(mp.exp(A * mp.expj(phi) - B * mp.expj(-phi) - 1j * p * phi))
        return mp.quad(f, [0, mp.pi / 2, mp.pi, 3 * mp.pi / 2, 2 * mp.pi]) / (2 * mp.pi)

    total = mp.mpf(0)
    for k in range(-kmax, kmax + 1):
        jk = mp.besselj(k, b)
        if abs(jk) < mp.mpf(10) ** -25:
            continue
        total += jk * T(n + k)
    return float(mp.exp(F - zeta_abs) * total)


def test_first_order_coefficient_at_optimum(maqro):
    cfg, p = maqro
    design = optimize_controls(cfg, p)
    cfg2 = design.controls.apply(cfg, p)
    geo = derive_geometry(cfg2, p)
    masks = grating_mask_terms(geo.shear(1), cfg2, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value = talbot_coefficient(1, masks, domain="continue")
    u = masks.zeta_coh
    v = masks.a_total + masks.zeta_abs
    K = int(max(20, np.ceil(4 * (abs(u) + abs(masks.zeta_abs) + abs(masks.a_total) + abs(masks.b_total)))))
    oracle = generating_oracle(1, u, v, masks.b_total, masks.F_total, masks.zeta_abs, 4 * K)
    assert value == pytest.approx(oracle, rel=1e-10, abs=1e-12)


def test_general_coefficient_against_generating_function():
    masks = MaskTerms({"theta": 0.3, "phi": 0.1}, {"theta": 0.25, "phi": 0.15},
                      {"theta": -0.2, "phi": -0.1}, 0.4, 1.1, 0.8)
    u = masks.zeta_coh
    v = masks.a_total + masks.zeta_abs
    for n in (0, 1, 2, -1):
        value = talbot_coefficient(n, masks)
        assert value == pytest.approx(generating_oracle(n, u, v, 0.4, -0.3, 0.4, 40), rel=1e-10, abs=1e-13)


# --- fringe amplitudes and density -------------------------------------------

def test_fringe_amplitudes_basic(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        amps = fringe_amplitudes(geo, cfg, p)
    assert amps.A[0] == amps.B[0]
    assert np.all(np.abs(amps.A) <= np.abs(amps.B) + 1e-300)
    # independent evaluation of the Gaussian envelope
    mp.mp.dps = 30
    for n in range(1, cfg.n_max + 1):
        env = mp.exp(-2 * (n * mp.pi * geo.sigma_x * geo.t2 / (geo.period * geo.t1)) ** 2)
        assert amps.A[n] == pytest.approx(float(amps.B[n] * env), rel=1e-13)


def test_large_sigma_x_suppresses_fringes():
    cfg = ExperimentConfig(t_com=1e6)
    p = Particle.from_amu(1e8)
    geo = derive_geometry(cfg, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = fringe_amplitudes(geo, cfg, p)
    assert np.all(np.abs(spec.A[1:]) < 1e-12)


def test_density_dc_only_and_periodicity(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    x = np.linspace(-2e-6, 2e-6, 101)
    flat = pattern_density(x, np.zeros(7), np.ones(7), geo)
    assert np.allclose(flat, geo.mass / geo.norm_z, rtol=1e-15)
    A = np.array([1, 0.3, 0.1, -0.05, 0.02, 0.0, 0.01])
    d1 = pattern_density(x, A, np.ones(7), geo)
    d2 = pattern_density(x + geo.period, A, np.ones(7), geo)
    assert np.allclose(d1, d2, rtol=1e-12)


def test_density_negativity_is_diagnosed(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    with pytest.raises(NumericalConsistencyError):
        pattern_density(np.linspace(-1e-6, 1e-6, 50), np.array([1, 0.9, 0, 0]), np.ones(4), geo)


def test_density_visibility_matches_coefficients(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = fringe_amplitudes(geo, cfg, p)
    A = spec.A.copy()
    A[2:] = 0  # single harmonic: contrast is exactly 2|A_1|
    x = np.linspace(0, geo.period, 4001)
    d = pattern_density(x, A, np.ones(7), geo)
    contrast = (d.max() - d.min()) / (d.max() + d.min())
    assert contrast == pytest.approx(2 * abs(A[1]), rel=1e-6)


def test_truncation_tail(maqro):
    """Harmonics beyond n_max = 6 change the density by the size of the dropped terms."""
    cfg, p = maqro
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        geo6 = derive_geometry(cfg, p)
        a6 = fringe_amplitudes(geo6, cfg, p).A
        cfg12 = cfg.replace(n_max=12, samples_per_window=2000)
        geo12 = derive_geometry(cfg12, p)
        a12 = fringe_amplitudes(geo12, cfg12, p).A
    assert np.allclose(a12[:7], a6, rtol=1e-12, atol=1e-15)
    x = np.linspace(-geo6.period, geo6.period, 2001)
    d6 = pattern_density(x, a6, np.ones(7), geo6)
    d12 = pattern_density(x, a12, np.ones(13), geo12)
    change = np.max(np.abs(d12 - d6)) / (geo6.mass / geo6.norm_z)
    assert change <= 2 * np.sum(np.abs(a12[7:])) + 1e-15


def test_cosine_basis_partition_independent(maqro):
    cfg, p = maqro
    geo = derive_geometry(cfg, p)
    x = np.linspace(-5e-6, 5e-6, 1000)
    whole = cosine_basis(x, geo, 6)
    parts = np.hstack([cosine_basis(x[:337], geo, 6), cosine_basis(x[337:], geo, 6)])
    assert np.array_equal(whole, parts)
