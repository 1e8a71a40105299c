"""Particle, experiment configuration and the geometry derived from them."""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import constants as const
from .errors import InvalidConfigurationError


@dataclass(frozen=True)
class Particle:
    """Homogeneous dielectric nanosphere.

    Parameters
    ----------
    mass : float
        Mass in kg. Use :meth:`from_amu` to give it in atomic mass units.
    density : float
        Mass density in kg m^-3.
    eps_grating : complex
        Relative permittivity at the grating wavelength.
    eps_thermal : complex
        Relative permittivity across the blackbody band.
    """

    mass: float
    density: float = 2329.0
    eps_grating: complex = complex(22.4, 33.7)
    eps_thermal: complex = complex(11.7, 0.1)

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise InvalidConfigurationError(f"mass must be positive, got {self.mass!r}")
        if not (np.isfinite(self.density) and self.density > 0):
            raise InvalidConfigurationError(f"density must be positive, got {self.density!r}")
        object.__setattr__(self, "eps_grating", complex(self.eps_grating))
        object.__setattr__(self, "eps_thermal", complex(self.eps_thermal))

    @classmethod
    def from_amu(cls, mass_u, **kwargs):
        return cls(mass=mass_u * const.m_u, **kwargs)

    @property
    def mass_u(self):
        return self.mass / const.m_u

    @property
    def volume(self):
        return self.mass / self.density

    @property
    def radius(self):
        return (3.0 * self.mass / (4.0 * np.pi * self.density)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Control, environment and numerical settings of one interferometer run.

    Free-fall times are stored in units of the Talbot time because the
    MAQRO-like scenario fixes ``t1 = 2 t_T`` for every mass. Pressure is in
    Pa; :meth:`with_pressure_hpa` accepts hPa. ``sigma_m0 = None`` means the
    measurement offset equals the initial position width sigma_x.
    """

    trap_frequency: float = 200e3  # Hz, not rad/s
    t_com: float = 20e-3
    t_int: float = 25.0
    t_env: float = 20.0
    pressure: float = 1e-15 * const.HPA
    gas_mass: float = const.M_H2
    grating_pitch: float = 177e-9
    phi0: float = 2.0
    t1_talbot: float = 2.0
    t2_talbot: float = 1.0
    pulse_energy: float | None = None
    spot_area: float | None = None
    sigma_m0: float | None = None
    drift_rate: float = 10e-9 / 100.0
    window_half_width: float = 5e-6
    samples_per_window: int = 1000
    n_max: int = 6
    use_mie: bool = False
    talbot_continuation: bool = True
    collision_cross_section: float | None = None
    force_factor: float | None = None

    def __post_init__(self):
        positive = ("trap_frequency", "t_com", "t_int", "t_env", "gas_mass",
                    "grating_pitch", "t1_talbot", "t2_talbot", "window_half_width")
        for name in positive:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidConfigurationError(f"{name} must be positive and finite, got {value!r}")
        if not (np.isfinite(self.pressure) and self.pressure >= 0):
            raise InvalidConfigurationError(f"pressure must be >= 0, got {self.pressure!r}")
        if self.phi0 < 0 or not np.isfinite(self.phi0):
            raise InvalidConfigurationError(f"phi0 must be >= 0, got {self.phi0!r}")
        if self.drift_rate < 0 or (self.sigma_m0 is not None and self.sigma_m0 < 0):
            raise InvalidConfigurationError("measurement blur parameters must be >= 0")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise InvalidConfigurationError(f"n_max must be a positive integer, got {self.n_max!r}")
        if int(self.samples_per_window) != self.samples_per_window or self.samples_per_window < 2:
            raise InvalidConfigurationError("samples_per_window must be an integer >= 2")
        for name in ("pulse_energy", "spot_area", "collision_cross_section"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value >= 0):
                raise InvalidConfigurationError(f"{name} must be >= 0, got {value!r}")
        if (self.pulse_energy is None) != (self.spot_area is None):
            raise InvalidConfigurationError("pulse_energy and spot_area must be given together")

    @property
    def grating_wavelength(self):
        return 2.0 * self.grating_pitch

    @property
    def laser_wavenumber(self):
        return 2.0 * np.pi / self.grating_wavelength

    def with_pressure_hpa(self, pressure_hpa):
        return replace(self, pressure=pressure_hpa * const.HPA)

    def replace(self, **changes):
        return replace(self, **changes)

    def x_grid(self):
        """Sample points across the square-edged detection window."""
        return np.linspace(-self.window_half_width, self.window_half_width,
                           int(self.samples_per_window))


CONFIG_FIELDS = tuple(f.name for f in fields(ExperimentConfig))


@dataclass(frozen=True)
class DerivedGeometry:
    """Times, lengths and widths that follow from a config and a particle."""

    talbot_time: float
    t1: float
    t2: float
    pitch: float
    period: float
    wavenumber: float
    sigma_x: float
    sigma_p: float
    norm_z: float
    kappa: float
    mass: float = field(repr=False)

    @property
    def total_time(self):
        return self.t1 + self.t2

    def talbot_argument(self, n):
        """Dimensionless shear ``n d t2 / (t_T D)`` at which B_n is evaluated."""
        return n * self.pitch * self.t2 / (self.talbot_time * self.period)

    def shear(self, n):
        return self.talbot_argument(n) * self.pitch

    def separation(self, n):
        """Path separation ``n h t2 / (m D)`` probed by the n-th fringe order."""
        return n * const.h * self.t2 / (self.mass * self.period)


def derive_geometry(config, particle):
    """Compute Talbot time, magnified period, thermal widths and kappa."""
    m = particle.mass
    d = config.grating_pitch
    t_T = m * d**2 / const.h
    t1 = config.t1_talbot * t_T
    t2 = config.t2_talbot * t_T
    period = d * (t1 + t2) / t1
    sigma_x = np.sqrt(const.k_B * config.t_com / (4 * np.pi**2 * m * config.trap_frequency**2))
    # thermal state of the released trap: equipartition momentum width
    sigma_p = np.sqrt(m * const.k_B * config.t_com)
    geom = DerivedGeometry(
        talbot_time=t_T,
        t1=t1,
        t2=t2,
        pitch=d,
        period=period,
        wavenumber=2 * np.pi / period,
        sigma_x=sigma_x,
        sigma_p=sigma_p,
        norm_z=np.sqrt(2 * np.pi) * sigma_p * (t1 + t2),
        kappa=t1 * t2 / ((t1 + t2) * t_T),
        mass=m,
    )
    values = [getattr(geom, f.name) for f in fields(geom)]
    if not all(np.isfinite(v) and v > 0 for v in values):
        raise InvalidConfigurationError(f"non-finite or non-positive derived geometry: {geom}")

    width = 2 * config.window_half_width
    if width < 10 * period:
        raise InvalidConfigurationError(
            f"window {width:.3g} m covers fewer than 10 fringe periods ({period:.3g} m)")
    spacing = width / (config.samples_per_window - 1)
    if period / spacing < 2 * config.n_max:
        raise InvalidConfigurationError(
            f"sampling {spacing:.3g} m too coarse for order {config.n_max} at period {period:.3g} m")
    return geom
