"""Choice of the grating phase ``phi0`` and second free-fall time ``t2``.

The controls are picked to maximise the first-harmonic visibility that a
reference collapse model would remove, ``nu_sin - nu_red``. Grid search finds
the basin, alternating bounded line searches refine it and a bounded
Nelder-Mead simplex finishes along the diagonal ridge of the objective.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .config import derive_geometry
from .decoherence import CSLParams, csl_Rn
from .errors import DegenerateObjectiveError, FormulaDomainError, InvalidConfigurationError, InvalidMaterialError
from .physics import (
    MaskTerms,
    force_factor,
    fluence_for_phase,
    grating_mask_terms,
    phase_for_fluence,
    talbot_coefficient,
)

GRW = CSLParams(1e-16, 1e-7)
FLAT_TOL = 1e-12
REFINE_ROUNDS = 3


@dataclass(frozen=True)
class ControlVector:
    """Grating phase ``phi0`` (rad) and second free-fall time ``t2`` (s)."""

    phi0: float
    t2: float

    def __post_init__(self):
        if not (np.isfinite(self.phi0) and self.phi0 >= 0):
            raise InvalidConfigurationError(f"phi0 must be >= 0, got {self.phi0!r}")
        if not (np.isfinite(self.t2) and self.t2 > 0):
            raise InvalidConfigurationError(f"t2 must be positive, got {self.t2!r}")

    def apply(self, config, particle):
        """Config with these controls (``t2`` converted to Talbot times)."""
        t_T = derive_geometry(config, particle).talbot_time
        return config.replace(phi0=float(self.phi0), t2_talbot=float(self.t2 / t_T),
                              pulse_energy=None, spot_area=None)


def _scale_masks(unit, fluence, zeta_coh):
    scale = lambda d: {k: v * fluence for k, v in d.items()}
    return MaskTerms(scale(unit.a), scale(unit.b), scale(unit.F),
                     unit.zeta_abs * fluence, zeta_coh, unit.n0 * fluence)


class VisibilityModel:
    """Visibilities as functions of the controls for one particle and config.

    Mask terms are linear in the fluence, so they are computed once per
    ``t2`` at unit fluence and rescaled for each ``phi0``. CSL factors are
    cached per ``t2`` as well.
    """

    def __init__(self, config, particle, theta_ref=GRW):
        self.config = config
        self.particle = particle
        self.theta_ref = theta_ref
        self.talbot_time = derive_geometry(config, particle).talbot_time
        self.domain = "continue" if config.talbot_continuation else "raise"
        self._masks = {}
        self._csl = {}

    def _geometry(self, t2):
        return derive_geometry(self.config.replace(t2_talbot=t2 / self.talbot_time), self.particle)

    def _unit(self, t2):
        if t2 not in self._masks:
            geo = self._geometry(t2)
            s1 = float(geo.shear(1))
            unit = grating_mask_terms(s1, self.config, self.particle, fluence=1.0)
            envelope = np.exp(-2 * (np.pi * geo.sigma_x * geo.t2 / (geo.period * geo.t1)) ** 2)
            self._masks[t2] = (unit, np.sin(np.pi * s1 / self.config.grating_pitch), envelope, geo)
        return self._masks[t2]

    def visibility_sin(self, phi0, t2, beta=1.0):
        """``2 beta |B_1(d t2 / (t_T D))| exp[-2 (pi sigma_x t2 / (D t1))^2]``."""
        unit, sine, envelope, _ = self._unit(float(t2))
        fluence = fluence_for_phase(phi0, self.config, self.particle)
        masks = _scale_masks(unit, fluence, phi0 * sine)
        return 2 * beta * abs(talbot_coefficient(1, masks, domain=self.domain)) * envelope

    def csl_factor(self, t2, theta=None):
        theta = self.theta_ref if theta is None else theta
        key = (float(t2), theta)
        if key not in self._csl:
            self._csl[key] = float(csl_Rn(1, theta, self._unit(float(t2))[3], self.particle))
        return self._csl[key]

    def visibility_red(self, phi0, t2, theta=None, beta=1.0):
        """``nu_sin R_1^mod(theta_ref)``."""
        return self.visibility_sin(phi0, t2, beta) * self.csl_factor(t2, theta)

    def objective(self, phi0, t2):
        """``nu_sin - nu_red``; NaN where the Talbot formula is undefined."""
        try:
            v = self.visibility_sin(phi0, t2)
        except FormulaDomainError:
            return float("nan")
        return v * (1.0 - self.csl_factor(t2))


def visibility_sin(controls, config, particle, beta=1.0):
    return VisibilityModel(config, particle).visibility_sin(controls.phi0, controls.t2, beta)


def visibility_red(controls, config, particle, theta_ref=GRW, beta=1.0):
    return VisibilityModel(config, particle, theta_ref).visibility_red(controls.phi0, controls.t2, beta=beta)


def default_bounds(config, particle):
    t_T = derive_geometry(config, particle).talbot_time
    return {"phi0": (0.0, 3 * np.pi), "t2": (0.25 * t_T, 2.0 * t_T)}


@dataclass(frozen=True)
class DesignResult:
    controls: ControlVector
    objective: float
    visibility_sin: float
    visibility_red: float
    coarse_shape: tuple


def optimize_controls(config, particle, theta_ref=GRW, bounds=None, coarse=41, model=None):
    """Maximise ``nu_sin - nu_red`` over ``(phi0, t2)``.

    Parameters
    ----------
    theta_ref : CSLParams
        Collapse parameters the design should be sensitive to.
    bounds : dict, optional
        ``{"phi0": (lo, hi), "t2": (lo, hi)}`` with ``t2`` in seconds.
        Defaults to ``phi0`` in [0, 3 pi] and ``t2`` in [0.25, 2] Talbot times.
    coarse : int
        Points per axis of the initial grid search.

    Returns
    -------
    DesignResult

    Raises
    ------
    DegenerateObjectiveError
        If the objective is flat (below 1e-12) over the whole grid, which
        happens for ``theta_ref`` without collapse.
    """
    model = VisibilityModel(config, particle, theta_ref) if model is None else model
    bounds = default_bounds(config, particle) if bounds is None else bounds
    (p_lo, p_hi), (t_lo, t_hi) = bounds["phi0"], bounds["t2"]
    if not (0 <= p_lo < p_hi and 0 < t_lo < t_hi):
        raise InvalidConfigurationError(f"invalid control bounds {bounds!r}")
    phis = np.linspace(p_lo, p_hi, coarse)
    t2s = np.linspace(t_lo, t_hi, coarse)
    values = np.array([[model.objective(p, t) for t in t2s] for p in phis])
    if not np.any(np.nan_to_num(values, nan=0.0) > FLAT_TOL):
        raise DegenerateObjectiveError(
            "objective nu_sin - nu_red is flat; supply a reference collapse theta_ref with lambda_c > 0")
    i, j = np.unravel_index(np.nanargmax(values), values.shape)
    span = np.array([p_hi - p_lo, t_hi - t_lo])
    origin = np.array([p_lo, t_lo])
    step = 1.0 / (coarse - 1)

    def neg(z):
        # z is the control vector scaled to the unit square
        phi, t2 = origin + span * z
        return -np.nan_to_num(model.objective(phi, t2), nan=-np.inf)

    z = (np.array([phis[i], t2s[j]]) - origin) / span
    best = values[i, j]
    # alternate bounded line searches along each axis
    for _ in range(REFINE_ROUNDS):
        for axis in (0, 1):
            def line(u, axis=axis):
                trial = z.copy()
                trial[axis] = u
                return neg(trial)
            res = optimize.minimize_scalar(line, bounds=(max(0.0, z[axis] - step), min(1.0, z[axis] + step)),
                                           method="bounded", options={"xatol": 1e-7})
            if -res.fun > best:
                best = -res.fun
                z[axis] = res.x
    # the objective has a diagonal ridge, so finish with a bounded 2-D simplex
    simplex = np.array([z, z + [step, 0.0], z + [0.0, step]])
    for k in (1, 2):
        if simplex[k, k - 1] > 1.0:
            simplex[k, k - 1] = z[k - 1] - step
    res = optimize.minimize(neg, z, method="Nelder-Mead", bounds=[(0.0, 1.0), (0.0, 1.0)],
                            options={"initial_simplex": simplex, "xatol": 1e-9, "fatol": 1e-15,
                                     "maxiter": 2000})
    if -res.fun > best:
        best = -res.fun
        z = res.x
    phi, t2 = origin + span * z
    controls = ControlVector(float(phi), float(t2))
    nu_sin = model.visibility_sin(phi, t2)
    return DesignResult(controls, float(best), float(nu_sin), float(nu_sin * model.csl_factor(t2)),
                        (coarse, coarse))


def thermal_spot_area(config, particle):
    """``pi (3 (sigma_x + sigma_p t1 / m))^2``: three thermal widths at the grating."""
    geo = derive_geometry(config, particle)
    width = geo.sigma_x + geo.sigma_p * geo.t1 / geo.mass
    return np.pi * (3 * width) ** 2


def grating_pulse(phi0_target, config, particle):
    """Spot area ``a_G`` and pulse energy ``E_G`` realising ``phi0_target``.

    Returns
    -------
    a_G : float
        m^2.
    E_G : float
        J.
    """
    if force_factor(config, particle) <= 0:
        raise InvalidMaterialError("force factor F_0 must be positive for a phase grating")
    area = thermal_spot_area(config, particle)
    return area, fluence_for_phase(phi0_target, config, particle) * area


def pulse_phase(a_G, E_G, config, particle):
    """Phase parameter realised by a pulse ``E_G`` on a spot ``a_G``."""
    return phase_for_fluence(E_G / a_G, config, particle)
