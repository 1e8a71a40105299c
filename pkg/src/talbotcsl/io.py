"""Scenario files, presets and result formats.

Scenarios are INI files whose keys carry their unit (``pressure_hpa``,
``t1_in_talbot_times``). Unknown sections or keys are rejected. Floats are
written with ``repr`` so a scenario survives a write/read cycle unchanged,
and the SHA-256 of the written text identifies the configuration in every
output file.
"""

import configparser
import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import constants as const
from .bayes import ThetaGrid
from .config import ExperimentConfig, Particle
from .decoherence import CSLParams
from .errors import InvalidConfigurationError

FORMAT_VERSION = 1
PRIOR_CHOICES = ("mdip", "experimental")
MODES = ("prior-predictive", "conditioned-on-theta0")


@dataclass(frozen=True)
class GridSpec:
    lam_range: tuple = (1e-20, 1e-6)
    rc_range: tuple = (1e-9, 1e-4)
    shape: tuple = (120, 120)

    def build(self):
        return ThetaGrid.log_spaced(self.lam_range, self.rc_range, self.shape)


@dataclass(frozen=True)
class Scenario:
    """A complete, reproducible run description."""

    name: str
    config: ExperimentConfig
    particle: Particle
    prior: str = "mdip"
    grid: GridSpec = field(default_factory=GridSpec)
    n_points: int = 10_000
    m_iters: int = 200
    seed: int = 0
    mode: str = "conditioned-on-theta0"
    theta_true: CSLParams = CSLParams(0.0, 1e-7)
    theta_ref: CSLParams = CSLParams(1e-16, 1e-7)
    optimize: bool = True
    description: str = ""

    def __post_init__(self):
        kind = self.prior.split(":", 1)[0]
        if kind not in PRIOR_CHOICES or (kind == "experimental") != (":" in self.prior):
            raise InvalidConfigurationError(f"prior must be 'mdip' or 'experimental:PATH', got {self.prior!r}")
        if self.mode not in MODES:
            raise InvalidConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_points < 0 or self.m_iters < 2:
            raise InvalidConfigurationError("need n_points >= 0 and mc_iters >= 2")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfigurationError("seed must be an unsigned 64-bit integer")

    def replace(self, **changes):
        return replace(self, **changes)

    def text(self):
        return dumps(self)

    def config_hash(self):
        return config_hash(self)


# ---------------------------------------------------------------------------
# value codecs
# ---------------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _scaled(value, factor):
    """Value in the file unit, or None if dividing by ``factor`` would not round-trip."""
    if value is None:
        return None
    scaled = value / factor
    return scaled if scaled * factor == value else None


def _parse_float(text, key):
    try:
        value = float(text)
    except ValueError:
        raise InvalidConfigurationError(f"{key}: not a number: {text!r}") from None
    if not np.isfinite(value):
        raise InvalidConfigurationError(f"{key}: must be finite")
    return value


def _parse_optional(text, key):
    return None if text.strip().lower() == "none" else _parse_float(text, key)


def _parse_int(text, key):
    try:
        return int(text)
    except ValueError:
        raise InvalidConfigurationError(f"{key}: not an integer: {text!r}") from None


def _parse_bool(text, key):
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise InvalidConfigurationError(f"{key}: not a boolean: {text!r}")


# (file key, config field, factor into SI, kind). Alternatives share a field.
EXPERIMENT_KEYS = [
    ("trap_frequency_hz", "trap_frequency", 1.0, "float"),
    ("t_com_k", "t_com", 1.0, "float"),
    ("t_int_k", "t_int", 1.0, "float"),
    ("t_env_k", "t_env", 1.0, "float"),
    ("pressure_hpa", "pressure", const.HPA, "float"),
    ("pressure_pa", "pressure", 1.0, "float"),
    ("gas_mass_u", "gas_mass", const.m_u, "float"),
    ("gas_mass_kg", "gas_mass", 1.0, "float"),
    ("grating_pitch_m", "grating_pitch", 1.0, "float"),
    ("phi0_rad", "phi0", 1.0, "float"),
    ("t1_in_talbot_times", "t1_talbot", 1.0, "float"),
    ("t2_in_talbot_times", "t2_talbot", 1.0, "float"),
    ("pulse_energy_j", "pulse_energy", 1.0, "optional"),
    ("spot_area_m2", "spot_area", 1.0, "optional"),
    ("sigma_m0_m", "sigma_m0", 1.0, "optional"),
    ("drift_rate_m_per_s", "drift_rate", 1.0, "float"),
    ("window_half_width_m", "window_half_width", 1.0, "float"),
    ("samples_per_window", "samples_per_window", 1, "int"),
    ("n_max", "n_max", 1, "int"),
    ("use_mie", "use_mie", 1, "bool"),
    ("talbot_continuation", "talbot_continuation", 1, "bool"),
    ("collision_cross_section_m2", "collision_cross_section", 1.0, "optional"),
    ("force_factor", "force_factor", 1.0, "optional"),
]

SECTIONS = {
    "scenario": {"name", "description", "prior", "n_points", "mc_iters", "seed", "mode",
                 "optimize_controls", "theta_true_lambda_per_s", "theta_true_rc_m",
                 "theta_ref_lambda_per_s", "theta_ref_rc_m"},
    "particle": {"mass_u", "mass_kg", "density_kg_per_m3", "eps_grating_real", "eps_grating_imag",
                 "eps_thermal_real", "eps_thermal_imag"},
    "experiment": {key for key, *_ in EXPERIMENT_KEYS},
    "grid": {"lambda_min_per_s", "lambda_max_per_s", "rc_min_m", "rc_max_m", "n_lambda", "n_rc"},
}


def _parse_value(text, key, kind):
    if kind == "float":
        return _parse_float(text, key)
    if kind == "optional":
        return _parse_optional(text, key)
    if kind == "int":
        return _parse_int(text, key)
    return _parse_bool(text, key)


# ---------------------------------------------------------------------------
# scenario (de)serialisation
# ---------------------------------------------------------------------------

def dumps(scenario):
    """Scenario as INI text (stable key order, ``repr`` floats)."""
    cfg = scenario.config
    p = scenario.particle
    out = _io.StringIO()
    out.write(f"# scenario format {FORMAT_VERSION}\n")

    out.write("[scenario]\n")
    desc = scenario.description.replace("\n", " ")
    for key, value in [("name", scenario.name), ("description", desc), ("prior", scenario.prior)]:
        out.write(f"{key} = {value}\n")
    for key, value in [("n_points", scenario.n_points), ("mc_iters", scenario.m_iters),
                       ("seed", scenario.seed)]:
        out.write(f"{key} = {_fmt(value)}\n")
    out.write(f"mode = {scenario.mode}\n")
    out.write(f"optimize_controls = {_fmt(scenario.optimize)}\n")
    out.write(f"theta_true_lambda_per_s = {_fmt(scenario.theta_true.lam)}\n")
    out.write(f"theta_true_rc_m = {_fmt(scenario.theta_true.rc)}\n")
    out.write(f"theta_ref_lambda_per_s = {_fmt(scenario.theta_ref.lam)}\n")
    out.write(f"theta_ref_rc_m = {_fmt(scenario.theta_ref.rc)}\n\n")

    out.write("[particle]\n")
    mass_u = _scaled(p.mass, const.m_u)
    if mass_u is not None:
        out.write(f"mass_u = {_fmt(mass_u)}\n")
    else:
        out.write(f"mass_kg = {_fmt(p.mass)}\n")
    out.write(f"density_kg_per_m3 = {_fmt(p.density)}\n")
    out.write(f"eps_grating_real = {_fmt(p.eps_grating.real)}\n")
    out.write(f"eps_grating_imag = {_fmt(p.eps_grating.imag)}\n")
    out.write(f"eps_thermal_real = {_fmt(p.eps_thermal.real)}\n")
    out.write(f"eps_thermal_imag = {_fmt(p.eps_thermal.imag)}\n\n")

    out.write("[experiment]\n")
    written = set()
    for key, name, factor, kind in EXPERIMENT_KEYS:
        if name in written:
            continue
        value = getattr(cfg, name)
        if kind in ("float", "optional") and factor != 1.0:
            scaled = _scaled(value, factor)
            if scaled is None and value is not None:
                continue  # the SI alternative listed next takes it
            value = scaled
        out.write(f"{key} = {_fmt(value)}\n")
        written.add(name)
    out.write("\n[grid]\n")
    g = scenario.grid
    out.write(f"lambda_min_per_s = {_fmt(g.lam_range[0])}\n")
    out.write(f"lambda_max_per_s = {_fmt(g.lam_range[1])}\n")
    out.write(f"rc_min_m = {_fmt(g.rc_range[0])}\n")
    out.write(f"rc_max_m = {_fmt(g.rc_range[1])}\n")
    out.write(f"n_lambda = {_fmt(g.shape[0])}\n")
    out.write(f"n_rc = {_fmt(g.shape[1])}\n")
    return out.getvalue()


def loads(text, base=None):
    """Parse INI text. Missing keys fall back to ``base`` (default: the MAQRO preset)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfigurationError(f"malformed scenario file: {exc}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise InvalidConfigurationError(f"unknown section [{section}]")
        unknown = set(parser[section]) - SECTIONS[section]
        if unknown:
            raise InvalidConfigurationError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    base = maqro_preset() if base is None else base
    get = lambda sec, key: parser[sec][key] if parser.has_option(sec, key) else None

    # particle
    p = base.particle
    pk = {}
    if get("particle", "mass_u") is not None and get("particle", "mass_kg") is not None:
        raise InvalidConfigurationError("give mass_u or mass_kg, not both")
    if get("particle", "mass_u") is not None:
        pk["mass"] = _parse_float(get("particle", "mass_u"), "mass_u") * const.m_u
    if get("particle", "mass_kg") is not None:
        pk["mass"] = _parse_float(get("particle", "mass_kg"), "mass_kg")
    if get("particle", "density_kg_per_m3") is not None:
        pk["density"] = _parse_float(get("particle", "density_kg_per_m3"), "density_kg_per_m3")
    for name in ("eps_grating", "eps_thermal"):
        re_t, im_t = get("particle", f"{name}_real"), get("particle", f"{name}_imag")
        old = getattr(p, name)
        if re_t is not None or im_t is not None:
            re = _parse_float(re_t, f"{name}_real") if re_t is not None else old.real
            im = _parse_float(im_t, f"{name}_imag") if im_t is not None else old.imag
            pk[name] = complex(re, im)
    particle = replace(p, **pk)

    # experiment
    ck = {}
    seen = {}
    for key, name, factor, kind in EXPERIMENT_KEYS:
        text_value = get("experiment", key)
        if text_value is None:
            continue
        if name in seen:
            raise InvalidConfigurationError(f"{key} and {seen[name]} both set the same quantity")
        seen[name] = key
        value = _parse_value(text_value, key, kind)
        if factor != 1 and value is not None:
            value = value * factor
        ck[name] = value
    config = replace(base.config, **ck)

    # grid
    g = base.grid
    lam = list(g.lam_range)
    rc = list(g.rc_range)
    shape = list(g.shape)
    for i, key in enumerate(("lambda_min_per_s", "lambda_max_per_s")):
        if get("grid", key) is not None:
            lam[i] = _parse_float(get("grid", key), key)
    for i, key in enumerate(("rc_min_m", "rc_max_m")):
        if get("grid", key) is not None:
            rc[i] = _parse_float(get("grid", key), key)
    for i, key in enumerate(("n_lambda", "n_rc")):
        if get("grid", key) is not None:
            shape[i] = _parse_int(get("grid", key), key)
    grid = GridSpec(tuple(lam), tuple(rc), tuple(shape))

    # scenario
    sk = {"particle": particle, "config": config, "grid": grid}
    for key, attr in (("name", "name"), ("description", "description"), ("prior", "prior"), ("mode", "mode")):
        if get("scenario", key) is not None:
            sk[attr] = get("scenario", key).strip()
    for key, attr in (("n_points", "n_points"), ("mc_iters", "m_iters"), ("seed", "seed")):
        if get("scenario", key) is not None:
            sk[attr] = _parse_int(get("scenario", key), key)
    if get("scenario", "optimize_controls") is not None:
        sk["optimize"] = _parse_bool(get("scenario", "optimize_controls"), "optimize_controls")
    for prefix, attr in (("theta_true", "theta_true"), ("theta_ref", "theta_ref")):
        old = getattr(base, attr)
        lam_t = get("scenario", f"{prefix}_lambda_per_s")
        rc_t = get("scenario", f"{prefix}_rc_m")
        if lam_t is not None or rc_t is not None:
            sk[attr] = CSLParams(
                _parse_float(lam_t, f"{prefix}_lambda_per_s") if lam_t is not None else old.lam,
                _parse_float(rc_t, f"{prefix}_rc_m") if rc_t is not None else old.rc)
    return replace(base, **sk)


def load(path, base=None):
    path = Path(path)
    if not path.is_file():
        raise InvalidConfigurationError(f"config file not found: {path}")
    return loads(path.read_text(), base)


def save(scenario, path):
    Path(path).write_text(dumps(scenario))


def config_hash(scenario):
    return hashlib.sha256(dumps(scenario).encode()).hexdigest()


# ---------------------------------------------------------------------------
# presets and landmarks
# ---------------------------------------------------------------------------

MAQRO_DESCRIPTION = (
    "MAQRO-like space interferometer: silicon sphere, 354 nm grating laser (pitch 177 nm), "
    "trap 200 kHz, T_com 20 mK, T_int 25 K, T_env 20 K, t1 = 2 t_T, H2 at 1e-15 hPa, "
    "measurement drift 10 nm per 100 s. Some descriptions of this setup quote a 100 nm "
    "grating pitch instead; set grating_pitch_m to use it.")


def maqro_preset(mass_u=1e8):
    """The MAQRO-like scenario with a silicon sphere of ``mass_u`` atomic mass units."""
    config = ExperimentConfig(
        trap_frequency=200e3,
        t_com=20e-3,
        t_int=25.0,
        t_env=20.0,
        pressure=1e-15 * const.HPA,
        gas_mass=const.M_H2,
        grating_pitch=177e-9,
        phi0=2.0,
        t1_talbot=2.0,
        t2_talbot=1.0,
        drift_rate=10e-9 / 100.0,
    )
    return Scenario(name="maqro", config=config, particle=Particle.from_amu(mass_u, density=2329.0),
                    description=MAQRO_DESCRIPTION)


def graphene_disk_bound(rc, disk_radius=10e-6, areal_density=7.6e-7, collapse_time=0.01):
    """Smallest ``lambda_c`` that localises a graphene disk within ``collapse_time``.

    A disk of radius ``R_d`` and areal density ``sigma`` collapses at
    ``lambda (M/m0)^2`` when ``r_c`` exceeds the disk and at
    ``lambda 4 pi r_c^2 A sigma^2 / m0^2`` (one coherent patch per ``4 pi r_c^2``)
    when ``r_c`` is much smaller; the smaller of the two is used.
    """
    rc = np.asarray(rc, dtype=float)
    m0 = const.m_u
    area = np.pi * disk_radius**2
    mass = area * areal_density
    per_lambda = np.minimum((mass / m0) ** 2, 4 * np.pi * rc**2 * area * areal_density**2 / m0**2)
    return 1.0 / (collapse_time * per_lambda)


def landmarks():
    """Theory landmarks for plot annotation only; they never enter priors."""
    rc = np.logspace(-9, -4, 21)
    return {
        "purpose": "plot annotation only; not used as prior support",
        "points": [
            {"label": "GRW", "r_c_m": 1e-7, "lambda_c_per_s": 1e-16},
            {"label": "Adler", "r_c_m": 1e-7, "lambda_c_per_s": 1e-8},
            {"label": "Adler", "r_c_m": 1e-6, "lambda_c_per_s": 1e-6},
        ],
        "lower_bound": {
            "label": "graphene disk, radius 10 um, collapse within 10 ms",
            "r_c_m": rc.tolist(),
            "lambda_c_per_s": graphene_disk_bound(rc).tolist(),
        },
    }


def write_landmarks(path):
    Path(path).write_text(json.dumps(landmarks(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------

def fmt17(x):
    return format(float(x), ".17g")


def write_grid_csv(path, grid, density):
    """``log10_rc,log10_lambda,density`` rows, ``r_c`` varying slowest."""
    density = np.asarray(density)
    lines = ["log10_rc,log10_lambda,density"]
    lr = np.log10(grid.rc)
    ll = np.log10(grid.lam)
    for j in range(grid.rc.size):
        for i in range(grid.lam.size):
            lines.append(f"{fmt17(lr[j])},{fmt17(ll[i])},{fmt17(density[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_csv(path):
    """Inverse of :func:`write_grid_csv`: returns ``(log10_rc, log10_lambda, density[lam, rc])``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    lrc = np.unique(data[:, 0])
    llam = np.unique(data[:, 1])
    density = data[:, 2].reshape(lrc.size, llam.size).T
    return lrc, llam, density


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_positions(path, x):
    Path(path).write_text("x_m\n" + "".join(fmt17(v) + "\n" for v in np.asarray(x)))


def write_curve_csv(path, curve):
    lines = ["r_c_m,lambda_c_per_s"] + [f"{fmt17(r)},{fmt17(l)}" for r, l in zip(curve.rc, curve.lam)]
    Path(path).write_text("\n".join(lines) + "\n")


INFO_HEADER = ["N", "M", "mode", "H_bits", "delta_bits", "seed"]


def append_info_row(path, result):
    """Append ``N,M,mode,H_bits,delta_bits,seed`` to a results log (header on first write)."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    row = result.row()
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(INFO_HEADER)
        writer.writerow([row["N"], row["M"], row["mode"], fmt17(row["H_bits"]),
                         fmt17(row["delta_bits"]), row["seed"]])
