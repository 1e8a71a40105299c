"""End-to-end runs: controls, data, posterior, exclusion line, information sweeps."""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._version import __version__
from . import constants as const
from .bayes import (
    InterferometerModel,
    PosteriorGrid,
    experimental_prior,
    exclusion_line,
    mdip_prior,
    posterior,
    read_boundary,
)
from .design import grating_pulse, optimize_controls
from .errors import InvalidConfigurationError, TalbotError
from .information import expected_information
from .io import (
    append_info_row,
    config_hash,
    dumps,
    fmt17,
    landmarks,
    write_curve_csv,
    write_grid_csv,
    write_json,
    write_positions,
)
from .rng import substream

RC_REFERENCE = 1e-7


def prepare(scenario):
    """Scenario with optimised controls applied (when requested) and the design used."""
    if not scenario.optimize:
        return scenario, None
    result = optimize_controls(scenario.config, scenario.particle, scenario.theta_ref)
    config = result.controls.apply(scenario.config, scenario.particle)
    return scenario.replace(config=config, optimize=False), result


def build_prior(scenario, grid, family):
    if scenario.prior == "mdip":
        return mdip_prior(grid, family)
    path = scenario.prior.split(":", 1)[1]
    return experimental_prior(grid, read_boundary(path))


def simulate(scenario, model=None):
    """Arrival positions for ``scenario.theta_true`` (the scenario's controls as given)."""
    model = InterferometerModel(scenario.config, scenario.particle) if model is None else model
    table = model.table(scenario.theta_true)
    return table.sample(scenario.n_points, substream(scenario.seed, "data", scenario.n_points))


@dataclass
class PosteriorRun:
    scenario: object
    design: object
    model: InterferometerModel
    prior: np.ndarray
    posterior: PosteriorGrid
    exclusion: object
    lambda_bound: float
    data: np.ndarray
    files: dict = field(default_factory=dict)


def lambda_at_rc(curve, rc=RC_REFERENCE):
    """``lambda_c`` on the exclusion curve at ``rc`` (log-log interpolation)."""
    return float(curve.lam_at(rc))


def run_posterior(scenario, out_dir=None, exclusion=True):
    """Optimise controls, simulate data, update the prior and extract the 95% line.

    Writes ``prior.csv``, ``posterior.csv``, ``posterior.json``,
    ``exclusion.csv`` and ``landmarks.json`` into ``out_dir`` when given.
    """
    scenario, design = prepare(scenario)
    model = InterferometerModel(scenario.config, scenario.particle)
    grid = scenario.grid.build()
    family = model.family(grid)
    prior = build_prior(scenario, grid, family)
    data = simulate(scenario, model)
    digest = config_hash(scenario)
    post = posterior(data, prior, grid, family, seed=scenario.seed, config_hash=digest)
    curve = bound = None
    if exclusion:
        curve = exclusion_line(post, model.geometry, model.csl_table(grid.rc))
        bound = lambda_at_rc(curve) if grid.rc[0] <= RC_REFERENCE <= grid.rc[-1] else float("nan")
    run = PosteriorRun(scenario, design, model, prior, post, curve, bound, data)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        run.files["prior"] = out / "prior.csv"
        run.files["posterior"] = out / "posterior.csv"
        write_grid_csv(run.files["prior"], grid, prior)
        write_grid_csv(run.files["posterior"], grid, post.density)
        if curve is not None:
            run.files["exclusion"] = out / "exclusion.csv"
            write_curve_csv(run.files["exclusion"], curve)
        run.files["landmarks"] = out / "landmarks.json"
        write_json(run.files["landmarks"], landmarks())
        run.files["sidecar"] = out / "posterior.json"
        write_json(run.files["sidecar"], sidecar(run))
    return run


def sidecar(run):
    """Provenance and summary of a posterior run."""
    payload = {
        "tool": "talbotcsl",
        "version": __version__,
        "config_hash": config_hash(run.scenario),
        "config": dumps(run.scenario),
        "seed": run.scenario.seed,
        "n_points": run.posterior.n_points,
        "normalization": fmt17(run.posterior.mass()),
        "grid_shape": list(run.posterior.grid.shape),
        "density_measure": "linear lambda_c [1/s] x linear r_c [m]",
    }
    if run.design is not None:
        payload["design"] = {"phi0_rad": fmt17(run.design.controls.phi0),
                             "t2_s": fmt17(run.design.controls.t2),
                             "objective": fmt17(run.design.objective)}
    if run.exclusion is not None:
        payload["exclusion"] = {"confidence": run.exclusion.confidence,
                                "strength": fmt17(run.exclusion.strength),
                                "mass_below": fmt17(run.exclusion.mass),
                                "lambda_c_at_rc_1e-7_m": fmt17(run.lambda_bound)}
    return payload


# ---------------------------------------------------------------------------
# information and sweeps
# ---------------------------------------------------------------------------

def run_info(scenario, n_points=None, model=None):
    """Expected information for one scenario (controls optimised when requested)."""
    scenario, _ = prepare(scenario)
    model = InterferometerModel(scenario.config, scenario.particle) if model is None else model
    grid = scenario.grid.build()
    family = model.family(grid)
    prior = build_prior(scenario, grid, family)
    n = scenario.n_points if n_points is None else n_points
    truth = model.table(scenario.theta_true)
    return expected_information(family, grid, prior, n, scenario.m_iters, scenario.seed,
                                scenario.mode, truth=truth)


SWEEP_VARIABLES = ("mass", "pressure", "drift_rate", "N")


@dataclass(frozen=True)
class SweepSpec:
    """Values of one swept quantity.

    ``mass`` is in atomic mass units, ``pressure`` in hPa, ``drift_rate`` in
    m/s and ``N`` in points. With ``optimize`` the controls are re-optimised
    for every value.
    """

    variable: str
    values: tuple
    optimize: bool = True

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise InvalidConfigurationError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        vals = np.asarray(self.values, dtype=float)
        if vals.size == 0 or not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise InvalidConfigurationError("sweep values must be finite and positive")
        if self.variable == "N" and np.any(vals != np.round(vals)):
            raise InvalidConfigurationError("N values must be integers")


def sweep_point(scenario, variable, value):
    if variable == "mass":
        return scenario.replace(particle=replace(scenario.particle, mass=value * const.m_u))
    if variable == "pressure":
        return scenario.replace(config=scenario.config.with_pressure_hpa(value))
    if variable == "drift_rate":
        return scenario.replace(config=scenario.config.replace(drift_rate=value))
    return scenario.replace(n_points=int(value))


SWEEP_HEADER = "variable,value,N,M,mode,H_bits,delta_bits,seed,status"


def run_info_sweep(scenario, sweep, out_path=None):
    """Expected information at each sweep value; failures are recorded, not fatal.

    Returns a list of row dicts; with ``out_path`` they are also written as CSV.
    """
    rows = []
    for value in sweep.values:
        point = sweep_point(scenario, sweep.variable, value).replace(optimize=sweep.optimize)
        row = {"variable": sweep.variable, "value": float(value), "N": point.n_points,
               "M": point.m_iters, "mode": point.mode, "H_bits": float("nan"),
               "delta_bits": float("nan"), "seed": point.seed, "status": "ok"}
        try:
            res = run_info(point)
            row.update(H_bits=res.mean, delta_bits=res.delta, M=res.m_completed)
            if res.interrupted:
                row["status"] = "interrupted"
        except TalbotError as exc:
            row["status"] = f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        rows.append(row)
        if out_path is not None:
            write_sweep(out_path, rows)
    return rows


def write_sweep(path, rows):
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(",".join([r["variable"], fmt17(r["value"]), str(r["N"]), str(r["M"]), r["mode"],
                               fmt17(r["H_bits"]), fmt17(r["delta_bits"]), str(r["seed"]), r["status"]]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_info(out_dir, result, scenario):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    append_info_row(out / "info.csv", result)
    write_json(out / "info.json", {
        "tool": "talbotcsl", "version": __version__, "config_hash": config_hash(scenario),
        "config": dumps(scenario), **{k: (fmt17(v) if isinstance(v, float) else v)
                                      for k, v in result.row().items()},
        "m_requested": result.m_iters, "interrupted": result.interrupted})


def design_summary(scenario):
    """Optimised controls plus the grating pulse that realises them."""
    result = optimize_controls(scenario.config, scenario.particle, scenario.theta_ref)
    area, energy = grating_pulse(result.controls.phi0, scenario.config, scenario.particle)
    return {
        "phi0_rad": result.controls.phi0,
        "t2_s": result.controls.t2,
        "objective": result.objective,
        "visibility_sin": result.visibility_sin,
        "visibility_red": result.visibility_red,
        "spot_area_m2": area,
        "pulse_energy_j": energy,
        "theta_ref": {"lambda_c_per_s": scenario.theta_ref.lam, "r_c_m": scenario.theta_ref.rc},
    }


__all__ = ["run_posterior", "run_info", "run_info_sweep", "SweepSpec", "lambda_at_rc",
           "simulate", "prepare", "design_summary", "write_positions"]
