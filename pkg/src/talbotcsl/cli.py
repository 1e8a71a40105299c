"""Command-line entry point.

Exit codes: 0 on success, 2 for an invalid configuration, 3 for a numerical
failure.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .bayes import InterferometerModel, PosteriorGrid, exclusion_line
from .errors import InvalidConfigurationError, NumericalFailureError, TalbotDomainWarning, TalbotError
from .io import GridSpec, fmt17, load, loads, maqro_preset, read_grid_csv, save, write_curve_csv, write_json, write_positions
from .pipeline import (
    SweepSpec,
    design_summary,
    lambda_at_rc,
    prepare,
    run_info,
    run_info_sweep,
    run_posterior,
    simulate,
    write_info,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

EXTENDED_SWEEPS = {
    "mass": tuple(np.logspace(7, 10, 13)),
    "pressure": (1e-16, 1e-15, 1e-14, 1e-13),
    "drift_rate": (1e-11, 1e-10, 1e-9, 1e-8),
    "N": (100, 300, 1000, 3000, 10000, 30000),
}
DESK_SWEEPS = {
    "mass": (1e7, 1e8, 1e9),
    "pressure": (1e-16, 1e-15, 1e-14, 1e-13),
    "drift_rate": (1e-10, 1e-9),
    "N": (300, 3000),
}


def _common(p):
    p.add_argument("--config", type=Path, help="scenario INI file (default: MAQRO preset, 1e8 u)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--n-points", type=int, help="arrival positions per data set")
    p.add_argument("--mc-iters", type=int, help="Monte-Carlo realisations")
    p.add_argument("--prior", help="mdip or experimental:PATH")
    p.add_argument("--extended", action="store_true",
                   help="allow long runs: full 120x120 grid and full sweep value lists")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="talbotcsl", description="Talbot interferometry simulation and CSL inference.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="emit arrival positions")
    _common(p)
    p = sub.add_parser("posterior", help="posterior grid, 95%% line and landmarks")
    _common(p)
    p = sub.add_parser("exclusion", help="95%% exclusion line from a posterior run")
    _common(p)
    p.add_argument("--from-run", type=Path, help="directory of a previous posterior run")
    p.add_argument("--confidence", type=float, default=0.95)
    p = sub.add_parser("info", help="expected information gain")
    _common(p)
    p.add_argument("--mode", choices=("prior-predictive", "conditioned-on-theta0"))
    p = sub.add_parser("sweep", help="expected information over a swept quantity")
    _common(p)
    p.add_argument("--variable", required=True, choices=("mass", "pressure", "drift_rate", "N"))
    p.add_argument("--values", type=float, nargs="+",
                   help="values (mass in u, pressure in hPa, drift in m/s)")
    p.add_argument("--fixed-controls", action="store_true", help="do not re-optimise per value")
    p = sub.add_parser("design", help="optimise phi0 and t2 only")
    _common(p)
    p = sub.add_parser("preset", help="write the MAQRO preset as a scenario file")
    p.add_argument("--mass-u", type=float, default=1e8)
    p.add_argument("--out", type=Path, default=Path("maqro.ini"))
    return parser


def scenario_from_args(args):
    scenario = load(args.config) if args.config else maqro_preset()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.n_points is not None:
        changes["n_points"] = args.n_points
    if args.mc_iters is not None:
        changes["m_iters"] = args.mc_iters
    if args.prior is not None:
        changes["prior"] = args.prior
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if not args.extended and args.config is None:
        changes["grid"] = GridSpec(shape=(80, 80))
    return scenario.replace(**changes)


def _record_inputs(out, scenario):
    out.mkdir(parents=True, exist_ok=True)
    save(scenario, out / "scenario.ini")


def cmd_simulate(args):
    scenario, _ = prepare(scenario_from_args(args))
    x = simulate(scenario)
    _record_inputs(args.out, scenario)
    write_positions(args.out / "positions.csv", x)
    print(f"wrote {x.size} positions to {args.out / 'positions.csv'}")


def cmd_posterior(args):
    scenario = scenario_from_args(args)
    _record_inputs(args.out, scenario)
    run = run_posterior(scenario, args.out)
    print(f"below-curve mass {run.exclusion.mass:.4f}; "
          f"lambda_c bound at r_c = 1e-7 m: {run.lambda_bound:.4e} 1/s")


def cmd_exclusion(args):
    if args.from_run is None:
        scenario = scenario_from_args(args)
        _record_inputs(args.out, scenario)
        run = run_posterior(scenario, args.out)
        curve, bound = run.exclusion, run.lambda_bound
    else:
        meta = json.loads((args.from_run / "posterior.json").read_text())
        scenario = loads(meta["config"])
        lrc, llam, density = read_grid_csv(args.from_run / "posterior.csv")
        grid = scenario.grid.build()
        if not (np.allclose(np.log10(grid.rc), lrc) and np.allclose(np.log10(grid.lam), llam)):
            raise InvalidConfigurationError("posterior grid does not match its embedded configuration")
        model = InterferometerModel(scenario.config, scenario.particle)
        with np.errstate(divide="ignore"):
            log_density = np.log(density)
        post = PosteriorGrid(grid, density, log_density, meta["n_points"], meta["seed"], meta["config_hash"])
        curve = exclusion_line(post, model.geometry, model.csl_table(grid.rc), confidence=args.confidence)
        bound = lambda_at_rc(curve)
        args.out.mkdir(parents=True, exist_ok=True)
        write_curve_csv(args.out / "exclusion.csv", curve)
    write_json(args.out / "exclusion.json", {"confidence": curve.confidence, "strength": fmt17(curve.strength),
                                             "mass_below": fmt17(curve.mass),
                                             "lambda_c_at_rc_1e-7_m": fmt17(bound)})
    print(f"lambda_c bound at r_c = 1e-7 m: {bound:.4e} 1/s (mass below {curve.mass:.4f})")


def cmd_info(args):
    scenario = scenario_from_args(args)
    _record_inputs(args.out, scenario)
    result = run_info(scenario)
    write_info(args.out, result, scenario)
    print(f"<H> = {result.mean:.4f} +- {result.delta:.4f} bits (N={result.n_points}, M={result.m_completed})")


def cmd_sweep(args):
    scenario = scenario_from_args(args)
    _record_inputs(args.out, scenario)
    values = args.values or (EXTENDED_SWEEPS if args.extended else DESK_SWEEPS)[args.variable]
    spec = SweepSpec(args.variable, tuple(values), optimize=not args.fixed_controls)
    rows = run_info_sweep(scenario, spec, args.out / f"sweep_{args.variable}.csv")
    for r in rows:
        print(f"{r['variable']}={r['value']:.4g}: <H> = {r['H_bits']:.4f} +- {r['delta_bits']:.4f} bits [{r['status']}]")


def cmd_design(args):
    scenario = scenario_from_args(args)
    summary = design_summary(scenario)
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "design.json", {k: (fmt17(v) if isinstance(v, float) else v)
                                          for k, v in summary.items()})
    print(f"phi0* = {summary['phi0_rad']:.6f} rad, t2* = {summary['t2_s']:.6f} s, "
          f"objective {summary['objective']:.6f}")


def cmd_preset(args):
    save(maqro_preset(args.mass_u), args.out)
    print(f"wrote {args.out}")


COMMANDS = {"simulate": cmd_simulate, "posterior": cmd_posterior, "exclusion": cmd_exclusion,
            "info": cmd_info, "sweep": cmd_sweep, "design": cmd_design, "preset": cmd_preset}


def main(argv=None):
    args = build_parser().parse_args(argv)
    # appended so that filters set by a caller keep precedence
    warnings.filterwarnings("once", category=TalbotDomainWarning, append=True)
    warnings.formatwarning = lambda message, category, *rest, **kw: f"warning: {message}\n"
    try:
        COMMANDS[args.command](args)
    except (InvalidConfigurationError, ValueError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailureError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TalbotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
