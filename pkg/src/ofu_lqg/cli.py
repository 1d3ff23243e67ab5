"""Command-line front end.

Subcommands: simulate (excitation trajectory to CSV), identify (trajectory
CSV to model + radii JSON), dare (controller synthesis JSON), run (one run
or an ensemble), sweep (ensembles over several horizons plus a regret
slope fit). Exit codes: 0 success, 1 usage or parse failure, 2 numerical
or feasibility failure.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import io
from .errors import LqgControlError
from .harness import fit_regret_exponent, monte_carlo, run_expcommit
from .riccati import synthesize
from .system import gaussian_excitation_rollout

USAGE_EXIT = 1
NUMERICAL_EXIT = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofu-lqg",
        description="Simulate and learn partially observable linear-quadratic systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--system", required=True, help="system JSON file")
        p.add_argument(
            "--config", required=config_required, help="run configuration JSON file"
        )
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")

    p_sim = sub.add_parser("simulate", help="roll out Gaussian excitation to CSV")
    common(p_sim, config_required=False)
    p_sim.add_argument("--T", type=int, default=None, help="number of steps")
    p_sim.add_argument(
        "--sigma-u", type=float, default=None, help="excitation std (default 1.0)"
    )

    p_id = sub.add_parser("identify", help="identify a model from a trajectory CSV")
    common(p_id)
    p_id.add_argument("--trajectory", required=True, help="trajectory CSV file")
    p_id.add_argument("--radii-mode", choices=["oracle", "plug_in"], default=None)

    p_dare = sub.add_parser("dare", help="optimal controller synthesis to JSON")
    common(p_dare)

    p_run = sub.add_parser("run", help="one seeded run or a trial ensemble")
    common(p_run)
    p_run.add_argument("--trials", type=int, default=1)
    p_run.add_argument("--radii-mode", choices=["oracle", "plug_in"], default=None)

    p_sweep = sub.add_parser("sweep", help="ensembles over horizons plus a slope fit")
    common(p_sweep)
    p_sweep.add_argument(
        "--T",
        type=int,
        action="append",
        required=True,
        help="horizon, repeatable; one ensemble per value",
    )
    p_sweep.add_argument("--trials", type=int, default=8)
    p_sweep.add_argument("--radii-mode", choices=["oracle", "plug_in"], default=None)
    return parser


def _load_inputs(args, T_override=None, radii_mode=None):
    from dataclasses import replace

    system = io.load_system(args.system)
    config = io.load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if T_override is not None:
        config = replace(config, T=int(T_override), T_exp=None, slack=None)
    if radii_mode is not None:
        config = replace(config, radii_mode=radii_mode)
    return system, config


def _cmd_simulate(args) -> int:
    system = io.load_system(args.system)
    sigma_u = args.sigma_u
    T = args.T
    seed = args.seed
    if args.config:
        config = io.load_config(args.config)
        sigma_u = config.sigma_u if sigma_u is None else sigma_u
        T = config.T_exp if T is None else T
        seed = config.master_seed if seed is None else seed
    sigma_u = 1.0 if sigma_u is None else sigma_u
    seed = 0 if seed is None else seed
    if T is None:
        raise ValueError("simulate needs --T or a config file providing T_exp")
    rng = np.random.default_rng(seed)
    traj, _ = gaussian_excitation_rollout(system, sigma_u, T, rng)
    io.save_trajectory(Path(args.out) / "trajectory.csv", traj)
    return 0


def _cmd_identify(args) -> int:
    from .harness import identify

    system, config = _load_inputs(args, radii_mode=args.radii_mode)
    traj = io.load_trajectory(args.trajectory)
    ident, radii = identify(traj, config, oracle_sys=system)
    io.save_identification(Path(args.out) / "identified.json", ident, radii)
    return 0


def _cmd_dare(args) -> int:
    system, config = _load_inputs(args)
    synth = synthesize(system, config.cost)
    io.save_synthesis(Path(args.out) / "synthesis.json", synth)
    return 0


def _cmd_run(args) -> int:
    system, config = _load_inputs(args, radii_mode=args.radii_mode)
    out = Path(args.out)
    if args.trials <= 1:
        result = run_expcommit(system, config)
        io.save_run_result(out / "run.json", result)
        io.save_regret_csv(out / "regret.csv", result)
    else:
        summary = monte_carlo(system, config, args.trials)
        io.save_ensemble_csv(out / "ensemble.csv", summary)
    return 0


def _cmd_sweep(args) -> int:
    out = Path(args.out)
    points = []
    for T in args.T:
        system, config = _load_inputs(args, T_override=T, radii_mode=args.radii_mode)
        summary = monte_carlo(system, config, args.trials)
        io.save_ensemble_csv(out / f"ensemble_T{T}.csv", summary)
        points.append((T, summary.final_median_regret))
    slope, intercept, r_squared = fit_regret_exponent(points)
    payload = {
        "points": [{"T": T, "final_median_regret": r} for T, r in points],
        "slope": slope,
        "intercept": intercept,
        "r_squared": r_squared,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "slope.json").write_text(json.dumps(payload, indent=2) + "\n")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "identify": _cmd_identify,
    "dare": _cmd_dare,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_EXIT if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except LqgControlError as exc:
        _sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return NUMERICAL_EXIT
    except (ValueError, OSError) as exc:
        _sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return USAGE_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
