"""File formats: JSON for structured artifacts, CSV for time series.

Matrices serialize as row-major nested lists of numbers. Floats go through
Python's shortest round-tripping repr, so parse(serialize(x)) reproduces
the exact bit pattern, and rewriting the same data yields byte-identical
files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .harness import (
    Diagnostics,
    EnsembleSummary,
    ExpCommitConfig,
    RunResult,
    ThresholdReport,
)
from .ofu import SelectionResult
from .riccati import ControllerSynthesis
from .sysid import ConfidenceRadii, IdentifiedModel
from .system import CostParams, LqgSystem, Trajectory

__all__ = [
    "system_to_dict",
    "system_from_dict",
    "load_system",
    "save_system",
    "load_config",
    "save_trajectory",
    "load_trajectory",
    "save_synthesis",
    "save_identification",
    "save_run_result",
    "save_regret_csv",
    "save_ensemble_csv",
]


def _matrix(value):
    return np.asarray(value, dtype=float).tolist()


def system_to_dict(sys: LqgSystem) -> dict:
    return {
        "n": sys.n,
        "m": sys.m,
        "p": sys.p,
        "A": _matrix(sys.A),
        "B": _matrix(sys.B),
        "C": _matrix(sys.C),
        "sigma_w": sys.sigma_w,
        "sigma_z": sys.sigma_z,
    }


def system_from_dict(data: dict, context: str = "system") -> LqgSystem:
    try:
        sys = LqgSystem(
            A=np.asarray(data["A"], dtype=float),
            B=np.asarray(data["B"], dtype=float),
            C=np.asarray(data["C"], dtype=float),
            sigma_w=float(data["sigma_w"]),
            sigma_z=float(data["sigma_z"]),
        )
    except KeyError as exc:
        raise ValueError(f"{context}: missing field {exc.args[0]!r}") from exc
    for name in ("n", "m", "p"):
        if name in data and int(data[name]) != getattr(sys, name):
            raise ValueError(
                f"{context}: declared {name} = {data[name]} does not match the matrices"
            )
    return sys


def _read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc


def _write_json(path, payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def load_system(path) -> LqgSystem:
    return system_from_dict(_read_json(path), context=str(path))


def save_system(path, sys: LqgSystem):
    _write_json(path, system_to_dict(sys))


def _cost_from_dict(data: dict, context: str) -> CostParams:
    for name in ("Q", "R"):
        if name not in data:
            raise ValueError(f"{context}: missing cost matrix {name!r}")
    Q = np.atleast_2d(np.asarray(data["Q"], dtype=float))
    R = np.atleast_2d(np.asarray(data["R"], dtype=float))
    return CostParams(Q=Q, R=R)


def load_config(path) -> ExpCommitConfig:
    """Parse an ExpCommitConfig JSON file; unknown keys are rejected."""
    data = _read_json(path)
    context = str(path)
    known = {
        "T",
        "sigma_u",
        "delta",
        "n",
        "Q",
        "R",
        "T_exp",
        "H",
        "d1",
        "d2",
        "kappa",
        "contractibility_margin",
        "search_budget",
        "slack",
        "radii_mode",
        "c",
        "c_prime",
        "master_seed",
        "sigma_w",
        "sigma_z",
        "S",
        "compute_thresholds",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{context}: unknown config keys {sorted(unknown)}")
    for name in ("T", "sigma_u", "delta", "n"):
        if name not in data:
            raise ValueError(f"{context}: missing field {name!r}")
    cost = _cost_from_dict(data, context)
    kwargs = {
        "T": int(data["T"]),
        "sigma_u": float(data["sigma_u"]),
        "delta": float(data["delta"]),
        "n_declared": int(data["n"]),
        "cost": cost,
    }
    optional_int = ("T_exp", "H", "d1", "d2", "search_budget", "master_seed")
    optional_float = (
        "kappa",
        "contractibility_margin",
        "slack",
        "c",
        "c_prime",
        "sigma_w",
        "sigma_z",
        "S",
    )
    for name in optional_int:
        if name in data and data[name] is not None:
            kwargs[name] = int(data[name])
    for name in optional_float:
        if name in data and data[name] is not None:
            kwargs[name] = float(data[name])
    if "radii_mode" in data:
        kwargs["radii_mode"] = str(data["radii_mode"])
    if "compute_thresholds" in data:
        kwargs["compute_thresholds"] = bool(data["compute_thresholds"])
    return ExpCommitConfig(**kwargs)


def save_trajectory(path, traj: Trajectory):
    """CSV with header t, u_0..u_{p-1}, y_0..y_{m-1}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    p = traj.inputs.shape[1]
    m = traj.outputs.shape[1]
    header = ["t"] + [f"u_{i}" for i in range(p)] + [f"y_{i}" for i in range(m)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(traj.length):
            row = [t] + [repr(float(v)) for v in traj.inputs[t]] + [
                repr(float(v)) for v in traj.outputs[t]
            ]
            writer.writerow(row)


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    if not header or header[0] != "t":
        raise ValueError(f"{path}: expected a trajectory CSV starting with 't'")
    p = sum(1 for name in header if name.startswith("u_"))
    m = sum(1 for name in header if name.startswith("y_"))
    if p < 1 or m < 1 or len(header) != 1 + p + m:
        raise ValueError(f"{path}: malformed trajectory header {header}")
    if not rows:
        raise ValueError(f"{path}: trajectory is empty")
    inputs = np.array([[float(v) for v in row[1 : 1 + p]] for row in rows])
    outputs = np.array([[float(v) for v in row[1 + p :]] for row in rows])
    return Trajectory(inputs=inputs, outputs=outputs)


def synthesis_to_dict(synth: ControllerSynthesis) -> dict:
    return {
        "P": _matrix(synth.P),
        "K": _matrix(synth.K),
        "Sigma": _matrix(synth.Sigma),
        "Sigma_bar": _matrix(synth.Sigma_bar),
        "L": _matrix(synth.L),
        "J_star": synth.J_star,
        "closed_loop_control_radius": synth.closed_loop_control_radius,
        "closed_loop_filter_radius": synth.closed_loop_filter_radius,
    }


def save_synthesis(path, synth: ControllerSynthesis):
    _write_json(path, synthesis_to_dict(synth))


def identification_to_dict(ident: IdentifiedModel, radii: ConfidenceRadii) -> dict:
    return {
        "model": {
            "A": _matrix(ident.A_hat),
            "B": _matrix(ident.B_hat),
            "C": _matrix(ident.C_hat),
            "n": ident.n,
            "m": ident.m,
            "p": ident.p,
        },
        "singular_values": [float(s) for s in ident.singular_values],
        "conditioning_ratio": _json_float(ident.conditioning_ratio),
        "radii": radii_to_dict(radii),
    }


def radii_to_dict(radii: ConfidenceRadii) -> dict:
    return {
        "g_radius": radii.g_radius,
        "beta_A": radii.beta_A,
        "beta_B": radii.beta_B,
        "beta_C": radii.beta_C,
        "mode": radii.mode,
    }


def _json_float(value: float):
    # JSON has no inf; the conditioning ratio is inf for exactly rank-n data.
    return value if np.isfinite(value) else None


def save_identification(path, ident: IdentifiedModel, radii: ConfidenceRadii):
    _write_json(path, identification_to_dict(ident, radii))


def selection_to_dict(selection: SelectionResult) -> dict:
    return {
        "model": system_to_dict(selection.model),
        "synthesis": synthesis_to_dict(selection.synth),
        "J_tilde": selection.J_tilde,
        "slack": selection.slack,
        "n_evaluated": selection.n_evaluated,
        "n_feasible": selection.n_feasible,
        "rejections": selection.rejections,
    }


def _thresholds_to_dict(report: ThresholdReport | None):
    if report is None:
        return None
    return {
        "T_G": report.T_G,
        "T_B": report.T_B,
        "T_A": report.T_A,
        "T_N": report.T_N,
        "T_M": report.T_M,
        "T_L": report.T_L,
        "T_alpha": report.T_alpha,
        "T_beta": report.T_beta,
        "T_gamma": report.T_gamma,
        "T_0": report.T_0,
        "user_constants": report.user_constants,
    }


def diagnostics_to_dict(diag: Diagnostics) -> dict:
    return {
        "max_state_estimate_norm": diag.max_state_estimate_norm,
        "max_output_norm": diag.max_output_norm,
        "true_in_set": diag.true_in_set,
        "selection_rejections": diag.selection_rejections,
        "thresholds": _thresholds_to_dict(diag.thresholds),
    }


def run_result_to_dict(result: RunResult) -> dict:
    """Structured view of a run; the cost series lives in the regret CSV."""
    return {
        "J_star_true": result.J_star_true,
        "selected_J": result.selected_J,
        "final_regret": result.final_regret,
        "T": int(result.costs.shape[0]),
        "identification": identification_to_dict(result.identified, result.radii),
        "selection": selection_to_dict(result.selection),
        "diagnostics": diagnostics_to_dict(result.diagnostics),
    }


def save_run_result(path, result: RunResult):
    _write_json(path, run_result_to_dict(result))


def save_regret_csv(path, result: RunResult):
    """CSV with header t, cost, cumulative_regret."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "cost", "cumulative_regret"])
        for t in range(result.costs.shape[0]):
            writer.writerow(
                [t, repr(float(result.costs[t])), repr(float(result.cumulative_regret[t]))]
            )


def save_ensemble_csv(path, summary: EnsembleSummary):
    """CSV with header t, mean, median, q10, q90."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mean", "median", "q10", "q90"])
        for t in range(summary.mean.shape[0]):
            writer.writerow(
                [
                    t,
                    repr(float(summary.mean[t])),
                    repr(float(summary.median[t])),
                    repr(float(summary.q10[t])),
                    repr(float(summary.q90[t])),
                ]
            )
