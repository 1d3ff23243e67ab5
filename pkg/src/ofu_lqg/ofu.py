"""Optimism in the face of uncertainty over the identified confidence set.

The feasible family intersects the parameter balls around the identified
center with the structural cuts: stability, controllability/observability,
an impulse-response energy budget, and closed-loop contractivity within a
margin. The near-optimal model is found by randomized multi-start search;
the center is always evaluated, so a well-posed center guarantees a
fallback selection.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import LqgControlError, ParameterError, SelectionError
from .riccati import ControllerSynthesis, synthesize
from .sysid import ConfidenceRadii, IdentifiedModel
from .system import (
    CostParams,
    LqgSystem,
    is_controllable,
    is_observable,
    markov_parameters,
    spectral_radius,
)

__all__ = [
    "ConfidenceSet",
    "CandidateEvaluation",
    "SelectionResult",
    "membership",
    "evaluate_candidate",
    "sample_candidate",
    "optimistic_select",
]


@dataclass(frozen=True)
class ConfidenceSet:
    """Identified center with radii and the structural feasibility cuts.

    ``kappa`` caps the Frobenius norm of a candidate's length-H impulse
    response; ``contractibility_margin`` is the ceiling accepted for both
    closed-loop spectral radii. Candidates inherit the (known) noise scales.
    """

    center: IdentifiedModel
    radii: ConfidenceRadii
    kappa: float
    contractibility_margin: float
    H: int
    sigma_w: float
    sigma_z: float

    def __post_init__(self):
        for name in ("g_radius", "beta_A", "beta_B", "beta_C"):
            val = getattr(self.radii, name)
            if not (np.isfinite(val) and val >= 0):
                raise ParameterError(f"radius {name} must be finite and nonnegative")
        if not self.kappa > 0:
            raise ParameterError("kappa must be positive")
        if not 0.0 < self.contractibility_margin < 1.0:
            raise ParameterError("contractibility margin must lie in (0, 1)")

    def center_system(self) -> LqgSystem:
        return self.center.to_system(self.sigma_w, self.sigma_z)


@dataclass(frozen=True)
class CandidateEvaluation:
    """Outcome of the feasibility cascade plus synthesis for one candidate."""

    model: LqgSystem
    synth: ControllerSynthesis | None
    J: float | None
    feasible: bool
    rejection_reason: str | None


@dataclass(frozen=True)
class SelectionResult:
    """Near-optimistic model with its synthesis and search bookkeeping."""

    model: LqgSystem
    synth: ControllerSynthesis
    J_tilde: float
    slack: float
    n_evaluated: int
    n_feasible: int
    rejections: dict


def _check_dims(candidate: LqgSystem, set_: ConfidenceSet):
    c = set_.center
    if (candidate.n, candidate.m, candidate.p) != (c.n, c.m, c.p):
        raise ParameterError(
            "candidate dimensions do not match the confidence-set center"
        )


def evaluate_candidate(
    candidate: LqgSystem, set_: ConfidenceSet, cost: CostParams
) -> CandidateEvaluation:
    """Run the feasibility cascade; synthesis failures become rejections.

    Cheap cuts come first (stability, parameter balls, structure, energy
    budget) so infeasible candidates rarely pay for a Riccati solve.
    """
    _check_dims(candidate, set_)
    center, radii = set_.center, set_.radii

    def reject(reason):
        return CandidateEvaluation(
            model=candidate, synth=None, J=None, feasible=False, rejection_reason=reason
        )

    if spectral_radius(candidate.A) >= 1.0:
        return reject("unstable")
    if np.linalg.norm(candidate.A - center.A_hat, 2) > radii.beta_A:
        return reject("ball_A")
    if np.linalg.norm(candidate.B - center.B_hat, 2) > radii.beta_B:
        return reject("ball_B")
    if np.linalg.norm(candidate.C - center.C_hat, 2) > radii.beta_C:
        return reject("ball_C")
    if not is_controllable(candidate.A, candidate.B):
        return reject("not_controllable")
    if not is_observable(candidate.A, candidate.C):
        return reject("not_observable")
    G = markov_parameters(candidate, set_.H)
    if G.frobenius_norm() > set_.kappa:
        return reject("kappa")
    try:
        synth = synthesize(candidate, cost)
    except LqgControlError:
        return reject("synthesis")
    if synth.closed_loop_control_radius > set_.contractibility_margin:
        return reject("contractibility_control")
    if synth.closed_loop_filter_radius > set_.contractibility_margin:
        return reject("contractibility_filter")
    return CandidateEvaluation(
        model=candidate,
        synth=synth,
        J=synth.J_star,
        feasible=True,
        rejection_reason=None,
    )


def membership(candidate: LqgSystem, set_: ConfidenceSet, cost: CostParams):
    """(feasible, reason) for one candidate; reason is 'ok' when feasible."""
    ev = evaluate_candidate(candidate, set_, cost)
    return ev.feasible, (ev.rejection_reason or "ok")


def _ball_perturbation(shape, radius: float, rng: np.random.Generator) -> np.ndarray:
    # Gaussian direction, uniform-in-radius scaling; radius 0 degenerates
    # to the zero perturbation.
    direction = rng.standard_normal(shape)
    scale = radius * rng.uniform()
    norm = np.linalg.norm(direction, 2)
    if norm == 0.0 or radius == 0.0:
        return np.zeros(shape)
    return direction * (scale / norm)


def sample_candidate(set_: ConfidenceSet, rng: np.random.Generator) -> LqgSystem:
    """Random model inside the parameter balls around the center.

    No feasibility filtering happens here; draw order is the A, B, C
    perturbations in turn (direction, then radius fraction).
    """
    center = set_.center
    A = center.A_hat + _ball_perturbation(center.A_hat.shape, set_.radii.beta_A, rng)
    B = center.B_hat + _ball_perturbation(center.B_hat.shape, set_.radii.beta_B, rng)
    C = center.C_hat + _ball_perturbation(center.C_hat.shape, set_.radii.beta_C, rng)
    return LqgSystem(A=A, B=B, C=C, sigma_w=set_.sigma_w, sigma_z=set_.sigma_z)


def optimistic_select(
    set_: ConfidenceSet,
    cost: CostParams,
    budget: int,
    slack: float,
    rng: np.random.Generator,
) -> SelectionResult:
    """Feasible model with the smallest average cost among sampled candidates.

    Evaluates the center plus ``budget - 1`` random candidates and returns
    the argmin (first hit on ties). ``slack`` is the tolerated gap to the
    set infimum and is recorded untouched; the returned cost is exact for
    the returned model. Raises :class:`SelectionError` with per-reason
    rejection counts when nothing is feasible.
    """
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    if slack < 0:
        raise ParameterError("slack must be nonnegative")
    rejections: Counter = Counter()
    best: CandidateEvaluation | None = None
    n_feasible = 0
    candidates = [set_.center_system()]
    candidates.extend(sample_candidate(set_, rng) for _ in range(budget - 1))
    for candidate in candidates:
        ev = evaluate_candidate(candidate, set_, cost)
        if not ev.feasible:
            rejections[ev.rejection_reason] += 1
            continue
        n_feasible += 1
        if best is None or ev.J < best.J:
            best = ev
    if best is None:
        raise SelectionError(
            f"no feasible candidate among {budget} evaluated", rejections=rejections
        )
    return SelectionResult(
        model=best.model,
        synth=best.synth,
        J_tilde=best.J,
        slack=slack,
        n_evaluated=budget,
        n_feasible=n_feasible,
        rejections=dict(rejections),
    )
