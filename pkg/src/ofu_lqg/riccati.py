"""Discrete algebraic Riccati solvers and optimal LQG controller synthesis.

Both equations are solved by fixed-point iteration of the Riccati map,
which doubles as the value iteration that the tests use as an independent
oracle. Residuals are checked by re-substitution, in spectral norm:

    control:  P = A' P A + C' Q C - A' P B (R + B' P B)^{-1} B' P A
    filter:   S = A S A' - A S C' (C S C' + sigma_z^2 I)^{-1} C S A' + sigma_w^2 I

The synthesis bundles the LQR gain, Kalman gain, posterior covariance,
the optimal average stage cost, and both closed-loop spectral radii.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, FeasibilityError
from .system import CostParams, LqgSystem, is_controllable, is_observable, spectral_radius

__all__ = [
    "ControllerSynthesis",
    "control_riccati_map",
    "filter_riccati_map",
    "solve_control_dare",
    "lqr_gain",
    "solve_filter_dare",
    "average_cost",
    "synthesize",
]

DARE_TARGET = 1e-12
DARE_ACCEPT = 1e-10
DARE_MAX_ITER = 100_000


@dataclass(frozen=True)
class ControllerSynthesis:
    """Optimal controller and filter data for one model.

    Attributes
    ----------
    P : ndarray
        Control Riccati solution (cost-to-go weight).
    K : ndarray
        LQR feedback gain; the control law is u = -K xhat.
    Sigma : ndarray
        Predictive state-estimation error covariance.
    Sigma_bar : ndarray
        Posterior error covariance after the measurement update.
    L : ndarray
        Steady-state Kalman gain.
    J_star : float
        Optimal average cost per stage.
    closed_loop_control_radius : float
        Spectral radius of A - B K.
    closed_loop_filter_radius : float
        Spectral radius of A - A L C.
    """

    P: np.ndarray
    K: np.ndarray
    Sigma: np.ndarray
    Sigma_bar: np.ndarray
    L: np.ndarray
    J_star: float
    closed_loop_control_radius: float
    closed_loop_filter_radius: float


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def control_riccati_map(P, A, B, CtQC, R):
    """One application of the control Riccati operator."""
    BtP = B.T @ P
    gain = np.linalg.solve(R + BtP @ B, BtP @ A)
    return _sym(A.T @ P @ A + CtQC - (BtP @ A).T @ gain)


def filter_riccati_map(S, A, C, sigma_w, sigma_z):
    """One application of the filter Riccati operator."""
    CS = C @ S
    gain = np.linalg.solve(CS @ C.T + sigma_z**2 * np.eye(C.shape[0]), CS @ A.T)
    return _sym(A @ S @ A.T - (CS @ A.T).T @ gain + sigma_w**2 * np.eye(A.shape[0]))


def _iterate(riccati_map, X0, label):
    X = X0
    for _ in range(DARE_MAX_ITER):
        X_next = riccati_map(X)
        residual = np.linalg.norm(X_next - X, 2)
        X = X_next
        if residual < DARE_TARGET:
            return X
    if residual <= DARE_ACCEPT:
        return X
    raise ConvergenceError(
        f"{label} Riccati iteration stalled at residual {residual:.3e}",
        residual=residual,
    )


def solve_control_dare(sys: LqgSystem, cost: CostParams) -> np.ndarray:
    """Positive semidefinite fixed point of the control Riccati map.

    Requires (A, B) controllable; convergence failure otherwise surfaces as
    :class:`ConvergenceError`.
    """
    if cost.Q.shape[0] != sys.m or cost.R.shape[0] != sys.p:
        raise FeasibilityError("cost dimensions do not match the system")
    if not is_controllable(sys.A, sys.B):
        raise FeasibilityError("(A, B) is not controllable")
    CtQC = _sym(sys.C.T @ cost.Q @ sys.C)
    return _iterate(
        lambda P: control_riccati_map(P, sys.A, sys.B, CtQC, cost.R), CtQC, "control"
    )


def lqr_gain(sys: LqgSystem, cost: CostParams, P: np.ndarray) -> np.ndarray:
    """Feedback gain (R + B' P B)^{-1} B' P A for a given Riccati solution."""
    BtP = sys.B.T @ P
    return np.linalg.solve(cost.R + BtP @ sys.B, BtP @ sys.A)


def solve_filter_dare(sys: LqgSystem):
    """Predictive covariance, posterior covariance, and Kalman gain.

    Returns (Sigma, Sigma_bar, L) with L = Sigma C' (C Sigma C' + sigma_z^2 I)^{-1}
    and Sigma_bar = Sigma - Sigma C' (C Sigma C' + sigma_z^2 I)^{-1} C Sigma,
    so that Sigma = A Sigma_bar A' + sigma_w^2 I.
    """
    if not is_observable(sys.A, sys.C):
        raise FeasibilityError("(A, C) is not observable")
    S0 = sys.sigma_w**2 * np.eye(sys.n)
    Sigma = _iterate(
        lambda S: filter_riccati_map(S, sys.A, sys.C, sys.sigma_w, sys.sigma_z),
        S0,
        "filter",
    )
    innov = sys.C @ Sigma @ sys.C.T + sys.sigma_z**2 * np.eye(sys.m)
    L = np.linalg.solve(innov, sys.C @ Sigma).T
    Sigma_bar = _sym(Sigma - L @ sys.C @ Sigma)
    return Sigma, Sigma_bar, L


def _stage_cost(sys, cost, P, Sigma, Sigma_bar):
    CtQC = sys.C.T @ cost.Q @ sys.C
    return float(
        np.trace(CtQC @ Sigma_bar)
        + np.trace(P @ (Sigma - Sigma_bar))
        + sys.sigma_z**2 * np.trace(cost.Q)
    )


def average_cost(sys: LqgSystem, cost: CostParams, synth: "ControllerSynthesis") -> float:
    """Optimal average stage cost.

    Closed form: tr(C' Q C Sigma_bar) + tr(P (Sigma - Sigma_bar))
    + sigma_z^2 tr(Q).
    """
    return _stage_cost(sys, cost, synth.P, synth.Sigma, synth.Sigma_bar)


def synthesize(sys: LqgSystem, cost: CostParams) -> ControllerSynthesis:
    """Full optimal synthesis for a controllable and observable model.

    Fails with :class:`FeasibilityError` when either closed loop
    (A - B K or A - A L C) has spectral radius >= 1.
    """
    P = solve_control_dare(sys, cost)
    K = lqr_gain(sys, cost, P)
    Sigma, Sigma_bar, L = solve_filter_dare(sys)
    control_radius = spectral_radius(sys.A - sys.B @ K)
    filter_radius = spectral_radius(sys.A - sys.A @ L @ sys.C)
    if control_radius >= 1 or filter_radius >= 1:
        raise FeasibilityError(
            "closed loop is not contractive: "
            f"rho(A-BK)={control_radius:.6f}, rho(A-ALC)={filter_radius:.6f}"
        )
    return ControllerSynthesis(
        P=P,
        K=K,
        Sigma=Sigma,
        Sigma_bar=Sigma_bar,
        L=L,
        J_star=_stage_cost(sys, cost, P, Sigma, Sigma_bar),
        closed_loop_control_radius=control_radius,
        closed_loop_filter_radius=filter_radius,
    )


def control_dare_residual(sys: LqgSystem, cost: CostParams, P: np.ndarray) -> float:
    """Spectral-norm re-substitution residual of a control Riccati solution."""
    CtQC = _sym(sys.C.T @ cost.Q @ sys.C)
    return float(np.linalg.norm(P - control_riccati_map(P, sys.A, sys.B, CtQC, cost.R), 2))


def filter_dare_residual(sys: LqgSystem, Sigma: np.ndarray) -> float:
    """Spectral-norm re-substitution residual of a filter Riccati solution."""
    return float(
        np.linalg.norm(
            Sigma - filter_riccati_map(Sigma, sys.A, sys.C, sys.sigma_w, sys.sigma_z), 2
        )
    )
