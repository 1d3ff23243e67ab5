"""Partially observable linear-Gaussian plant: types, simulation, structure.

The plant is

    x_{t+1} = A x_t + B u_t + w_t,   w_t ~ N(0, sigma_w^2 I)
    y_t     = C x_t + z_t,           z_t ~ N(0, sigma_z^2 I)

with the output emitted from the pre-transition state. All matrices are
dense float64; dimensions stay small (n, m, p up to a few tens) in every
intended experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    ParameterError,
    UnstableSystemError,
)
from ._kernels import open_loop_rollout

__all__ = [
    "LqgSystem",
    "CostParams",
    "MarkovParams",
    "HankelMatrix",
    "Trajectory",
    "StructuralReport",
    "spectral_radius",
    "phi_of_a",
    "is_controllable",
    "is_observable",
    "check_structural",
    "markov_parameters",
    "noise_markov_parameters",
    "build_hankel",
    "steady_state_covariance",
    "simulate_step",
    "rollout",
]

RANK_TOL = 1e-10
LYAPUNOV_TOL = 1e-12
LYAPUNOV_MAX_ITER = 100_000


def _as_matrix(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class LqgSystem:
    """Plant matrices plus isotropic noise scales.

    Attributes
    ----------
    A, B, C : ndarray
        State transition (n x n), input (n x p), and output (m x n) maps.
    sigma_w, sigma_z : float
        Process and measurement noise standard deviations, both > 0.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sigma_w: float
    sigma_z: float

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        if min(n, B.shape[1], C.shape[0]) < 1:
            raise DimensionError("all dimensions must be at least 1")
        for arr, name in ((A, "A"), (B, "B"), (C, "C")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.sigma_w > 0 and math.isfinite(self.sigma_w)):
            raise ParameterError("sigma_w must be positive and finite")
        if not (self.sigma_z > 0 and math.isfinite(self.sigma_z)):
            raise ParameterError("sigma_z must be positive and finite")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class CostParams:
    """Quadratic stage-cost weights: output weight Q (PSD), input weight R (PD)."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise DimensionError("Q and R must be square")
        Q = 0.5 * (Q + Q.T)
        R = 0.5 * (R + R.T)
        if np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ParameterError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ParameterError("R must be positive definite")
        Q.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class MarkovParams:
    """Length-H impulse response [0, CB, CAB, ..., C A^{H-2} B] as an m x Hp row block matrix."""

    G: np.ndarray
    H: int
    m: int
    p: int

    def __post_init__(self):
        G = _as_matrix(self.G, "G")
        if self.H < 1:
            raise ParameterError("H must be >= 1")
        if G.shape != (self.m, self.H * self.p):
            raise DimensionError(
                f"G must be {self.m} x {self.H * self.p}, got {G.shape}"
            )
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    def block(self, i: int) -> np.ndarray:
        """The i-th m x p block, 0-indexed (block 0 is the zero feedthrough)."""
        if not 0 <= i < self.H:
            raise IndexError(f"block index {i} outside [0, {self.H})")
        return self.G[:, i * self.p : (i + 1) * self.p]

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.G, "fro"))


@dataclass(frozen=True)
class HankelMatrix:
    """Block Hankel rearrangement of a Markov parameter matrix.

    Block (i, j), 0-indexed, holds impulse-response block i + j + 1, so an
    exact order-n system with d1, d2 >= n yields a rank-n matrix.
    """

    data: np.ndarray
    d1: int
    d2: int
    m: int
    p: int

    def __post_init__(self):
        data = _as_matrix(self.data, "data")
        if data.shape != (self.m * self.d1, self.p * (self.d2 + 1)):
            raise DimensionError(
                f"Hankel data must be {self.m * self.d1} x {self.p * (self.d2 + 1)}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.data, compute_uv=False)


@dataclass(frozen=True)
class Trajectory:
    """Recorded input/output (and optionally state) sequences of equal length."""

    inputs: np.ndarray
    outputs: np.ndarray
    states: np.ndarray | None = None

    def __post_init__(self):
        inputs = _as_matrix(self.inputs, "inputs")
        outputs = _as_matrix(self.outputs, "outputs")
        if inputs.shape[0] != outputs.shape[0]:
            raise DimensionError("inputs and outputs must have equal length")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        if self.states is not None:
            states = _as_matrix(self.states, "states")
            if states.shape[0] != inputs.shape[0]:
                raise DimensionError("states must match trajectory length")
            object.__setattr__(self, "states", states)

    @property
    def length(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class StructuralReport:
    """Stability/excitability summary of a plant at a given horizon."""

    rho: float
    phi: float
    controllable: bool
    observable: bool
    kappa: float


def spectral_radius(A) -> float:
    """Largest absolute eigenvalue of a square matrix."""
    A = _as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {A.shape}")
    return float(np.abs(np.linalg.eigvals(A)).max())


def phi_of_a(A, tau_max: int = 200) -> float:
    """Finite-window estimate of the transient growth factor of a stable A.

    Returns max over tau in [0, tau_max] of ||A^tau||_2 / rho(A)^tau. The
    true quantity is a supremum over all tau; for diagonalizable A the
    maximizing tau is small, so the default window is ample, but the result
    is a lower bound in general. A nilpotent A (rho = 0) is handled by
    reporting max ||A^tau||_2 over the tau with A^tau != 0.
    """
    A = _as_matrix(A, "A")
    if tau_max < 1:
        raise ParameterError("tau_max must be >= 1")
    rho = spectral_radius(A)
    if rho >= 1:
        raise UnstableSystemError(f"phi is defined for rho(A) < 1, got rho = {rho}")
    best = 1.0  # tau = 0 term
    power = np.eye(A.shape[0])
    scale = 1.0
    for _ in range(1, tau_max + 1):
        power = power @ A
        norm = np.linalg.norm(power, 2)
        if rho == 0.0:
            if norm == 0.0:
                break
            best = max(best, norm)
            continue
        scale *= rho
        best = max(best, norm / scale)
    return float(best)


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A: np.ndarray, C: np.ndarray, depth: int | None = None) -> np.ndarray:
    depth = A.shape[0] if depth is None else depth
    blocks = [C]
    for _ in range(depth - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def _full_rank(M: np.ndarray, rank: int, tol: float = RANK_TOL) -> bool:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size < rank or s[0] == 0.0:
        return False
    return bool(s[rank - 1] > tol * s[0])


def is_controllable(A: np.ndarray, B: np.ndarray, tol: float = RANK_TOL) -> bool:
    return _full_rank(controllability_matrix(A, B), A.shape[0], tol)


def is_observable(A: np.ndarray, C: np.ndarray, tol: float = RANK_TOL) -> bool:
    return _full_rank(observability_matrix(A, C), A.shape[0], tol)


def check_structural(sys: LqgSystem, H: int, tau_max: int = 200, tol: float = RANK_TOL) -> StructuralReport:
    """Spectral radius, transient factor, rank tests, and impulse-response norm.

    Rank decisions use singular values above ``tol * sigma_max``. For an
    unstable A the transient factor is reported as inf.
    """
    rho = spectral_radius(sys.A)
    phi = phi_of_a(sys.A, tau_max) if rho < 1 else math.inf
    G = markov_parameters(sys, H)
    return StructuralReport(
        rho=rho,
        phi=phi,
        controllable=is_controllable(sys.A, sys.B, tol),
        observable=is_observable(sys.A, sys.C, tol),
        kappa=G.frobenius_norm(),
    )


def markov_parameters(sys: LqgSystem, H: int) -> MarkovParams:
    """Input-to-output impulse response [0, CB, CAB, ..., C A^{H-2} B]."""
    if H < 1:
        raise ParameterError("H must be >= 1")
    G = np.zeros((sys.m, H * sys.p))
    CAk = sys.C.copy()
    for i in range(1, H):
        G[:, i * sys.p : (i + 1) * sys.p] = CAk @ sys.B
        CAk = CAk @ sys.A
    return MarkovParams(G=G, H=H, m=sys.m, p=sys.p)


def noise_markov_parameters(sys: LqgSystem, H: int) -> np.ndarray:
    """Process-noise-to-output impulse response [0, C, CA, ..., C A^{H-2}]."""
    if H < 1:
        raise ParameterError("H must be >= 1")
    F = np.zeros((sys.m, H * sys.n))
    CAk = sys.C.copy()
    for i in range(1, H):
        F[:, i * sys.n : (i + 1) * sys.n] = CAk
        CAk = CAk @ sys.A
    return F


def build_hankel(G: MarkovParams, d1: int, d2: int) -> HankelMatrix:
    """Stack impulse-response blocks so block (i, j) is block i + j + 1 of G."""
    if d1 < 1 or d2 < 1:
        raise ParameterError("d1 and d2 must be positive")
    if d1 + d2 + 1 != G.H:
        raise DimensionError(f"need d1 + d2 + 1 == H, got {d1} + {d2} + 1 != {G.H}")
    m, p = G.m, G.p
    data = np.empty((m * d1, p * (d2 + 1)))
    for i in range(d1):
        data[i * m : (i + 1) * m] = G.G[:, (i + 1) * p : (i + d2 + 2) * p]
    return HankelMatrix(data=data, d1=d1, d2=d2, m=m, p=p)


def steady_state_covariance(sys: LqgSystem, sigma_u: float) -> np.ndarray:
    """Stationary state covariance under i.i.d. N(0, sigma_u^2 I) inputs.

    Solves X = A X A' + sigma_w^2 I + sigma_u^2 B B' by fixed-point
    iteration to a spectral-norm residual below 1e-12.
    """
    if sigma_u < 0:
        raise ParameterError("sigma_u must be nonnegative")
    rho = spectral_radius(sys.A)
    if rho >= 1:
        raise UnstableSystemError(
            f"steady-state covariance needs rho(A) < 1, got {rho}"
        )
    A = sys.A
    forcing = sys.sigma_w**2 * np.eye(sys.n) + sigma_u**2 * (sys.B @ sys.B.T)
    X = forcing.copy()
    for _ in range(LYAPUNOV_MAX_ITER):
        X_next = A @ X @ A.T + forcing
        residual = np.linalg.norm(X_next - X, 2)
        X = X_next
        if residual < LYAPUNOV_TOL:
            return 0.5 * (X + X.T)
    raise ConvergenceError(
        f"Lyapunov iteration did not reach {LYAPUNOV_TOL} in {LYAPUNOV_MAX_ITER} steps",
        residual=residual,
    )


def simulate_step(sys: LqgSystem, x, u, rng: np.random.Generator):
    """One plant step: returns (x_next, y) with y read off the current state.

    The process noise draw precedes the measurement noise draw, so a fixed
    generator state reproduces the step exactly.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionError(f"state must have shape ({sys.n},), got {x.shape}")
    if u.shape != (sys.p,):
        raise DimensionError(f"input must have shape ({sys.p},), got {u.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise ParameterError("state and input must be finite")
    w = sys.sigma_w * rng.standard_normal(sys.n)
    z = sys.sigma_z * rng.standard_normal(sys.m)
    x_next = sys.A @ x + sys.B @ u + w
    y = sys.C @ x + z
    return x_next, y


def rollout(sys: LqgSystem, policy, T: int, rng: np.random.Generator) -> Trajectory:
    """Simulate T steps from x_0 = 0 under an output-feedback policy.

    ``policy(t, y_history, u_history)`` is called once per step with the
    outputs up to and including y_t and the inputs up to u_{t-1}, and must
    return the p-dimensional input u_t. All process noise is drawn up front
    (w block, then z block) so the trajectory is a pure function of the
    generator state.
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    w = sys.sigma_w * rng.standard_normal((T, sys.n))
    z = sys.sigma_z * rng.standard_normal((T, sys.m))
    xs = np.zeros((T, sys.n))
    ys = np.empty((T, sys.m))
    us = np.empty((T, sys.p))
    x = np.zeros(sys.n)
    y_hist: list[np.ndarray] = []
    u_hist: list[np.ndarray] = []
    for t in range(T):
        xs[t] = x
        y = sys.C @ x + z[t]
        ys[t] = y
        y_hist.append(y)
        u = np.asarray(policy(t, y_hist, u_hist), dtype=float)
        if u.shape != (sys.p,):
            raise DimensionError(
                f"policy returned shape {u.shape}, expected ({sys.p},)"
            )
        us[t] = u
        u_hist.append(u)
        x = sys.A @ x + sys.B @ u + w[t]
    return Trajectory(inputs=us, outputs=ys, states=xs)


def gaussian_excitation_rollout(
    sys: LqgSystem, sigma_u: float, T: int, rng: np.random.Generator
):
    """Fast open-loop rollout with i.i.d. N(0, sigma_u^2 I) inputs.

    Draw order is inputs, process noise, measurement noise. Returns the
    trajectory plus the post-run state x_T (the hand-off state for a
    subsequent closed-loop phase).
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    if sigma_u < 0:
        raise ParameterError("sigma_u must be nonnegative")
    u = sigma_u * rng.standard_normal((T, sys.p))
    w = sys.sigma_w * rng.standard_normal((T, sys.n))
    z = sys.sigma_z * rng.standard_normal((T, sys.m))
    xs, ys = open_loop_rollout(sys.A, sys.B, sys.C, u, w, z)
    return Trajectory(inputs=u, outputs=ys, states=xs[:-1]), xs[-1]
