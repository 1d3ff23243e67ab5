"""Identification of the plant from an excitation trajectory.

Pipeline: stack the input history windows into a regression, solve the
least-squares impulse-response estimate, realize a state-space model with
the Ho-Kalman algorithm, then attach high-probability error radii for the
impulse response and the realized parameter blocks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    IllPosedRegressionError,
    InsufficientDataError,
    OrderDeficiencyError,
    ParameterError,
)
from .system import (
    HankelMatrix,
    LqgSystem,
    MarkovParams,
    Trajectory,
    build_hankel,
    noise_markov_parameters,
    observability_matrix,
    phi_of_a,
    spectral_radius,
    steady_state_covariance,
)

__all__ = [
    "RegressionData",
    "NoiseBoundTerms",
    "IdentifiedModel",
    "ConfidenceRadii",
    "assemble_regression",
    "least_squares_markov",
    "ho_kalman",
    "effective_std",
    "noise_terms",
    "confidence_radii",
]

SV_CONDITION_WARN = 10.0
ORDER_SV_FLOOR = 1e-10


@dataclass(frozen=True)
class RegressionData:
    """Stacked regression of outputs on reversed input windows.

    Row k of U is [u_{H-1+k}', u_{H-2+k}', ..., u_k'] (0-indexed time), and
    row k of Y is y_{H-1+k}, for k = 0 .. N-1 with N = T - H + 1.
    """

    U: np.ndarray
    Y: np.ndarray
    N: int
    H: int


@dataclass(frozen=True)
class NoiseBoundTerms:
    """Scale factors entering the impulse-response error bound.

    R_z, R_w, R_e bound the measurement-noise, process-noise, and state
    truncation contributions; sigma_e is the effective standard deviation
    of the truncation term and N_w the burn-in sample count. c and c_prime
    are the otherwise unspecified absolute constants, exposed as knobs.
    """

    R_w: float
    R_e: float
    R_z: float
    sigma_e: float
    N_w: float
    c: float
    c_prime: float

    @property
    def total(self) -> float:
        return self.R_w + self.R_e + self.R_z


@dataclass(frozen=True)
class IdentifiedModel:
    """Balanced realization returned by the Ho-Kalman algorithm.

    ``singular_values`` are those of the truncated Hankel submatrix; the
    conditioning ratio sigma_n / sigma_{n+1} is the health signal for the
    rank-n cut (inf when the tail is exactly zero).
    """

    A_hat: np.ndarray
    B_hat: np.ndarray
    C_hat: np.ndarray
    singular_values: np.ndarray
    conditioning_ratio: float

    @property
    def n(self) -> int:
        return self.A_hat.shape[0]

    @property
    def m(self) -> int:
        return self.C_hat.shape[0]

    @property
    def p(self) -> int:
        return self.B_hat.shape[1]

    def to_system(self, sigma_w: float, sigma_z: float) -> LqgSystem:
        """Promote to a simulatable plant by attaching known noise scales."""
        return LqgSystem(
            A=self.A_hat, B=self.B_hat, C=self.C_hat, sigma_w=sigma_w, sigma_z=sigma_z
        )


@dataclass(frozen=True)
class ConfidenceRadii:
    """Spectral-norm confidence radii for the identified quantities.

    ``mode`` records whether the Hankel statistics and noise-term inputs
    came from the true system ("oracle") or from the estimate itself
    ("plug_in"). beta_B and beta_C coincide by construction.
    """

    g_radius: float
    beta_A: float
    beta_B: float
    beta_C: float
    mode: str


def assemble_regression(traj: Trajectory, H: int) -> RegressionData:
    """Build the regression matrices from a trajectory of length >= H."""
    if H < 1:
        raise ParameterError("H must be >= 1")
    T = traj.length
    if T < H:
        raise InsufficientDataError(f"trajectory length {T} is below the horizon {H}")
    N = T - H + 1
    p = traj.inputs.shape[1]
    U = np.empty((N, H * p))
    for j in range(H):
        U[:, j * p : (j + 1) * p] = traj.inputs[H - 1 - j : H - 1 - j + N]
    Y = traj.outputs[H - 1 :].copy()
    return RegressionData(U=U, Y=Y, N=N, H=H)


def least_squares_markov(data: RegressionData) -> MarkovParams:
    """Minimizer of ||Y - U X'||_F over X, via orthogonal factorization.

    Requires N >= H p rows and a numerically full-rank U (smallest singular
    value above 1e-8 of the largest).
    """
    N, d = data.U.shape
    if N < d:
        raise IllPosedRegressionError(
            f"need at least {d} samples for {d} regressors, got {N}"
        )
    s = np.linalg.svd(data.U, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= 1e-8 * s[0]:
        raise IllPosedRegressionError(
            f"input matrix is numerically rank deficient (sv ratio {s[-1] / s[0]:.2e})"
        )
    X, *_ = np.linalg.lstsq(data.U, data.Y, rcond=None)
    m = data.Y.shape[1]
    p = d // data.H
    return MarkovParams(G=X.T, H=data.H, m=m, p=p)


def ho_kalman(G_hat: MarkovParams, n: int, d1: int, d2: int) -> IdentifiedModel:
    """Realize an order-n model from (possibly noisy) impulse-response blocks.

    Builds the block Hankel matrix, takes the best rank-n approximation of
    its left submatrix, splits the singular factors into balanced
    observability/controllability estimates, and reads off the parameter
    blocks; the state map comes from the shifted submatrix through
    pseudoinverses of the factors.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if G_hat.H < 2 * n + 1:
        raise ParameterError(f"need H >= 2n + 1 = {2 * n + 1}, got H = {G_hat.H}")
    if d1 < n or d2 < n:
        raise ParameterError(f"need d1, d2 >= n = {n}, got d1 = {d1}, d2 = {d2}")
    hank = build_hankel(G_hat, d1, d2)
    m, p = G_hat.m, G_hat.p
    H_minus = hank.data[:, : p * d2]
    H_plus = hank.data[:, p:]
    U, s, Vh = np.linalg.svd(H_minus, full_matrices=False)
    if s.size < n or s[n - 1] < ORDER_SV_FLOOR:
        raise OrderDeficiencyError(
            f"declared order {n} exceeds the evident rank (sigma_{n} = "
            f"{s[n - 1] if s.size >= n else 0.0:.3e})"
        )
    tail = s[n] if s.size > n else 0.0
    ratio = math.inf if tail == 0.0 else float(s[n - 1] / tail)
    if ratio < SV_CONDITION_WARN:
        warnings.warn(
            f"rank-{n} cut is poorly separated: sigma_{n}/sigma_{n + 1} = {ratio:.2f}",
            RuntimeWarning,
            stacklevel=2,
        )
    sqrt_s = np.sqrt(s[:n])
    obs = U[:, :n] * sqrt_s
    ctrl = sqrt_s[:, None] * Vh[:n]
    C_hat = obs[:m].copy()
    B_hat = ctrl[:, :p].copy()
    A_hat = np.linalg.pinv(obs) @ H_plus @ np.linalg.pinv(ctrl)
    return IdentifiedModel(
        A_hat=A_hat,
        B_hat=B_hat,
        C_hat=C_hat,
        singular_values=s.copy(),
        conditioning_ratio=ratio,
    )


def effective_std(sys: LqgSystem, H: int, sigma_u: float, tau_max: int = 200) -> float:
    """Effective standard deviation of the state-truncation regression term.

    phi(A) ||C A^{H-1}|| sqrt(H ||Gamma_inf|| / (1 - rho(A)^{2H})) with
    Gamma_inf the stationary state covariance under the excitation inputs.
    Zero for nilpotent dynamics once the window clears the memory.
    """
    rho = spectral_radius(sys.A)
    tail = sys.C @ np.linalg.matrix_power(sys.A, H - 1)
    tail_norm = np.linalg.norm(tail, 2)
    if tail_norm == 0.0:
        return 0.0
    gamma = steady_state_covariance(sys, sigma_u)
    phi = phi_of_a(sys.A, tau_max)
    return float(
        phi * tail_norm * math.sqrt(H * np.linalg.norm(gamma, 2) / (1.0 - rho ** (2 * H)))
    )


def noise_terms(
    F_norm: float,
    sigma_e: float,
    rho_A: float,
    H: int,
    N: int,
    T_exp: int,
    m: int,
    p: int,
    n_dim: int,
    delta: float,
    sigma_w: float,
    sigma_z: float,
    c: float = 1.0,
    c_prime: float = 1.0,
) -> NoiseBoundTerms:
    """Evaluate the three noise scale factors of the estimation bound.

    ``F_norm`` is the spectral norm of the process-noise impulse response
    and ``rho_A`` the open-loop spectral radius; in plug-in use both come
    from the identified model instead of the truth.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if N < 1:
        raise ParameterError("N must be >= 1")
    if c <= 0 or c_prime <= 0:
        raise ParameterError("c and c_prime must be positive")
    log_inv_delta = math.log(1.0 / delta)
    R_z = 4.0 * sigma_z * (math.sqrt(H * p + m) + math.sqrt(log_inv_delta))
    N_w = (
        c
        * H
        * (p + n_dim)
        * math.log(2 * H * (p + n_dim)) ** 2
        * math.log(2 * T_exp * (p + n_dim)) ** 2
    )
    R_w = sigma_w * F_norm * max(math.sqrt(N_w), N_w / math.sqrt(N))
    log_H_delta = math.log(H / delta)
    growth = H * (3 * m + log_H_delta) / (N * (1.0 - rho_A**H))
    R_e = c_prime * sigma_e * math.sqrt(log_H_delta * max(1.0, growth))
    return NoiseBoundTerms(
        R_w=R_w, R_e=R_e, R_z=R_z, sigma_e=sigma_e, N_w=N_w, c=c, c_prime=c_prime
    )


def confidence_radii(
    terms: NoiseBoundTerms,
    norm_H: float,
    sigma_n_H: float,
    n_dim: int,
    T_exp: int,
    H: int,
    sigma_u: float,
    mode: str,
) -> ConfidenceRadii:
    """Translate the noise terms into parameter-space confidence radii.

    The impulse-response radius scales as 1/sqrt(T_exp - H + 1); the
    parameter radii additionally amplify by the conditioning of the
    rank-revealing Hankel matrix (spectral norm ``norm_H`` and smallest
    retained singular value ``sigma_n_H``).
    """
    if T_exp <= H:
        raise ParameterError("T_exp must exceed H")
    if sigma_n_H <= 0:
        raise OrderDeficiencyError("sigma_n of the Hankel matrix must be positive")
    if mode not in ("oracle", "plug_in"):
        raise ParameterError(f"mode must be 'oracle' or 'plug_in', got {mode!r}")
    samples = T_exp - H + 1
    g_radius = terms.total / (sigma_u * math.sqrt(samples))
    beta_A = (31 * n_dim * norm_H + 7 * n_dim * sigma_n_H) / sigma_n_H**2 * g_radius
    beta_BC = 7 * n_dim * terms.total / (sigma_u * math.sqrt(sigma_n_H * samples))
    return ConfidenceRadii(
        g_radius=g_radius, beta_A=beta_A, beta_B=beta_BC, beta_C=beta_BC, mode=mode
    )


def hankel_statistics(hank: HankelMatrix, n: int):
    """(spectral norm, n-th singular value) of a Hankel matrix."""
    s = hank.singular_values()
    if s.size < n:
        raise OrderDeficiencyError(f"Hankel matrix has fewer than {n} singular values")
    return float(s[0]), float(s[n - 1])


def oracle_inputs(sys: LqgSystem, H: int, sigma_u: float):
    """Noise-term inputs (F_norm, sigma_e, rho_A) taken from a known system."""
    F = noise_markov_parameters(sys, H)
    return (
        float(np.linalg.norm(F, 2)),
        effective_std(sys, H, sigma_u),
        spectral_radius(sys.A),
    )


def align_realization(reference: IdentifiedModel, center: IdentifiedModel, depth: int):
    """Rotate a reference realization into the center's state coordinates.

    Realizations from rank-n factorizations agree up to an (essentially
    orthogonal) change of basis, including arbitrary singular-vector sign
    flips. The best-fit orthogonal map between the two is recovered by
    Procrustes alignment of their depth-block observability matrices.
    Returns the transformed (A, B, C) of the reference.
    """
    O_ref = observability_matrix(reference.A_hat, reference.C_hat, depth)
    O_cen = observability_matrix(center.A_hat, center.C_hat, depth)
    U, _, Vh = np.linalg.svd(O_ref.T @ O_cen)
    T = U @ Vh
    return T.T @ reference.A_hat @ T, T.T @ reference.B_hat, reference.C_hat @ T
