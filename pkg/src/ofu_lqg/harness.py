"""End-to-end explore-then-commit runs, Monte-Carlo ensembles, diagnostics.

One run: excite the plant with Gaussian inputs, identify a model and its
confidence radii, pick the feasible model with the smallest promised
average cost, then commit to its optimal controller for the remaining
horizon. Regret is accumulated against the optimal average cost of the
true plant over the whole horizon, exploration included.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionError,
    DivergenceError,
    EnsembleError,
    LqgControlError,
    MarginError,
    ParameterError,
)
from .estimator import ModelController
from .ofu import ConfidenceSet, SelectionResult, membership, optimistic_select
from .riccati import synthesize
from .sysid import (
    ConfidenceRadii,
    IdentifiedModel,
    NoiseBoundTerms,
    align_realization,
    assemble_regression,
    confidence_radii,
    hankel_statistics,
    ho_kalman,
    least_squares_markov,
    noise_terms,
    oracle_inputs,
)
from .system import (
    CostParams,
    LqgSystem,
    Trajectory,
    build_hankel,
    gaussian_excitation_rollout,
    markov_parameters,
    phi_of_a,
    steady_state_covariance,
)
from ._kernels import closed_loop_rollout

__all__ = [
    "ExpCommitConfig",
    "ThresholdConstants",
    "ThresholdReport",
    "Diagnostics",
    "RunResult",
    "EnsembleSummary",
    "explore_phase",
    "identify",
    "commit_phase",
    "run_expcommit",
    "monte_carlo",
    "fit_regret_exponent",
    "exploration_thresholds",
    "exploration_cost_rate",
    "stage_costs",
    "regret_curve",
]

THREADS_ENV = "OFU_LQG_THREADS"
DIVERGENCE_THRESHOLD = 1e12


def default_exploration_length(T: int) -> int:
    """Largest integer t with t^3 <= T^2, i.e. floor(T^(2/3)) computed exactly."""
    t = int(round(T ** (2.0 / 3.0)))
    while t**3 > T * T:
        t -= 1
    while (t + 1) ** 3 <= T * T:
        t += 1
    return t


@dataclass(frozen=True)
class ExpCommitConfig:
    """Inputs of one explore-then-commit run.

    Unset values resolve to the standard choices: T_exp = floor(T^(2/3)),
    H = 2 n + 1 with a balanced Hankel split, slack = T^(-1/3). The noise
    scales are treated as known and default to the simulated plant's.
    ``S`` is accepted for interface completeness and ignored (nothing in
    the procedure consumes it).
    """

    T: int
    sigma_u: float
    delta: float
    n_declared: int
    cost: CostParams
    T_exp: int | None = None
    H: int | None = None
    d1: int | None = None
    d2: int | None = None
    kappa: float = 1e3
    contractibility_margin: float = 0.95
    search_budget: int = 500
    slack: float | None = None
    radii_mode: str = "oracle"
    c: float = 1.0
    c_prime: float = 1.0
    master_seed: int = 0
    sigma_w: float | None = None
    sigma_z: float | None = None
    S: float | None = None
    compute_thresholds: bool = False
    threshold_constants: "ThresholdConstants | None" = None
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if self.T < 2:
            raise ParameterError("T must be at least 2")
        if self.sigma_u <= 0:
            raise ParameterError("sigma_u must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError("delta must lie in (0, 1)")
        if self.n_declared < 1:
            raise ParameterError("n_declared must be >= 1")
        if self.radii_mode not in ("oracle", "plug_in"):
            raise ParameterError("radii_mode must be 'oracle' or 'plug_in'")
        if self.T_exp is None:
            object.__setattr__(self, "T_exp", default_exploration_length(self.T))
        if self.H is None:
            object.__setattr__(self, "H", 2 * self.n_declared + 1)
        if self.H < 2 * self.n_declared + 1:
            raise ParameterError(
                f"H must be at least 2 n + 1 = {2 * self.n_declared + 1}"
            )
        if self.d1 is None:
            object.__setattr__(self, "d1", max(self.n_declared, (self.H - 1) // 2))
        if self.d2 is None:
            object.__setattr__(self, "d2", self.H - 1 - self.d1)
        if self.d1 + self.d2 + 1 != self.H:
            raise ParameterError("d1 + d2 + 1 must equal H")
        if min(self.d1, self.d2) < self.n_declared:
            raise ParameterError("d1 and d2 must both be >= the declared order")
        if not self.H <= self.T_exp < self.T:
            raise ParameterError("need H <= T_exp < T")
        if self.slack is None:
            object.__setattr__(self, "slack", self.T ** (-1.0 / 3.0))
        if self.search_budget < 1:
            raise ParameterError("search_budget must be >= 1")

    def with_seed(self, seed: int) -> "ExpCommitConfig":
        return replace(self, master_seed=seed)

    def resolve_noise_scales(self, sys: LqgSystem):
        sigma_w = self.sigma_w if self.sigma_w is not None else sys.sigma_w
        sigma_z = self.sigma_z if self.sigma_z is not None else sys.sigma_z
        return sigma_w, sigma_z


@dataclass(frozen=True)
class ThresholdConstants:
    """Set-level constants entering the exploration-length diagnostics.

    Ones left unset are replaced by the corresponding per-model quantity
    of the system under study, which is a stand-in (a lower estimate) for
    the supremum over the feasible family.
    """

    c1: float = 1.0
    c2: float = 1.0
    D: float | None = None
    Gamma_sup: float | None = None
    zeta_sup: float | None = None
    rho_sup: float | None = None
    upsilon_sup: float | None = None
    sigma_margin: float | None = None


@dataclass(frozen=True)
class ThresholdReport:
    """Minimum-exploration diagnostics; T_0 dominates every interval plus H."""

    T_G: float
    T_B: float
    T_A: float
    T_N: float
    T_M: float
    T_L: float
    T_alpha: float
    T_beta: float
    T_gamma: float
    T_0: float
    user_constants: dict


@dataclass(frozen=True)
class Diagnostics:
    """Run health indicators gathered during commit and selection."""

    max_state_estimate_norm: float
    max_output_norm: float
    true_in_set: bool | None
    selection_rejections: dict
    thresholds: ThresholdReport | None = None


@dataclass(frozen=True)
class RunResult:
    """Everything produced by one explore-then-commit run."""

    costs: np.ndarray
    cumulative_regret: np.ndarray
    J_star_true: float
    identified: IdentifiedModel
    radii: ConfidenceRadii
    selection: SelectionResult
    diagnostics: Diagnostics

    @property
    def selected_J(self) -> float:
        return self.selection.J_tilde

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret[-1])


@dataclass(frozen=True)
class EnsembleSummary:
    """Per-step regret statistics over independent seeded trials."""

    mean: np.ndarray
    median: np.ndarray
    q10: np.ndarray
    q90: np.ndarray
    final_regrets: np.ndarray
    trial_seeds: list
    failures: dict
    J_star_true: float

    @property
    def n_trials(self) -> int:
        return len(self.trial_seeds)

    @property
    def final_median_regret(self) -> float:
        return float(self.median[-1])


def stage_costs(outputs: np.ndarray, inputs: np.ndarray, cost: CostParams) -> np.ndarray:
    """Per-step quadratic costs y'Qy + u'Ru for recorded signal arrays."""
    return np.einsum("ti,ij,tj->t", outputs, cost.Q, outputs) + np.einsum(
        "ti,ij,tj->t", inputs, cost.R, inputs
    )


def regret_curve(costs: np.ndarray, j_star: float) -> np.ndarray:
    """Running sum of per-step excess cost over the optimal average cost."""
    return np.cumsum(costs - j_star)


def explore_phase(sys: LqgSystem, config: ExpCommitConfig, rng: np.random.Generator):
    """Gaussian excitation for T_exp steps.

    Returns the recorded trajectory and the plant state handed off to the
    commit phase.
    """
    return gaussian_excitation_rollout(sys, config.sigma_u, config.T_exp, rng)


def identify(
    traj: Trajectory, config: ExpCommitConfig, oracle_sys: LqgSystem | None = None
):
    """Regression, realization, and confidence radii from an excitation run.

    In oracle mode the radii use the true system's Hankel statistics and
    noise-term inputs (controlled-experiment setting); in plug-in mode the
    same quantities are recomputed from the estimate itself. The noise
    scales are taken as known either way.
    """
    if config.radii_mode == "oracle" and oracle_sys is None:
        raise ParameterError("oracle radii require the true system")
    if oracle_sys is not None:
        sigma_w, sigma_z = oracle_sys.sigma_w, oracle_sys.sigma_z
    else:
        sigma_w, sigma_z = config.sigma_w, config.sigma_z
        if sigma_w is None or sigma_z is None:
            raise ParameterError(
                "plug-in identification needs sigma_w and sigma_z in the config"
            )
    data = assemble_regression(traj, config.H)
    G_hat = least_squares_markov(data)
    ident = ho_kalman(G_hat, config.n_declared, config.d1, config.d2)
    if config.radii_mode == "oracle":
        F_norm, sigma_e, rho_A = oracle_inputs(oracle_sys, config.H, config.sigma_u)
        hank = build_hankel(
            markov_parameters(oracle_sys, config.H), config.d1, config.d2
        )
    else:
        est_sys = ident.to_system(sigma_w, sigma_z)
        F_norm, sigma_e, rho_A = oracle_inputs(est_sys, config.H, config.sigma_u)
        hank = build_hankel(G_hat, config.d1, config.d2)
    norm_H, sigma_n_H = hankel_statistics(hank, config.n_declared)
    terms = noise_terms(
        F_norm=F_norm,
        sigma_e=sigma_e,
        rho_A=rho_A,
        H=config.H,
        N=data.N,
        T_exp=traj.length,
        m=G_hat.m,
        p=G_hat.p,
        n_dim=config.n_declared,
        delta=config.delta,
        sigma_w=sigma_w,
        sigma_z=sigma_z,
        c=config.c,
        c_prime=config.c_prime,
    )
    radii = confidence_radii(
        terms,
        norm_H=norm_H,
        sigma_n_H=sigma_n_H,
        n_dim=config.n_declared,
        T_exp=traj.length,
        H=config.H,
        sigma_u=config.sigma_u,
        mode=config.radii_mode,
    )
    return ident, radii


def commit_phase(
    sys: LqgSystem,
    cost: CostParams,
    controller: ModelController,
    T_commit: int,
    rng: np.random.Generator,
    x0=None,
    record: bool = False,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
):
    """Run the committed controller on the true plant for T_commit steps.

    Per step: observe, correct the model filter, act with u = -K xhat,
    pay the cost, advance plant and filter. The controller object is read
    (matrices and initial predicted state) but not mutated. Returns
    (costs, diagnostics) or (costs, diagnostics, recorded arrays), where
    the recorded arrays are (states, predicted estimates, outputs, inputs).
    Signals crossing the overflow guard raise :class:`DivergenceError`
    with the offending step.
    """
    if T_commit < 1:
        raise ParameterError("T_commit must be >= 1")
    model, synth = controller.model, controller.synth
    if model.m != sys.m or model.p != sys.p:
        raise DimensionError("controller's model does not match the plant signals")
    w = sys.sigma_w * rng.standard_normal((T_commit, sys.n))
    z = sys.sigma_z * rng.standard_normal((T_commit, sys.m))
    x0 = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float)
    corr = np.eye(model.n) - synth.L @ model.C
    costs, max_xhat, max_y, diverged_at, recorded = closed_loop_rollout(
        sys.A,
        sys.B,
        sys.C,
        model.A,
        model.B,
        corr,
        synth.L,
        synth.K,
        cost.Q,
        cost.R,
        x0,
        controller.x_pred,
        w,
        z,
        divergence_threshold,
        record,
    )
    if diverged_at >= 0:
        raise DivergenceError(
            f"closed-loop signal norm exceeded {divergence_threshold:.1e} "
            f"at commit step {diverged_at}",
            step=diverged_at,
        )
    diagnostics = Diagnostics(
        max_state_estimate_norm=float(max_xhat),
        max_output_norm=float(max_y),
        true_in_set=None,
        selection_rejections={},
    )
    if record:
        return costs, diagnostics, recorded
    return costs, diagnostics


def _true_in_set(sys, config, set_):
    """Oracle diagnostic: does an aligned realization of the truth pass membership?"""
    G_true = markov_parameters(sys, config.H)
    reference = ho_kalman(G_true, config.n_declared, config.d1, config.d2)
    A_al, B_al, C_al = align_realization(reference, set_.center, config.d1)
    aligned = LqgSystem(
        A=A_al, B=B_al, C=C_al, sigma_w=sys.sigma_w, sigma_z=sys.sigma_z
    )
    feasible, _ = membership(aligned, set_, config.cost)
    return bool(feasible)


def run_expcommit(sys: LqgSystem, config: ExpCommitConfig) -> RunResult:
    """One seeded end-to-end run; a pure function of (sys, config).

    The master seed deterministically derives independent streams for the
    exploration, selection, and commit phases.
    """
    if config.cost.Q.shape[0] != sys.m or config.cost.R.shape[0] != sys.p:
        raise DimensionError("cost matrices do not match the plant dimensions")
    sigma_w, sigma_z = config.resolve_noise_scales(sys)
    seq = np.random.SeedSequence(config.master_seed)
    rng_explore, rng_select, rng_commit = (
        np.random.default_rng(s) for s in seq.spawn(3)
    )

    true_synth = synthesize(sys, config.cost)
    j_star = true_synth.J_star

    traj, x_handoff = explore_phase(sys, config, rng_explore)
    explore_costs = stage_costs(traj.outputs, traj.inputs, config.cost)

    ident, radii = identify(traj, config, oracle_sys=sys)
    set_ = ConfidenceSet(
        center=ident,
        radii=radii,
        kappa=config.kappa,
        contractibility_margin=config.contractibility_margin,
        H=config.H,
        sigma_w=sigma_w,
        sigma_z=sigma_z,
    )
    selection = optimistic_select(
        set_, config.cost, config.search_budget, config.slack, rng_select
    )

    controller = ModelController(selection.model, selection.synth)
    commit_costs, commit_diag = commit_phase(
        sys,
        config.cost,
        controller,
        config.T - config.T_exp,
        rng_commit,
        x0=x_handoff,
        divergence_threshold=config.divergence_threshold,
    )

    costs = np.concatenate([explore_costs, commit_costs])
    true_in_set = (
        _true_in_set(sys, config, set_) if config.radii_mode == "oracle" else None
    )
    thresholds = None
    if config.compute_thresholds:
        F_norm, sigma_e, rho_A = oracle_inputs(sys, config.H, config.sigma_u)
        terms = noise_terms(
            F_norm=F_norm,
            sigma_e=sigma_e,
            rho_A=rho_A,
            H=config.H,
            N=config.T_exp - config.H + 1,
            T_exp=config.T_exp,
            m=sys.m,
            p=sys.p,
            n_dim=config.n_declared,
            delta=config.delta,
            sigma_w=sigma_w,
            sigma_z=sigma_z,
            c=config.c,
            c_prime=config.c_prime,
        )
        thresholds = exploration_thresholds(
            sys,
            config.cost,
            terms,
            config.threshold_constants,
            config.sigma_u,
            config.H,
            d1=config.d1,
            d2=config.d2,
        )
    diagnostics = Diagnostics(
        max_state_estimate_norm=commit_diag.max_state_estimate_norm,
        max_output_norm=commit_diag.max_output_norm,
        true_in_set=true_in_set,
        selection_rejections=selection.rejections,
        thresholds=thresholds,
    )
    return RunResult(
        costs=costs,
        cumulative_regret=regret_curve(costs, j_star),
        J_star_true=j_star,
        identified=ident,
        radii=radii,
        selection=selection,
        diagnostics=diagnostics,
    )


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def monte_carlo(sys: LqgSystem, config: ExpCommitConfig, n_trials: int) -> EnsembleSummary:
    """Independent runs with per-trial seeds master_seed + trial index.

    The summary is a deterministic function of (sys, config, n_trials)
    regardless of the parallel schedule; trials that fail with a numerical
    error are recorded by index and excluded from the statistics.
    """
    if n_trials < 1:
        raise ParameterError("n_trials must be >= 1")
    seeds = [config.master_seed + i for i in range(n_trials)]

    def run_one(seed):
        return run_expcommit(sys, config.with_seed(seed))

    results: list = [None] * n_trials
    failures: dict = {}
    threads = min(_thread_count(), n_trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {i: pool.submit(run_one, seeds[i]) for i in range(n_trials)}
        for i, fut in futures.items():
            try:
                results[i] = fut.result()
            except LqgControlError as exc:
                failures[i] = str(exc)
    else:
        for i, seed in enumerate(seeds):
            try:
                results[i] = run_one(seed)
            except LqgControlError as exc:
                failures[i] = str(exc)

    successes = [r for r in results if r is not None]
    if not successes:
        raise EnsembleError(f"all {n_trials} trials failed: {failures}")
    stack = np.stack([r.cumulative_regret for r in successes])
    return EnsembleSummary(
        mean=stack.mean(axis=0),
        median=np.median(stack, axis=0),
        q10=np.quantile(stack, 0.10, axis=0),
        q90=np.quantile(stack, 0.90, axis=0),
        final_regrets=stack[:, -1].copy(),
        trial_seeds=seeds,
        failures=failures,
        J_star_true=successes[0].J_star_true,
    )


def fit_regret_exponent(points):
    """OLS fit of log(final regret) on log(T).

    ``points`` is a sequence of (T, regret) pairs with positive regrets;
    returns (slope, intercept, r_squared).
    """
    points = list(points)
    if len(points) < 3:
        raise ParameterError("need at least 3 (T, regret) points")
    T_vals = np.array([float(t) for t, _ in points])
    regrets = np.array([float(r) for _, r in points])
    if np.any(regrets <= 0) or np.any(T_vals <= 0):
        raise ParameterError("regret exponent fit needs positive T and regret values")
    x = np.log(T_vals)
    y = np.log(regrets)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r_squared)


def exploration_cost_rate(sys: LqgSystem, cost: CostParams, sigma_u: float) -> float:
    """Expected stage cost at stationarity under pure Gaussian excitation.

    tr(C'QC Gamma_inf) + sigma_z^2 tr(Q) + sigma_u^2 tr(R); the gap to the
    optimal average cost is the per-step price of exploring.
    """
    gamma = steady_state_covariance(sys, sigma_u)
    CtQC = sys.C.T @ cost.Q @ sys.C
    return float(
        np.trace(CtQC @ gamma)
        + sys.sigma_z**2 * np.trace(cost.Q)
        + sigma_u**2 * np.trace(cost.R)
    )


def exploration_thresholds(
    sys: LqgSystem,
    cost: CostParams,
    terms: NoiseBoundTerms,
    constants: ThresholdConstants | None,
    sigma_u: float,
    H: int,
    d1: int | None = None,
    d2: int | None = None,
) -> ThresholdReport:
    """Evaluate the minimum-exploration time intervals for a known system.

    Set-level constants missing from ``constants`` fall back to per-model
    stand-ins from the system's own synthesis; the stand-in names are
    listed in the report. The margin must strictly dominate both
    closed-loop radii.
    """
    constants = constants or ThresholdConstants()
    n = sys.n
    if d1 is None:
        d1 = max(n, (H - 1) // 2)
    if d2 is None:
        d2 = H - 1 - d1
    hank = build_hankel(markov_parameters(sys, H), d1, d2)
    norm_H, sigma_n_H = hankel_statistics(hank, n)

    synth = synthesize(sys, cost)
    stand_in = []

    def resolve(name, fallback):
        value = getattr(constants, name)
        if value is None:
            stand_in.append(name)
            return fallback
        return value

    D = resolve("D", float(np.linalg.norm(synth.P, 2)))
    Gamma = resolve("Gamma_sup", float(np.linalg.norm(synth.K, 2)))
    zeta = resolve("zeta_sup", float(np.linalg.norm(synth.L, 2)))
    rho = resolve("rho_sup", synth.closed_loop_control_radius)
    upsilon = resolve("upsilon_sup", synth.closed_loop_filter_radius)
    if max(rho, upsilon) >= 1.0:
        raise MarginError("closed-loop radii must be below 1 for the thresholds")
    sigma = resolve("sigma_margin", 0.5 * (1.0 + max(rho, upsilon)))
    if not max(rho, upsilon) < sigma < 1.0:
        raise MarginError(
            f"sigma_margin must lie in (max(rho, upsilon), 1), got {sigma}"
        )

    phi = phi_of_a(sys.A)
    norm_B = float(np.linalg.norm(sys.B, 2))
    norm_C = float(np.linalg.norm(sys.C, 2))

    T_G = terms.total**2 / sigma_u**2
    T_B = T_G * (7 * n / math.sqrt(sigma_n_H)) ** 2
    T_A = T_G * ((31 * n * norm_H + 7 * n * sigma_n_H) / sigma_n_H**2) ** 2
    T_N = T_G * (4 * math.sqrt(n) / sigma_n_H) ** 2
    T_M = T_B * (2 * zeta * rho / (1 - rho)) ** 2
    T_AB = max(T_A, T_B)
    T_L = (
        T_AB
        * (
            (constants.c1 * (2 * norm_C + 1) * phi**2 + constants.c2 * (2 * phi + 1))
            / (1 - upsilon**2)
        )
        ** 2
    )
    T_alpha = T_B * (Gamma * (1 + zeta * (1 + norm_C)) / (sigma - upsilon)) ** 2
    T_beta = (
        T_AB
        * (
            Gamma
            * norm_B
            * (1 + zeta + zeta * norm_C)
            * (phi * zeta + (1 + Gamma) * (1 + zeta))
            / (1 - sigma) ** 2
        )
        ** 2
    )
    T_gamma = T_AB * ((1 + Gamma * (1 + zeta * norm_B)) / (sigma - rho)) ** 2
    T_0 = max(T_A, T_B, T_G, T_L, T_M, T_N, T_alpha, T_beta, T_gamma) + H
    return ThresholdReport(
        T_G=T_G,
        T_B=T_B,
        T_A=T_A,
        T_N=T_N,
        T_M=T_M,
        T_L=T_L,
        T_alpha=T_alpha,
        T_beta=T_beta,
        T_gamma=T_gamma,
        T_0=T_0,
        user_constants={
            "c1": constants.c1,
            "c2": constants.c2,
            "D": D,
            "Gamma_sup": Gamma,
            "zeta_sup": zeta,
            "rho_sup": rho,
            "upsilon_sup": upsilon,
            "sigma_margin": sigma,
            "stand_in": stand_in,
        },
    )
