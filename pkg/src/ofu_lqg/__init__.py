"""Learning control of unknown partially observable linear-quadratic systems.

Simulation of linear-Gaussian plants, optimal LQG synthesis, Markov
parameter regression with Ho-Kalman realization, confidence sets, an
optimistic explore-then-commit controller, and a seeded regret harness.
"""

from . import errors
from ._kernels import backend
from .estimator import ModelController, bellman_residual
from .harness import (
    Diagnostics,
    EnsembleSummary,
    ExpCommitConfig,
    RunResult,
    ThresholdConstants,
    ThresholdReport,
    commit_phase,
    exploration_cost_rate,
    exploration_thresholds,
    explore_phase,
    fit_regret_exponent,
    identify,
    monte_carlo,
    regret_curve,
    run_expcommit,
    stage_costs,
)
from .ofu import (
    CandidateEvaluation,
    ConfidenceSet,
    SelectionResult,
    membership,
    optimistic_select,
    sample_candidate,
)
from .riccati import (
    ControllerSynthesis,
    average_cost,
    lqr_gain,
    solve_control_dare,
    solve_filter_dare,
    synthesize,
)
from .sysid import (
    ConfidenceRadii,
    IdentifiedModel,
    NoiseBoundTerms,
    RegressionData,
    assemble_regression,
    confidence_radii,
    effective_std,
    ho_kalman,
    least_squares_markov,
    noise_terms,
)
from .system import (
    CostParams,
    HankelMatrix,
    LqgSystem,
    MarkovParams,
    StructuralReport,
    Trajectory,
    build_hankel,
    check_structural,
    markov_parameters,
    noise_markov_parameters,
    phi_of_a,
    rollout,
    simulate_step,
    spectral_radius,
    steady_state_covariance,
)

__version__ = "0.1.0"
