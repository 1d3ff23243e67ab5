"""State estimation and control under a believed model.

A :class:`ModelController` owns the steady-state Kalman recursion for one
model (true or learned) and produces the feedback action from the filtered
estimate. Correct and predict phases are tagged explicitly; calling them
out of order raises instead of silently reusing a stale estimate.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, FilterPhaseError, ParameterError
from .riccati import ControllerSynthesis
from .system import CostParams, LqgSystem

__all__ = ["ModelController", "bellman_residual"]

_PREDICTED = "predicted"
_POSTERIOR = "posterior"


class ModelController:
    """Steady-state Kalman filter plus LQR feedback for a fixed model.

    The filter starts in the predicted phase with xhat_{0|-1} = 0. The
    usage pattern per step is correct(y) -> control_action() -> predict(u).
    """

    def __init__(self, model: LqgSystem, synth: ControllerSynthesis):
        self.model = model
        self.synth = synth
        self._corr = np.eye(model.n) - synth.L @ model.C
        self.x_pred = np.zeros(model.n)
        self.x_post: np.ndarray | None = None
        self.t = 0
        self.phase = _PREDICTED

    def reset(self):
        self.x_pred = np.zeros(self.model.n)
        self.x_post = None
        self.t = 0
        self.phase = _PREDICTED

    def correct(self, y) -> np.ndarray:
        """Measurement update: x_post = (I - L C) x_pred + L y."""
        if self.phase != _PREDICTED:
            raise FilterPhaseError("correct() called twice without predict()")
        y = np.asarray(y, dtype=float)
        if y.shape != (self.model.m,):
            raise DimensionError(f"observation must have shape ({self.model.m},)")
        self.x_post = self._corr @ self.x_pred + self.synth.L @ y
        self.phase = _POSTERIOR
        return self.x_post

    def predict(self, u) -> np.ndarray:
        """Time update: x_pred = A x_post + B u, advancing the step counter."""
        if self.phase != _POSTERIOR:
            raise FilterPhaseError("predict() called before correct()")
        u = np.asarray(u, dtype=float)
        if u.shape != (self.model.p,):
            raise DimensionError(f"input must have shape ({self.model.p},)")
        self.x_pred = self.model.A @ self.x_post + self.model.B @ u
        self.t += 1
        self.phase = _PREDICTED
        return self.x_pred

    def control_action(self) -> np.ndarray:
        """Feedback action u = -K x_post; requires a completed correct()."""
        if self.phase != _POSTERIOR:
            raise FilterPhaseError("control_action() requires the posterior estimate")
        return -(self.synth.K @ self.x_post)


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def bellman_residual(
    sys: LqgSystem,
    cost: CostParams,
    synth: ControllerSynthesis,
    x_pred,
    y,
    n_samples: int,
    rng: np.random.Generator,
    action=None,
):
    """Monte-Carlo check of the average-cost Bellman equation at one filter state.

    With xhat = (I - L C) x_pred + L y the fixed side is

        J_star + xhat' (P - C'QC) xhat + y' Q y

    and the minimized side, evaluated at ``action`` (default -K xhat), is

        y' Q y + u' R u + E[ xhat_next' (P - C'QC) xhat_next + y_next' Q y_next ]

    where y_next = C (A x + B u + w) + z_next and xhat_next is the filter
    update driven by y_next. The latent state is integrated out with its
    steady-state conditional law x = xhat + e, e ~ N(0, Sigma_bar); draw
    order is e, w, z. Returns (fixed minus estimated minimized side, its
    Monte-Carlo standard error). At the optimal action the residual is zero
    in expectation; any other action makes it strictly negative.
    """
    if n_samples < 100:
        raise ParameterError("n_samples must be at least 100")
    x_pred = np.asarray(x_pred, dtype=float)
    y = np.asarray(y, dtype=float)
    if x_pred.shape != (sys.n,) or y.shape != (sys.m,):
        raise DimensionError("x_pred / y shapes do not match the system")

    P, L, K = synth.P, synth.L, synth.K
    CtQC = sys.C.T @ cost.Q @ sys.C
    W = P - CtQC
    corr = np.eye(sys.n) - L @ sys.C

    xhat = corr @ x_pred + L @ y
    u = -(K @ xhat) if action is None else np.asarray(action, dtype=float)
    if u.shape != (sys.p,):
        raise DimensionError(f"action must have shape ({sys.p},)")

    lhs = float(synth.J_star + xhat @ W @ xhat + y @ cost.Q @ y)

    e = rng.standard_normal((n_samples, sys.n)) @ _psd_sqrt(synth.Sigma_bar).T
    w = sys.sigma_w * rng.standard_normal((n_samples, sys.n))
    z = sys.sigma_z * rng.standard_normal((n_samples, sys.m))

    x = xhat + e
    drive = x @ sys.A.T + sys.B @ u + w
    y_next = drive @ sys.C.T + z
    xhat_next = (sys.A @ xhat + sys.B @ u) @ corr.T + y_next @ L.T

    future = np.einsum("ij,jk,ik->i", xhat_next, W, xhat_next) + np.einsum(
        "ij,jk,ik->i", y_next, cost.Q, y_next
    )
    rhs_fixed = float(y @ cost.Q @ y + u @ cost.R @ u)
    residual = lhs - (rhs_fixed + float(future.mean()))
    std_error = float(future.std(ddof=1) / np.sqrt(n_samples))
    return residual, std_error
