"""Pure-numpy simulation kernels, the fallback when the extension is absent.

Same call signatures and semantics as the compiled module; only speed
differs. Noise arrays are always generated by the caller so results are
independent of which backend runs.
"""

import numpy as np


def open_loop_rollout(A, B, C, u, w, z):
    """Drive the plant with the given inputs and noise.

    Returns (xs, ys) where xs has T + 1 rows (x_0 = 0 through the
    post-run state x_T) and ys has T rows, y_t = C x_t + z_t.
    """
    T = u.shape[0]
    n = A.shape[0]
    m = C.shape[0]
    xs = np.zeros((T + 1, n))
    ys = np.empty((T, m))
    x = np.zeros(n)
    for t in range(T):
        ys[t] = C @ x + z[t]
        x = A @ x + B @ u[t] + w[t]
        xs[t + 1] = x
    return xs, ys


def closed_loop_rollout(
    A, B, C, A_model, B_model, corr, gain_L, gain_K, Q, R, x0, xhat0, w, z,
    div_threshold, record,
):
    """Run the committed controller on the plant for len(w) steps.

    Per step: observe y from the plant, correct the model filter
    (``corr`` is I - L C_model precomputed by the caller), act with
    u = -K xhat, pay the quadratic cost, then advance plant and filter.

    Returns (costs, max_xhat, max_y, diverged_at, recorded) where
    diverged_at is -1 on success or the step at which a signal norm
    crossed ``div_threshold``, and recorded is None unless ``record``,
    in which case it is (xs, xhat_preds, ys, us).
    """
    T = w.shape[0]
    costs = np.empty(T)
    x = np.array(x0, dtype=float)
    xhat = np.array(xhat0, dtype=float)
    max_xhat = 0.0
    max_y = 0.0
    diverged_at = -1
    if record:
        xs = np.empty((T, x.shape[0]))
        xhat_preds = np.empty((T, xhat.shape[0]))
        ys = np.empty((T, C.shape[0]))
        us = np.empty((T, gain_K.shape[0]))
    for t in range(T):
        y = C @ x + z[t]
        xhat_post = corr @ xhat + gain_L @ y
        u = -(gain_K @ xhat_post)
        costs[t] = y @ Q @ y + u @ R @ u
        if record:
            xs[t] = x
            xhat_preds[t] = xhat
            ys[t] = y
            us[t] = u
        ny = float(np.linalg.norm(y))
        nxh = float(np.linalg.norm(xhat_post))
        nx = float(np.linalg.norm(x))
        if ny > max_y:
            max_y = ny
        if nxh > max_xhat:
            max_xhat = nxh
        if not (ny <= div_threshold and nxh <= div_threshold and nx <= div_threshold):
            diverged_at = t
            costs[t + 1 :] = 0.0
            break
        x = A @ x + B @ u + w[t]
        xhat = A_model @ xhat_post + B_model @ u
    recorded = (xs, xhat_preds, ys, us) if record else None
    return costs, max_xhat, max_y, diverged_at, recorded
