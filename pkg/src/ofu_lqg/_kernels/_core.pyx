# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels. Mirrors _pure exactly; see there for docs."""

import numpy as np

cimport cython
from libc.math cimport sqrt


cdef inline void _matvec(const double[:, ::1] M, const double* v, double* out,
                         Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += M[i, j] * v[j]
        out[i] = acc


cdef inline double _norm(const double* v, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(d):
        acc += v[i] * v[i]
    return sqrt(acc)


cdef inline double _quad(const double[:, ::1] M, const double* v, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, row
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += M[i, j] * v[j]
        acc += v[i] * row
    return acc


def open_loop_rollout(A, B, C, u, w, z):
    cdef const double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)

    cdef Py_ssize_t T = uv.shape[0]
    cdef Py_ssize_t n = Av.shape[0]
    cdef Py_ssize_t m = Cv.shape[0]
    cdef Py_ssize_t p = Bv.shape[1]

    xs_arr = np.zeros((T + 1, n))
    ys_arr = np.empty((T, m))
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] ys = ys_arr

    work_arr = np.zeros(2 * n + m)
    cdef double[::1] work = work_arr
    cdef double* x = &work[0]
    cdef double* xn = &work[n]
    cdef double* buf = &work[2 * n]

    cdef Py_ssize_t t, i, j
    cdef double acc
    with nogil:
        for t in range(T):
            for i in range(m):
                acc = 0.0
                for j in range(n):
                    acc += Cv[i, j] * x[j]
                ys[t, i] = acc + zv[t, i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += Av[i, j] * x[j]
                for j in range(p):
                    acc += Bv[i, j] * uv[t, j]
                xn[i] = acc + wv[t, i]
            for i in range(n):
                x[i] = xn[i]
                xs[t + 1, i] = xn[i]
    return xs_arr, ys_arr


def closed_loop_rollout(
    A, B, C, A_model, B_model, corr, gain_L, gain_K, Q, R, x0, xhat0, w, z,
    double div_threshold, bint record,
):
    cdef const double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[:, ::1] Amv = np.ascontiguousarray(A_model, dtype=np.float64)
    cdef const double[:, ::1] Bmv = np.ascontiguousarray(B_model, dtype=np.float64)
    cdef const double[:, ::1] corrv = np.ascontiguousarray(corr, dtype=np.float64)
    cdef const double[:, ::1] Lv = np.ascontiguousarray(gain_L, dtype=np.float64)
    cdef const double[:, ::1] Kv = np.ascontiguousarray(gain_K, dtype=np.float64)
    cdef const double[:, ::1] Qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef const double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)

    cdef Py_ssize_t T = wv.shape[0]
    cdef Py_ssize_t n = Av.shape[0]           # plant state dim
    cdef Py_ssize_t nm = Amv.shape[0]         # model state dim
    cdef Py_ssize_t m = Cv.shape[0]
    cdef Py_ssize_t p = Kv.shape[0]

    costs_arr = np.zeros(T)
    cdef double[::1] costs = costs_arr

    cdef double[:, ::1] xs_v = None, xhp_v = None, ys_v = None, us_v = None
    xs_arr = xhp_arr = ys_arr = us_arr = None
    if record:
        xs_arr = np.empty((T, n)); xs_v = xs_arr
        xhp_arr = np.empty((T, nm)); xhp_v = xhp_arr
        ys_arr = np.empty((T, m)); ys_v = ys_arr
        us_arr = np.empty((T, p)); us_v = us_arr

    work_arr = np.zeros(2 * n + 3 * nm + m + p)
    cdef double[::1] work = work_arr
    cdef double* x = &work[0]
    cdef double* xn = &work[n]
    cdef double* xhat = &work[2 * n]
    cdef double* xhat_post = &work[2 * n + nm]
    cdef double* xhat_next = &work[2 * n + 2 * nm]
    cdef double* y = &work[2 * n + 3 * nm]
    cdef double* uvec = &work[2 * n + 3 * nm + m]

    cdef Py_ssize_t i, j, t
    for i in range(n):
        x[i] = x0[i]
    for i in range(nm):
        xhat[i] = xhat0[i]

    cdef double max_xhat = 0.0, max_y = 0.0
    cdef double ny, nxh, nx, acc
    cdef Py_ssize_t diverged_at = -1

    with nogil:
        for t in range(T):
            for i in range(m):
                acc = 0.0
                for j in range(n):
                    acc += Cv[i, j] * x[j]
                y[i] = acc + zv[t, i]
            _matvec(corrv, xhat, xhat_post, nm, nm)
            for i in range(nm):
                acc = 0.0
                for j in range(m):
                    acc += Lv[i, j] * y[j]
                xhat_post[i] += acc
            for i in range(p):
                acc = 0.0
                for j in range(nm):
                    acc += Kv[i, j] * xhat_post[j]
                uvec[i] = -acc
            costs[t] = _quad(Qv, y, m) + _quad(Rv, uvec, p)
            if record:
                for i in range(n):
                    xs_v[t, i] = x[i]
                for i in range(nm):
                    xhp_v[t, i] = xhat[i]
                for i in range(m):
                    ys_v[t, i] = y[i]
                for i in range(p):
                    us_v[t, i] = uvec[i]
            ny = _norm(y, m)
            nxh = _norm(xhat_post, nm)
            nx = _norm(x, n)
            if ny > max_y:
                max_y = ny
            if nxh > max_xhat:
                max_xhat = nxh
            if not (ny <= div_threshold and nxh <= div_threshold and nx <= div_threshold):
                diverged_at = t
                break
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += Av[i, j] * x[j]
                for j in range(p):
                    acc += Bv[i, j] * uvec[j]
                xn[i] = acc + wv[t, i]
            for i in range(n):
                x[i] = xn[i]
            _matvec(Amv, xhat_post, xhat_next, nm, nm)
            for i in range(nm):
                acc = 0.0
                for j in range(p):
                    acc += Bmv[i, j] * uvec[j]
                xhat[i] = xhat_next[i] + acc

    recorded = (xs_arr, xhp_arr, ys_arr, us_arr) if record else None
    return costs_arr, max_xhat, max_y, int(diverged_at), recorded
