# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled round loop.

Operation-for-operation twin of the pure-Python reference kernel: the same
ascending-neighbor accumulation order and the same expression shapes, so
both backends produce bitwise-identical traces. Built with floating-point
contraction disabled; see setup.py.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

VERDICT_MAX_ITERS = 0
VERDICT_CONVERGED = 1
VERDICT_DIVERGED = 2

STOP_NONE = 0
STOP_ORACLE = 1
STOP_SUCCESSIVE = 2


def run_rounds(
    int n,
    int m,
    cnp.int32_t[::1] p_indptr,
    cnp.int32_t[::1] p_indices,
    double[::1] p_weights,
    cnp.int32_t[::1] q_indptr,
    cnp.int32_t[::1] q_indices,
    double[::1] q_weights,
    double[:, ::1] h,
    double[::1] z,
    double[::1] x0,
    double[::1] v0,
    double alpha,
    int max_iters,
    int stop_mode,
    double stop_tol,
    y_star,
    double guard,
    bint record_trace,
):
    cdef int nm = n * m
    cdef cnp.ndarray[double, ndim=1] xa = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] va = np.array(v0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] xb = np.empty(nm)
    cdef cnp.ndarray[double, ndim=1] vb = np.empty(nm)
    cdef cnp.ndarray[double, ndim=1] ga = np.empty(nm)
    cdef cnp.ndarray[double, ndim=1] gb = np.empty(nm)
    cdef cnp.ndarray[double, ndim=1] ys = np.zeros(m)
    cdef cnp.ndarray[double, ndim=2] trace_arr

    cdef double[::1] x = xa
    cdef double[::1] v = va
    cdef double[::1] x_new = xb
    cdef double[::1] v_new = vb
    cdef double[::1] g_cur = ga
    cdef double[::1] g_new = gb
    cdef double[::1] ysv = ys
    cdef double[:, ::1] trace_view = None

    cdef int i, c, idx, j, k, t
    cdef double acc, dot, e, d, big, ax, av
    cdef int verdict = VERDICT_MAX_ITERS
    cdef int t_used = max_iters
    cdef bint have_oracle = y_star is not None
    cdef double[::1] tmp

    if have_oracle:
        for c in range(m):
            ysv[c] = y_star[c]

    if record_trace:
        trace_arr = np.empty((max_iters + 1, 2 * nm))
        trace_view = trace_arr
        for k in range(nm):
            trace_view[0, k] = x[k]
            trace_view[0, nm + k] = v[k]
    else:
        trace_arr = np.empty((0, 0))

    if stop_mode == STOP_ORACLE:
        e = 0.0
        for i in range(n):
            for c in range(m):
                d = fabs(x[i * m + c] - ysv[c])
                if d > e:
                    e = d
        if e <= stop_tol:
            out = (np.asarray(x).copy(), np.asarray(v).copy(), 0, VERDICT_CONVERGED,
                   trace_arr[:1].copy() if record_trace else None)
            return out

    for i in range(n):
        dot = 0.0
        for c in range(m):
            dot += h[i, c] * x[i * m + c]
        for c in range(m):
            g_cur[i * m + c] = h[i, c] * dot - z[i] * h[i, c]

    for t in range(1, max_iters + 1):
        for i in range(n):
            for c in range(m):
                acc = 0.0
                for idx in range(p_indptr[i], p_indptr[i + 1]):
                    j = p_indices[idx]
                    acc += p_weights[idx] * x[j * m + c]
                x_new[i * m + c] = acc - alpha * v[i * m + c]
        for i in range(n):
            dot = 0.0
            for c in range(m):
                dot += h[i, c] * x_new[i * m + c]
            for c in range(m):
                g_new[i * m + c] = h[i, c] * dot - z[i] * h[i, c]
        for i in range(n):
            for c in range(m):
                acc = 0.0
                for idx in range(q_indptr[i], q_indptr[i + 1]):
                    j = q_indices[idx]
                    acc += q_weights[idx] * v[j * m + c]
                v_new[i * m + c] = acc + g_new[i * m + c] - g_cur[i * m + c]

        tmp = x
        x = x_new
        x_new = tmp
        tmp = v
        v = v_new
        v_new = tmp
        tmp = g_cur
        g_cur = g_new
        g_new = tmp

        if record_trace:
            for k in range(nm):
                trace_view[t, k] = x[k]
                trace_view[t, nm + k] = v[k]

        big = 0.0
        for k in range(nm):
            ax = fabs(x[k])
            av = fabs(v[k])
            if ax != ax or av != av:
                big = guard + 1.0
                break
            if ax > big:
                big = ax
            if av > big:
                big = av
        if big > guard:
            verdict = VERDICT_DIVERGED
            t_used = t
            break

        if stop_mode == STOP_ORACLE:
            e = 0.0
            for i in range(n):
                for c in range(m):
                    d = fabs(x[i * m + c] - ysv[c])
                    if d > e:
                        e = d
            if e <= stop_tol:
                verdict = VERDICT_CONVERGED
                t_used = t
                break
        elif stop_mode == STOP_SUCCESSIVE:
            # after the swap, x_new still holds the previous iterate
            d = 0.0
            for k in range(nm):
                e = fabs(x[k] - x_new[k])
                if e > d:
                    d = e
            if d <= stop_tol:
                verdict = VERDICT_CONVERGED
                t_used = t
                break

    xv = np.asarray(x).copy()
    vv = np.asarray(v).copy()
    tr = trace_arr[: t_used + 1].copy() if record_trace else None
    return xv, vv, t_used, verdict, tr
