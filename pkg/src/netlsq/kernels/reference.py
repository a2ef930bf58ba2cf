"""Pure-Python round loop.

This is the semantic reference for the compiled kernel: per-node messages
move through an explicit per-round buffer, every accumulation runs in fixed
ascending-neighbor order, and all arithmetic is plain IEEE double. The
compiled kernel replays exactly the same operation order in C, so traces
from the two backends are bitwise identical.
"""
from __future__ import annotations

import numpy as np

VERDICT_MAX_ITERS = 0
VERDICT_CONVERGED = 1
VERDICT_DIVERGED = 2

STOP_NONE = 0
STOP_ORACLE = 1
STOP_SUCCESSIVE = 2


class RoundBuffer:
    """One synchronous round's outbox.

    Every node publishes its (x_i, v_i) message once per round; receivers
    read only the slots of their in-neighbors. Kept as a real object (not
    a bare list) so tests can substitute a recording subclass and audit
    which payloads each node touched.
    """

    def __init__(self, n: int):
        self.x_slots = [None] * n
        self.v_slots = [None] * n

    def publish(self, j: int, xj: list, vj: list) -> None:
        self.x_slots[j] = xj
        self.v_slots[j] = vj

    def read_x(self, reader: int, j: int) -> list:
        return self.x_slots[j]

    def read_v(self, reader: int, j: int) -> list:
        return self.v_slots[j]


def run_rounds(
    n,
    m,
    p_indptr,
    p_indices,
    p_weights,
    q_indptr,
    q_indices,
    q_weights,
    h,
    z,
    x0,
    v0,
    alpha,
    max_iters,
    stop_mode,
    stop_tol,
    y_star,
    guard,
    record_trace,
    buffer_factory=RoundBuffer,
):
    """Run the gradient-tracking iteration for up to ``max_iters`` rounds.

    Returns (x, v, iters_used, verdict, trace) where trace is an
    (iters_used + 1, 2nm) array of stacked [x, v] per iteration when
    requested, else None.
    """
    nm = n * m
    x = [float(x0[k]) for k in range(nm)]
    v = [float(v0[k]) for k in range(nm)]
    hl = [[float(h[i][c]) for c in range(m)] for i in range(n)]
    zl = [float(z[i]) for i in range(n)]
    ys = [float(y_star[c]) for c in range(m)] if y_star is not None else None
    alpha = float(alpha)
    guard = float(guard)

    trace = None
    if record_trace:
        trace = np.empty((max_iters + 1, 2 * nm))
        trace[0, :nm] = x
        trace[0, nm:] = v

    def gradient_at(xs):
        g = [0.0] * nm
        for i in range(n):
            hi = hl[i]
            dot = 0.0
            for c in range(m):
                dot += hi[c] * xs[i * m + c]
            zi = zl[i]
            for c in range(m):
                g[i * m + c] = hi[c] * dot - zi * hi[c]
        return g

    def oracle_err(xs):
        e = 0.0
        for i in range(n):
            for c in range(m):
                d = abs(xs[i * m + c] - ys[c])
                if d > e:
                    e = d
        return e

    if stop_mode == STOP_ORACLE and oracle_err(x) <= stop_tol:
        xv = np.asarray(x)
        vv = np.asarray(v)
        return xv, vv, 0, VERDICT_CONVERGED, (trace[:1].copy() if record_trace else None)

    g_cur = gradient_at(x)
    verdict = VERDICT_MAX_ITERS
    t_used = max_iters

    for t in range(1, max_iters + 1):
        buf = buffer_factory(n)
        for j in range(n):
            buf.publish(j, x[j * m:(j + 1) * m], v[j * m:(j + 1) * m])

        x_new = [0.0] * nm
        v_new = [0.0] * nm
        for i in range(n):
            # pull step: mix in-neighbor estimates, then descend
            for c in range(m):
                acc = 0.0
                for idx in range(p_indptr[i], p_indptr[i + 1]):
                    acc += p_weights[idx] * buf.read_x(i, p_indices[idx])[c]
                x_new[i * m + c] = acc - alpha * v[i * m + c]
        g_new = gradient_at(x_new)
        for i in range(n):
            # push step: mix trackers, then correct by the gradient change
            for c in range(m):
                acc = 0.0
                for idx in range(q_indptr[i], q_indptr[i + 1]):
                    acc += q_weights[idx] * buf.read_v(i, q_indices[idx])[c]
                v_new[i * m + c] = acc + g_new[i * m + c] - g_cur[i * m + c]

        x_prev = x
        x, v, g_cur = x_new, v_new, g_new

        if record_trace:
            trace[t, :nm] = x
            trace[t, nm:] = v

        big = 0.0
        ok = True
        for k in range(nm):
            ax = abs(x[k])
            av = abs(v[k])
            if ax != ax or av != av:
                ok = False
                break
            if ax > big:
                big = ax
            if av > big:
                big = av
        if not ok or big > guard:
            verdict = VERDICT_DIVERGED
            t_used = t
            break

        if stop_mode == STOP_ORACLE:
            if oracle_err(x) <= stop_tol:
                verdict = VERDICT_CONVERGED
                t_used = t
                break
        elif stop_mode == STOP_SUCCESSIVE:
            d = 0.0
            for k in range(nm):
                dk = abs(x[k] - x_prev[k])
                if dk > d:
                    d = dk
            if d <= stop_tol:
                verdict = VERDICT_CONVERGED
                t_used = t
                break

    xv = np.asarray(x)
    vv = np.asarray(v)
    if record_trace:
        trace = trace[: t_used + 1].copy()
    return xv, vv, t_used, verdict, trace
