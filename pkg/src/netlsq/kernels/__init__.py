"""Round-loop kernels and backend selection.

Two interchangeable implementations of the same synchronous round loop:
a compiled Cython kernel and a pure-Python reference. Both follow the
identical accumulation order, so their outputs agree bitwise. The
compiled kernel is used when the extension built; set NETLSQ_BACKEND to
"python" or "compiled" to force one.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import reference
from .reference import (
    STOP_NONE,
    STOP_ORACLE,
    STOP_SUCCESSIVE,
    VERDICT_CONVERGED,
    VERDICT_DIVERGED,
    VERDICT_MAX_ITERS,
)

_BACKEND_ENV = "NETLSQ_BACKEND"


def _load_backend():
    choice = os.environ.get(_BACKEND_ENV, "").strip().lower()
    if choice in ("python", "reference", "pure"):
        return reference, "python"
    try:
        from . import _ext
    except ImportError:
        if choice == "compiled":
            raise RuntimeError(
                "NETLSQ_BACKEND=compiled but the extension is not built"
            )
        return reference, "python"
    return _ext, "compiled"


_impl, _name = _load_backend()


def backend_name() -> str:
    return _name


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("python" or "compiled")."""
    if name is None:
        return _impl
    if name in ("python", "reference", "pure"):
        return reference
    if name == "compiled":
        from . import _ext

        return _ext
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True)
class CsrPlan:
    """Sparse row layout of the two mixing matrices.

    Column indices within each row are sorted ascending; both backends
    consume these arrays verbatim, which pins the accumulation order.
    """

    p_indptr: np.ndarray
    p_indices: np.ndarray
    p_weights: np.ndarray
    q_indptr: np.ndarray
    q_indices: np.ndarray
    q_weights: np.ndarray


def _to_csr(mat: np.ndarray):
    n = mat.shape[0]
    indptr = np.zeros(n + 1, dtype=np.int32)
    indices = []
    weights = []
    for i in range(n):
        cols = np.nonzero(mat[i])[0]
        indices.extend(int(j) for j in cols)
        weights.extend(float(mat[i, j]) for j in cols)
        indptr[i + 1] = len(indices)
    return (
        indptr,
        np.asarray(indices, dtype=np.int32),
        np.asarray(weights, dtype=np.float64),
    )


def build_plan(p: np.ndarray, q: np.ndarray) -> CsrPlan:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("mixing matrices must be square and equally sized")
    pi, pj, pw = _to_csr(p)
    qi, qj, qw = _to_csr(q)
    return CsrPlan(pi, pj, pw, qi, qj, qw)


def run_rounds(plan: CsrPlan, h, z, x0, v0, alpha, max_iters, stop_mode,
               stop_tol, y_star, guard, record_trace, backend=None):
    """Dispatch one full run to the selected kernel."""
    impl = get_backend(backend)
    h = np.ascontiguousarray(h, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    v0 = np.ascontiguousarray(v0, dtype=np.float64)
    ys = None if y_star is None else np.ascontiguousarray(y_star, dtype=np.float64)
    return impl.run_rounds(
        h.shape[0],
        h.shape[1],
        plan.p_indptr,
        plan.p_indices,
        plan.p_weights,
        plan.q_indptr,
        plan.q_indices,
        plan.q_weights,
        h,
        z,
        x0,
        v0,
        float(alpha),
        int(max_iters),
        int(stop_mode),
        float(stop_tol),
        ys,
        float(guard),
        bool(record_trace),
    )
