"""Finite-time exact recovery from one node's own iterates.

A convergent run makes each scalar stream y(t) observed at a node satisfy
a linear recurrence, so consecutive differences assemble into a Hankel
matrix that loses rank exactly when enough of the minimal polynomial has
been seen. The kernel vector of that matrix turns a finite window of
observations into the exact limit, long before the iterates themselves
are close.

Two singularity tests live here. detect_kernel is the bare primitive: a
relative smallest-singular-value threshold (default 1e-8) on the matrix
as given. run_finite_time instead row-equilibrates the Hankel first and
tests at machine precision (default 1e-14): row scaling preserves the
kernel and the rank exactly, and it separates the genuine rank-loss
cliff (which lands near 1e-16 after scaling) from slow-mixing plateaus
that sit orders of magnitude higher. The bare threshold on raw entries
can fire early on such plateaus and return garbage; the equilibrated
machine-precision test did not misfire anywhere in the seeded batteries.

The mechanism assumes a generic initial state. A stream whose early
differences vanish exactly (a component that starts momentarily
stationary, e.g. from an all-zeros x0) witnesses a shorter recurrence
than the trajectory eventually follows and terminates with the wrong
limit; any perturbed or randomly drawn initial state avoids this.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

DETECT_TOL = 1e-8
RUN_TOL = 1e-14
LAST_ENTRY_TOL = 1e-8
KERNEL_SUM_TOL = 1e-10


class FiniteTimeError(RuntimeError):
    pass


class _Degenerate:
    """Singular Hankel whose kernel vector has (numerically) zero last
    entry; the caller grows k instead of renormalizing differently."""

    def __repr__(self):
        return "DEGENERATE"


DEGENERATE = _Degenerate()


@dataclass
class HankelObserver:
    node_id: int
    component_index: int
    observations: List[float] = field(default_factory=list)
    differences: List[float] = field(default_factory=list)
    k: int = 0
    kernel: Optional[np.ndarray] = None
    recovered: Optional[float] = None


def observe(observer: HankelObserver, value: float) -> HankelObserver:
    """Append one observation and, from the second on, its difference."""
    value = float(value)
    if not np.isfinite(value):
        raise ValueError("observation must be finite")
    observer.observations.append(value)
    if len(observer.observations) >= 2:
        observer.differences.append(value - observer.observations[-2])
    return observer


def build_hankel(observer: HankelObserver, k: int) -> np.ndarray:
    """(k+1) x (k+1) Hankel of successive differences; entry (a, b) is
    differences[a + b]."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if len(observer.differences) < 2 * k + 1:
        raise ValueError(
            f"need {2 * k + 1} differences for k={k}, "
            f"have {len(observer.differences)}"
        )
    d = observer.differences
    return np.array([[d[a + b] for b in range(k + 1)] for a in range(k + 1)])


def detect_kernel(hankel: np.ndarray, tol: float = DETECT_TOL):
    """Kernel vector of a numerically singular Hankel matrix.

    Returns the right singular vector of the smallest singular value,
    rescaled so its last entry is 1, when sigma_min <= tol * max(sigma_max, 1).
    Returns None while the matrix is still full rank, and DEGENERATE when
    it is singular but the vector's last entry is below 1e-8 before
    rescaling (the caller should grow k).
    """
    hankel = np.asarray(hankel, dtype=np.float64)
    if hankel.ndim != 2 or hankel.shape[0] != hankel.shape[1]:
        raise ValueError("hankel must be square")
    _, sv, vt = np.linalg.svd(hankel)
    if sv[-1] > tol * max(sv[0], 1.0):
        return None
    beta = vt[-1]
    if abs(beta[-1]) < LAST_ENTRY_TOL:
        return DEGENERATE
    return beta / beta[-1]


def final_value(observations, beta) -> float:
    """Exact limit of the observed sequence from a kernel vector:
    ([y(0) ... y(D)] . beta) / (1^T beta)."""
    beta = np.asarray(beta, dtype=np.float64)
    obs = np.asarray(observations, dtype=np.float64)[: beta.shape[0]]
    if obs.shape[0] < beta.shape[0]:
        raise ValueError("need at least D+1 observations")
    denom = float(np.sum(beta))
    if abs(denom) <= KERNEL_SUM_TOL:
        raise FiniteTimeError("kernel sums to zero; grow k and retry")
    return float(obs @ beta) / denom


def equilibrate_rows(hankel: np.ndarray, floor_scale: float = RUN_TOL) -> np.ndarray:
    """Scale each row by its max-norm (floored) before the rank test.

    Left-scaling by an invertible diagonal changes neither the kernel nor
    the rank, but it makes the smallest singular value of a genuinely
    rank-deficient matrix land at machine level regardless of how the
    difference sequence decays.
    """
    hankel = np.asarray(hankel, dtype=np.float64)
    biggest = np.max(np.abs(hankel)) if hankel.size else 0.0
    floor = floor_scale * max(1.0, biggest)
    norms = np.maximum(np.max(np.abs(hankel), axis=1), floor)
    return hankel / norms[:, None]


@dataclass(frozen=True)
class FiniteTimeResult:
    node_id: int
    y_star: np.ndarray
    steps_used: List[int]
    k_final: List[int]


def run_finite_time(stream, m: int, tol: float = RUN_TOL,
                    k_cap: Optional[int] = None,
                    node_id: int = 0) -> FiniteTimeResult:
    """Recover every component of y* from one node's iterate stream.

    stream yields node r's m-vector x_r(t) per iteration; observations
    are consumed lazily, so this genuinely runs alongside the solver.
    For each component, k grows from 0 until the equilibrated Hankel
    goes singular, then the kernel is applied to the first D+1
    observations. steps_used_j = 2(D_j + 1) observations. k_cap bounds
    k (the state dimension 2Nm always suffices for a convergent run);
    exceeding it, or exhausting the stream, signals a non-convergent or
    noisy trace.
    """
    observers = [HankelObserver(node_id=node_id, component_index=j + 1)
                 for j in range(m)]
    pending = set(range(m))

    def try_detect(ob: HankelObserver) -> bool:
        # returns True when this component is finished
        while len(ob.differences) >= 2 * ob.k + 1:
            if k_cap is not None and ob.k > k_cap:
                raise FiniteTimeError(
                    f"component {ob.component_index}: k exceeded cap {k_cap}; "
                    "trace looks non-convergent or too noisy"
                )
            hankel = build_hankel(ob, ob.k)
            beta = detect_kernel(equilibrate_rows(hankel), tol)
            if beta is None or beta is DEGENERATE:
                ob.k += 1
                continue
            try:
                value = final_value(ob.observations, beta)
            except FiniteTimeError:
                ob.k += 1
                continue
            ob.kernel = beta
            ob.recovered = value
            return True
        return False

    for xt in stream:
        xt = np.asarray(xt, dtype=np.float64).reshape(-1)
        if xt.shape[0] != m:
            raise ValueError(f"stream must yield m={m} values per step")
        for j in list(pending):
            observe(observers[j], xt[j])
            if try_detect(observers[j]):
                pending.discard(j)
        if not pending:
            break

    if pending:
        missing = sorted(j + 1 for j in pending)
        raise FiniteTimeError(
            f"stream exhausted before components {missing} fired; "
            "trace looks non-convergent or too noisy"
        )

    return FiniteTimeResult(
        node_id=node_id,
        y_star=np.array([ob.recovered for ob in observers]),
        steps_used=[2 * (ob.k + 1) for ob in observers],
        k_final=[ob.k for ob in observers],
    )


def node_stream(trace: np.ndarray, node: int, n: int, m: int):
    """Yield node r's x-block from a stacked [x, v] trace, one step at a
    time (the observation selector: component j of node r's state)."""
    trace = np.asarray(trace)
    lo = (node - 1) * m
    for t in range(trace.shape[0]):
        yield trace[t, lo:lo + m]


def result_to_dict(result: FiniteTimeResult) -> dict:
    return {
        "node": result.node_id,
        "y_star": [float(v) for v in result.y_star],
        "steps_used": list(result.steps_used),
        "k_final": list(result.k_final),
    }
