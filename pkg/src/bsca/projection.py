"""Euclidean projection onto the per-cache capped simplex.

The feasible set of one cache is ``{y in [0, 1]^N : sum(y) <= C}``.  Caches are
independent, so projecting a caching matrix is one projection per column.

``project_cache`` is the fast partition method used online: it assumes at
most one coordinate of the input exceeds 1, which holds for ``y + eta * g``
with ``y`` feasible and ``g`` supported on a single file.  Inputs outside that
regime are delegated to ``project_capped_simplex``.

``oracle_project`` and ``oracle_project_enum`` are slow reference solvers
that check KKT conditions directly; they exist for testing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .domain import Topology

TOL = 1e-12
KKT_TOL = 1e-10


@dataclass(frozen=True)
class PartitionState:
    """Final partition of the fast projection: fully cached, partial, evicted."""

    full: frozenset
    partial: frozenset
    evicted: frozenset
    rho: float


def _check_capacity(n: int, capacity) -> float:
    if capacity >= n:
        raise ValueError(f"capacity {capacity} must be < N={n}; the projection is degenerate")
    if capacity < 0:
        raise ValueError("capacity must be nonnegative")
    return float(capacity)


def _partition_projection(q: np.ndarray, cap: float):
    """Partition search for the tight case with at most one entry above 1.

    The spike (largest entry) ends at exactly 1 iff lowering every entry by
    ``spike - 1`` already fits the budget; that single test fixes ``full``
    up front.  The remaining passes only move entries that went negative
    from ``partial`` to ``evicted``, so at most N passes are needed.
    """
    n = q.size
    partial = np.ones(n, dtype=bool)
    full = -1
    spike = int(np.argmax(q))
    if q[spike] > 1.0 + TOL and np.clip(q - (q[spike] - 1.0), 0.0, 1.0).sum() <= cap + TOL:
        full = spike
        partial[spike] = False
    passes = 0
    rho = 0.0
    y = np.zeros(n)
    if full >= 0:
        y[full] = 1.0
    while partial.any():
        passes += 1
        rho = 2.0 * ((full >= 0) - cap + q[partial].sum()) / int(partial.sum())
        y = np.where(partial, q - rho / 2.0, 0.0)
        if full >= 0:
            y[full] = 1.0
        negative = partial & (y < -TOL)
        if not negative.any():
            break
        partial &= ~negative
    np.clip(y, 0.0, 1.0, out=y)
    return y, passes, full, partial, rho


def project_cache(q, capacity, *, return_passes: bool = False):
    """Project ``q`` onto ``{y in [0,1]^N : sum(y) <= capacity}``.

    With ``return_passes`` the number of partition passes is returned as well
    (0 when no partition search was needed).
    """
    q = np.asarray(q, dtype=float)
    cap = _check_capacity(q.size, capacity)
    clipped = np.clip(q, 0.0, 1.0)
    if clipped.sum() <= cap + TOL:
        return (clipped, 0) if return_passes else clipped
    if np.count_nonzero(q > 1.0 + TOL) > 1:
        y = project_capped_simplex(q, cap)
        return (y, 0) if return_passes else y
    y, passes, *_ = _partition_projection(q, cap)
    return (y, passes) if return_passes else y


def partition_of(q, capacity) -> PartitionState:
    """Partition found by the fast projection (tight case only)."""
    q = np.asarray(q, dtype=float)
    cap = _check_capacity(q.size, capacity)
    _, _, full, partial, rho = _partition_projection(q, cap)
    idx = set(range(q.size))
    m1 = {full} if full >= 0 else set()
    m2 = set(np.flatnonzero(partial).tolist())
    return PartitionState(frozenset(m1), frozenset(m2), frozenset(idx - m1 - m2), float(rho))


def project_all(q: np.ndarray, top: Topology, columns=None) -> np.ndarray:
    """Column-wise projection of an N x J matrix onto the caching set.

    ``columns`` restricts the work to the listed caches; the remaining
    columns are assumed feasible already and copied through.
    """
    q = np.asarray(q, dtype=float)
    out = q.copy()
    cols = range(q.shape[1]) if columns is None else columns
    for j in cols:
        out[:, j] = project_cache(q[:, j], top.capacities[j])
    return out


def project_capped_simplex(q, capacity) -> np.ndarray:
    """General projection by locating the threshold ``tau`` with
    ``sum(clip(q - tau, 0, 1)) == capacity`` among the breakpoints of that
    piecewise-linear function.  Works for any real input.
    """
    q = np.asarray(q, dtype=float)
    cap = _check_capacity(q.size, capacity)
    clipped = np.clip(q, 0.0, 1.0)
    if clipped.sum() <= cap:
        return clipped
    bps = np.unique(np.concatenate([q - 1.0, q]))
    bps = bps[bps >= 0.0]
    if bps.size == 0 or bps[0] > 0.0:
        bps = np.concatenate([[0.0], bps])
    sums = np.clip(q[None, :] - bps[:, None], 0.0, 1.0).sum(axis=1)
    # sums is nonincreasing; sums[0] > cap, and the last breakpoint gives 0
    k = int(np.searchsorted(-sums, -cap, side="left"))
    lo, hi = bps[k - 1], bps[k]
    s_lo, s_hi = sums[k - 1], sums[k]
    tau = hi if s_lo == s_hi else lo + (s_lo - cap) * (hi - lo) / (s_lo - s_hi)
    return np.clip(q - tau, 0.0, 1.0)


def oracle_project(q, capacity) -> np.ndarray:
    """Reference projection by search over ordered partitions.

    Sorting ``q`` in decreasing order, the optimal partition puts the first
    ``a`` entries at 1, the last ``b`` at 0 and the rest at ``q - rho/2``.
    Every ``(a, b)`` pair is tested against the KKT sign conditions.
    """
    q = np.asarray(q, dtype=float)
    n = q.size
    cap = _check_capacity(n, capacity)
    clipped = np.clip(q, 0.0, 1.0)
    if clipped.sum() <= cap:
        return clipped
    order = np.argsort(-q, kind="stable")
    qs = q[order]
    prefix = np.concatenate([[0.0], np.cumsum(qs)])
    a = np.arange(n + 1)[:, None]
    b = np.arange(n + 1)[None, :]
    mid = n - a - b
    valid_shape = mid >= 1
    safe_mid = np.where(valid_shape, mid, 1)
    end = np.clip(n - b, 0, n)
    mid_sum = prefix[end] - prefix[np.minimum(a, n)]
    rho = 2.0 * (a - cap + mid_sum) / safe_mid
    half = rho / 2.0
    first_mid = qs[np.clip(a, 0, n - 1)] - half
    last_mid = qs[np.clip(n - b - 1, 0, n - 1)] - half
    last_full = np.where(a > 0, qs[np.clip(a - 1, 0, n - 1)] - half, np.inf)
    first_evicted = np.where(b > 0, qs[np.clip(n - b, 0, n - 1)] - half, -np.inf)
    ok = (
        valid_shape
        & (rho >= -KKT_TOL)
        & (first_mid <= 1.0 + KKT_TOL)
        & (last_mid >= -KKT_TOL)
        & (last_full >= 1.0 - KKT_TOL)
        & (first_evicted <= KKT_TOL)
    )
    ys = None
    if ok.any():
        ai, bi = np.argwhere(ok)[0]
        ys = np.zeros(n)
        ys[:ai] = 1.0
        ys[ai:n - bi] = qs[ai:n - bi] - rho[ai, bi] / 2.0
    else:
        # no partial entries: a == cap ones, rest zeros, rho anywhere in a window
        ai = int(round(cap))
        if abs(ai - cap) < KKT_TOL and 0 < ai < n:
            lo = max(0.0, 2.0 * qs[ai])
            hi = 2.0 * (qs[ai - 1] - 1.0)
            if lo <= hi + KKT_TOL:
                ys = np.zeros(n)
                ys[:ai] = 1.0
    if ys is None:
        raise RuntimeError("no partition satisfies the KKT conditions")
    out = np.empty(n)
    out[order] = np.clip(ys, 0.0, 1.0)
    return out


@lru_cache(maxsize=16)
def _sign_patterns(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1, 2), repeat=n)), dtype=np.int8)


def oracle_project_enum(q, capacity) -> np.ndarray:
    """Reference projection by enumerating all ``3^N`` assignments of each
    coordinate to {at 1, interior, at 0}.  Intended for ``N <= 8``.
    """
    q = np.asarray(q, dtype=float)
    n = q.size
    cap = _check_capacity(n, capacity)
    if n > 10:
        raise ValueError("sign-pattern enumeration is limited to N <= 10")
    clipped = np.clip(q, 0.0, 1.0)
    if clipped.sum() <= cap:
        return clipped
    pats = _sign_patterns(n)
    at_one = pats == 0
    inner = pats == 1
    at_zero = pats == 2
    n_one = at_one.sum(axis=1)
    n_inner = inner.sum(axis=1)
    inner_sum = (inner * q).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(n_inner > 0, 2.0 * (n_one - cap + inner_sum) / np.maximum(n_inner, 1), np.nan)
    # patterns without interior entries: rho is free in a window; take its low end
    lo_free = np.maximum(0.0, 2.0 * np.where(at_zero, q, -np.inf).max(axis=1))
    rho = np.where(n_inner > 0, rho, lo_free)
    half = rho[:, None] / 2.0
    y = np.where(at_one, 1.0, np.where(inner, q - half, 0.0))
    ok = rho >= -KKT_TOL
    ok &= np.abs(y.sum(axis=1) - cap) <= 1e-9
    ok &= np.all(~inner | ((y >= -KKT_TOL) & (y <= 1.0 + KKT_TOL)), axis=1)
    ok &= np.all(~at_one | (2.0 * (q - 1.0) - rho[:, None] >= -KKT_TOL), axis=1)
    ok &= np.all(~at_zero | (rho[:, None] - 2.0 * q >= -KKT_TOL), axis=1)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise RuntimeError("no sign pattern satisfies the KKT conditions")
    return np.clip(y[hits[0]], 0.0, 1.0)
