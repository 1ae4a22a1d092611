"""Online supergradient caching (BSCA).

Each slot: route the request against the current caching matrix, read the
routing duals as a supergradient, take an ascent step and project back onto
the per-cache capped simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Request, Topology, UtilityModel, feasible_initial_cache
from .projection import project_cache
from .routing import RoutingOutcome, route

SCHEDULES = ("fixed", "diminishing", "doubling")


@dataclass(frozen=True)
class StepSchedule:
    mode: str = "fixed"
    horizon: int | None = None

    def __post_init__(self):
        if self.mode not in SCHEDULES:
            raise ValueError(f"unknown step schedule {self.mode!r}; expected one of {SCHEDULES}")


def step_size(mode: str, t: int, T: int | None, delta_y: float, K: float) -> float:
    """Step size for slot ``t`` (1-based)."""
    if t < 1:
        raise ValueError("slots are numbered from 1")
    if mode == "diminishing":
        return 1.0 / math.sqrt(t)
    if mode == "doubling":
        horizon = 1 << (t - 1).bit_length()
    elif mode == "fixed":
        if not T:
            raise ValueError("fixed step size needs the horizon T; use the diminishing or doubling schedule instead")
        horizon = T
    else:
        raise ValueError(f"unknown step schedule {mode!r}")
    if K <= 0:
        return 1.0 / math.sqrt(horizon)
    return delta_y / (K * math.sqrt(horizon))


def cache_diameter(capacity: int, library_size: int) -> float:
    """Diameter of one cache's capped simplex."""
    if capacity <= library_size / 2:
        return math.sqrt(2 * capacity)
    return math.sqrt(2 * (library_size - capacity))


def constants(top: Topology, w: UtilityModel | float) -> tuple[float, float, int]:
    """``(delta_Y, K, deg)``: diameter of the caching set, bound on the
    supergradient norm and the maximum location degree."""
    w_max = w.w_max if isinstance(w, UtilityModel) else float(w)
    delta = math.sqrt(sum(cache_diameter(c, top.library_size) ** 2 for c in top.capacities))
    deg = top.deg
    return delta, w_max * math.sqrt(deg), deg


@dataclass(frozen=True)
class Supergradient:
    """Sparse supergradient: nonzero only at ``(file, location, caches)``."""

    file: int
    location: int
    caches: np.ndarray
    values: np.ndarray

    def dense(self, num_files: int, num_caches: int) -> np.ndarray:
        g = np.zeros((num_files, num_caches))
        g[self.file, self.caches] = self.values
        return g

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def supergradient(outcome: RoutingOutcome, req: Request) -> Supergradient:
    """Supergradient of the slot utility at the routed caching matrix."""
    return Supergradient(req.file, req.location, outcome.caches, np.asarray(outcome.beta, dtype=float))


def single_cache_gradient(outcome: RoutingOutcome, req: Request) -> Supergradient:
    """Gradient ``w^n r^n`` of the linear single-cache utility."""
    return Supergradient(req.file, req.location, outcome.caches, np.asarray(outcome.weights, dtype=float))


def reconfig_supergradient(g, y_t: np.ndarray, y_prev: np.ndarray | None, costs, *,
                           requested_only: bool = False) -> np.ndarray:
    """Supergradient of utility minus reconfiguration cost, as a dense N x J matrix.

    The cost term ``-sum c * max(y_t - y_prev, 0)`` contributes ``-c`` wherever
    the allocation grew.  With ``requested_only`` the correction is restricted
    to the requested file's row.
    """
    y_t = np.asarray(y_t, dtype=float)
    n, num_caches = y_t.shape
    q = g.dense(n, num_caches) if isinstance(g, Supergradient) else np.array(g, dtype=float)
    if y_prev is None:
        return q
    c = np.broadcast_to(np.asarray(costs, dtype=float), y_t.shape)
    if np.any(c < 0):
        raise ValueError("reconfiguration costs must be nonnegative")
    grew = (y_t - y_prev) > 0
    if requested_only:
        if not isinstance(g, Supergradient):
            raise ValueError("requested_only needs a sparse Supergradient to know the requested file")
        row = np.zeros_like(grew)
        row[g.file] = grew[g.file]
        grew = row
    return q - np.where(grew, c, 0.0)


def reconfig_cost(y_t: np.ndarray, y_prev: np.ndarray | None, costs) -> float:
    if y_prev is None:
        return 0.0
    c = np.broadcast_to(np.asarray(costs, dtype=float), y_t.shape)
    return float((c * np.maximum(y_t - y_prev, 0.0)).sum())


class BSCA:
    """Bipartite supergradient caching policy.

    ``step`` consumes one request and returns the routing outcome computed
    against the caching matrix in force *before* the update.
    """

    name = "bsca"

    def __init__(self, top: Topology, utility: UtilityModel, schedule: StepSchedule | str = "fixed",
                 horizon: int | None = None, init: str = "uniform", reconfig_costs=None,
                 requested_only: bool = False):
        if isinstance(schedule, str):
            schedule = StepSchedule(schedule, horizon)
        if schedule.mode == "fixed" and not schedule.horizon:
            raise ValueError("fixed step size needs the horizon T; use the diminishing or doubling schedule instead")
        self.top = top
        self.utility = utility
        self.schedule = schedule
        self.y = feasible_initial_cache(top, init)
        self.t = 1
        self.delta_y, self.K, self.deg = constants(top, utility)
        self.costs = None
        self.prev_y = None
        self.requested_only = requested_only
        self.last_cost = 0.0
        if reconfig_costs is not None:
            self.costs = np.broadcast_to(np.asarray(reconfig_costs, dtype=float), self.y.shape).copy()
            if np.any(self.costs < 0):
                raise ValueError("reconfiguration costs must be nonnegative")
            self.K += float(self.costs.max(initial=0.0)) * math.sqrt(self.deg)
        self._single = top.num_caches == 1

    def eta(self, t: int | None = None) -> float:
        return step_size(self.schedule.mode, self.t if t is None else t, self.schedule.horizon,
                         self.delta_y, self.K)

    def gradient(self, outcome: RoutingOutcome, req: Request) -> Supergradient:
        if self._single:
            return single_cache_gradient(outcome, req)
        return supergradient(outcome, req)

    def step(self, req: Request, weights=None) -> RoutingOutcome:
        w = self.utility.at(self.t) if weights is None else weights
        outcome = route(req, self.y, self.top, w)
        g = self.gradient(outcome, req)
        eta = self.eta()
        y_next = self.y.copy()
        if self.costs is None:
            for j, gj in zip(g.caches, g.values):
                if gj > 0:
                    col = self.y[:, j].copy()
                    col[req.file] += eta * gj
                    y_next[:, j] = project_cache(col, self.top.capacities[j])
            self.last_cost = 0.0
        else:
            self.last_cost = reconfig_cost(self.y, self.prev_y, self.costs)
            q = reconfig_supergradient(g, self.y, self.prev_y, self.costs, requested_only=self.requested_only)
            for j in np.flatnonzero(np.any(q != 0, axis=0)):
                y_next[:, j] = project_cache(self.y[:, j] + eta * q[:, j], self.top.capacities[j])
            self.prev_y = self.y
        self.y = y_next
        self.t += 1
        return outcome
