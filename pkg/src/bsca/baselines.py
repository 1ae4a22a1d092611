"""Reactive caching baselines and the best static configuration in hindsight."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .domain import Topology, UtilityModel, feasible_initial_cache
from .projection import project_capped_simplex
from .routing import batch_route


class LRUCache:
    """Single cache, least-recently-used eviction."""

    name = "lru"

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.order: OrderedDict[int, None] = OrderedDict()

    @property
    def contents(self) -> set[int]:
        return set(self.order)

    def __contains__(self, f: int) -> bool:
        return f in self.order

    def touch(self, f: int) -> None:
        self.order.move_to_end(f)

    def insert(self, f: int) -> None:
        if self.capacity <= 0:
            return
        if len(self.order) >= self.capacity:
            self.order.popitem(last=False)
        self.order[f] = None

    def step(self, f: int) -> int:
        if f in self.order:
            self.order.move_to_end(f)
            return 1
        self.insert(f)
        return 0


class LFUCache:
    """Single cache, least-frequently-used eviction over the full request history.

    Ties are broken by evicting the lowest file id.
    """

    name = "lfu"

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.counts: dict[int, int] = {}
        self.cached: set[int] = set()

    @property
    def contents(self) -> set[int]:
        return set(self.cached)

    def step(self, f: int) -> int:
        self.counts[f] = self.counts.get(f, 0) + 1
        if f in self.cached:
            return 1
        if self.capacity <= 0:
            return 0
        if len(self.cached) >= self.capacity:
            victim = min(self.cached, key=lambda k: (self.counts[k], k))
            self.cached.remove(victim)
        self.cached.add(f)
        return 0


def lru_step(state: LRUCache, f: int) -> tuple[LRUCache, int]:
    return state, state.step(f)


def lfu_step(state: LFUCache, f: int) -> tuple[LFUCache, int]:
    return state, state.step(f)


class MultiLRU:
    """LRU caches over a bipartite topology.

    A request is served by the reachable holder with the highest utility (the
    MBS, utility 0, if there is none) and that holder's recency is refreshed.
    Each request is also assigned to one reachable target cache, picked
    uniformly at random, which applies the LRU rule: the file is inserted there
    if absent.  With ``lazy`` set, the target inserts only when no reachable
    cache holds the file, and then with probability ``q`` (q-LRU, lazy rule).
    """

    def __init__(self, top: Topology, seed=None, *, lazy: bool = False, q: float = 1.0):
        self.top = top
        self.caches = [LRUCache(c) for c in top.capacities]
        self.rng = np.random.default_rng(seed)
        self.lazy = lazy
        self.q = q
        self.name = "qlru-lazy" if lazy else "mlru"
        self.last_hit = 0

    def step(self, f: int, location: int, weights: np.ndarray) -> float:
        """Serve one request; returns the accrued utility (0 on a miss)."""
        reach = self.top.reachable_caches(location)
        self.last_hit = 0
        if reach.size == 0:
            return 0.0
        best, best_w = -1, -1.0
        for j in reach:
            if f in self.caches[j] and weights[f, location, j] > best_w:
                best, best_w = j, weights[f, location, j]
        utility = 0.0
        if best >= 0:
            self.caches[best].touch(f)
            utility = float(best_w)
            self.last_hit = 1
            if self.lazy:
                return utility
        target = reach[self.rng.integers(reach.size)] if reach.size > 1 else reach[0]
        cache = self.caches[target]
        if f in cache:
            cache.touch(f)
            return utility
        if self.q < 1.0 and self.rng.random() >= self.q:
            return utility
        cache.insert(f)
        return utility


def mlru_step(state: MultiLRU, f: int, location: int, weights) -> tuple[MultiLRU, float]:
    return state, state.step(f, location, weights)


def qlru_lazy_step(state: MultiLRU, f: int, location: int, weights) -> tuple[MultiLRU, float]:
    return state, state.step(f, location, weights)


@dataclass
class HindsightSolution:
    y: np.ndarray
    total_utility: float
    method: str
    history: list[float] | None = None


def hindsight_single_cache(files, w, capacity: int, num_files: int | None = None) -> HindsightSolution:
    """Cache the ``capacity`` files with the largest ``w[n] * count[n]``."""
    files = np.asarray(files, dtype=np.int64)
    w = np.asarray(w, dtype=float)
    n = w.size if num_files is None else num_files
    counts = np.bincount(files, minlength=n).astype(float)
    scores = w * counts
    top = np.argsort(-scores, kind="stable")[:capacity]
    y = np.zeros((n, 1))
    y[top, 0] = 1.0
    return HindsightSolution(y, float(scores[top].sum()), "exact-single-cache")


class RequestAggregate:
    """Request log collapsed to counts per distinct (file, location, weight snapshot)."""

    def __init__(self, files, locations, top: Topology, utility: UtilityModel, slots=None):
        files = np.asarray(files, dtype=np.int64)
        locations = np.asarray(locations, dtype=np.int64)
        if slots is None:
            slots = np.arange(1, files.size + 1)
        keys = np.array([utility.snapshot_key(int(t)) for t in slots], dtype=np.int64) \
            if utility.time_varying else np.zeros(files.size, dtype=np.int64)
        n, i = top.library_size, top.num_locations
        packed = (keys * i + locations) * n + files
        uniq, inverse, counts = np.unique(packed, return_inverse=True, return_counts=True)
        self.files = uniq % n
        self.locations = (uniq // n) % i
        keys_u = uniq // (n * i)
        self.counts = counts.astype(float)
        self.inverse = inverse
        self.mask = top.reachable[self.locations]
        rows = []
        first_slot = {}
        for k, t in zip(keys, slots):
            first_slot.setdefault(int(k), int(t))
        for f, loc, k in zip(self.files, self.locations, keys_u):
            rows.append(utility.at(first_slot[int(k)])[f, loc])
        self.weights = np.array(rows).reshape(len(uniq), top.num_caches)

    def objective(self, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Total utility of static ``y`` and a supergradient (N x J)."""
        util, beta = batch_route(self.weights, y[self.files], self.mask)
        grad = np.zeros_like(y)
        np.add.at(grad, self.files, beta * self.counts[:, None])
        return float(util @ self.counts), grad

    def per_request_utility(self, y: np.ndarray) -> np.ndarray:
        util, _ = batch_route(self.weights, y[self.files], self.mask)
        return util[self.inverse]


def _project_matrix(q: np.ndarray, top: Topology) -> np.ndarray:
    return np.column_stack([project_capped_simplex(q[:, j], c) for j, c in enumerate(top.capacities)])


def hindsight_network(files, locations, top: Topology, utility: UtilityModel, iters: int = 400,
                      passes: int = 5, method: str = "ascent", slots=None) -> HindsightSolution:
    """Best static caching matrix for a request log.

    ``ascent`` runs projected supergradient ascent on the (concave, piecewise
    linear) total utility; each pass restarts from the best point so far with a
    smaller step and also tries the pass average.  ``lp`` solves the joint
    caching/routing linear program exactly with HiGHS.
    """
    agg = RequestAggregate(files, locations, top, utility, slots)
    if method == "lp":
        return _hindsight_lp(agg, top)
    if method != "ascent":
        raise ValueError(f"unknown hindsight method {method!r}")
    y = feasible_initial_cache(top, "uniform")
    best_val, _ = agg.objective(y)
    best_y = y
    history = [best_val]
    diameter = math.sqrt(sum(2.0 * min(c, top.library_size - c) for c in top.capacities))
    for p in range(passes):
        y = best_y.copy()
        avg = np.zeros_like(y)
        scale = diameter / (2.0 ** p)
        for k in range(iters):
            val, grad = agg.objective(y)
            if val > best_val:
                best_val, best_y = val, y.copy()
            gnorm = np.linalg.norm(grad)
            if gnorm == 0:
                break
            y = _project_matrix(y + (scale / math.sqrt(k + 1)) * grad / gnorm, top)
            avg += y
        val, _ = agg.objective(y)
        if val > best_val:
            best_val, best_y = val, y.copy()
        avg_y = _project_matrix(avg / max(iters, 1), top)
        val, _ = agg.objective(avg_y)
        if val > best_val:
            best_val, best_y = val, avg_y
        history.append(best_val)
    return HindsightSolution(best_y, best_val, "offline-ascent", history)


def _hindsight_lp(agg: RequestAggregate, top: Topology) -> HindsightSolution:
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    n, num_caches = top.library_size, top.num_caches
    rows_p, cols_j = np.nonzero(agg.mask)
    nz = rows_p.size
    ny = n * num_caches
    # variables: y (n*J, row-major by file) then one z per reachable (row, cache)
    cost = np.zeros(ny + nz)
    cost[ny:] = -agg.counts[rows_p] * agg.weights[rows_p, cols_j]
    r, c, v = [], [], []
    # demand: sum_j z <= 1 per aggregated row
    for k in range(nz):
        r.append(rows_p[k]); c.append(ny + k); v.append(1.0)
    row = len(agg.counts)
    # availability: z - y <= 0
    for k in range(nz):
        r += [row + k, row + k]
        c += [ny + k, agg.files[rows_p[k]] * num_caches + cols_j[k]]
        v += [1.0, -1.0]
    row += nz
    # capacity per cache
    for j in range(num_caches):
        for f in range(n):
            r.append(row + j); c.append(f * num_caches + j); v.append(1.0)
    row += num_caches
    a_ub = coo_matrix((v, (r, c)), shape=(row, ny + nz)).tocsr()
    b_ub = np.concatenate([np.ones(len(agg.counts)), np.zeros(nz), np.asarray(top.capacities, float)])
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=(0.0, 1.0), method="highs")
    if not res.success:
        raise RuntimeError(f"hindsight LP failed: {res.message}")
    y = np.clip(res.x[:ny].reshape(n, num_caches), 0.0, 1.0)
    total, _ = agg.objective(y)
    return HindsightSolution(y, total, "lp")
