"""Core value types for bipartite cache networks.

Indices are 0-based throughout: files ``0..N-1``, user locations ``0..I-1``
and small-cell caches ``0..J-1``.  The macro base station (MBS) is never
materialised; it stores the whole library and yields zero utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import networkx as nx
import numpy as np

FEASIBILITY_TOL = 1e-9


class Request(NamedTuple):
    slot: int
    file: int
    location: int


@dataclass(frozen=True)
class Topology:
    """Bipartite connectivity between user locations and caches."""

    reachable: np.ndarray
    capacities: tuple[int, ...]
    library_size: int
    _reach_lists: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        reach = np.array(self.reachable, dtype=bool)
        if reach.ndim == 1:
            reach = reach.reshape(1, -1)
        reach.setflags(write=False)
        object.__setattr__(self, "reachable", reach)
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
        object.__setattr__(self, "library_size", int(self.library_size))
        lists = tuple(np.flatnonzero(row) for row in reach)
        object.__setattr__(self, "_reach_lists", lists)

    @classmethod
    def single_cache(cls, library_size: int, capacity: int) -> "Topology":
        return cls(np.ones((1, 1), dtype=bool), (capacity,), library_size)

    @classmethod
    def full(cls, num_locations: int, capacities: Sequence[int], library_size: int) -> "Topology":
        return cls(np.ones((num_locations, len(capacities)), dtype=bool), capacities, library_size)

    @property
    def num_locations(self) -> int:
        return self.reachable.shape[0]

    @property
    def num_caches(self) -> int:
        return len(self.capacities)

    @property
    def deg(self) -> int:
        """Largest number of caches reachable from a single location."""
        if self.reachable.size == 0:
            return 0
        return int(self.reachable.sum(axis=1).max())

    def reachable_caches(self, location: int) -> np.ndarray:
        return self._reach_lists[location]


def validate_topology(top: Topology) -> list[str]:
    """Return the list of violated invariants (empty when the topology is valid)."""
    problems = []
    n = top.library_size
    if n < 1:
        problems.append("library size must be >= 1")
    if top.num_caches < 1:
        problems.append("at least one cache is required")
    if top.reachable.ndim != 2 or top.reachable.shape[0] < 1:
        problems.append("reachability matrix must be I x J with I >= 1")
    elif top.reachable.shape[1] != top.num_caches:
        problems.append(
            f"reachability matrix has {top.reachable.shape[1]} columns but {top.num_caches} capacities given"
        )
    for j, c in enumerate(top.capacities):
        if c < 1:
            problems.append(f"cache {j}: capacity must be a positive integer")
        if c >= n:
            problems.append(f"cache {j}: capacity must be < N ({c} >= {n})")
    return problems


def check_shape(top: Topology, num_locations: int) -> list[str]:
    """Shape check against an externally declared number of locations."""
    if top.reachable.shape[0] != num_locations:
        return [f"reachability matrix has {top.reachable.shape[0]} rows, expected I={num_locations}"]
    return []


class UtilityModel:
    """Per-(file, location, cache) utility weights.

    ``weights`` has shape ``(N, I, J)``.  A time-varying model is built from a
    sequence of such arrays (switching every ``period`` slots, cycling) or a
    callback ``fn(t) -> array``; slots are 1-based.
    """

    def __init__(self, weights, *, snapshots=None, period: int = 1,
                 callback: Callable[[int], np.ndarray] | None = None, w_max: float | None = None):
        if snapshots is not None:
            snaps = np.asarray(snapshots, dtype=float)
            if snaps.ndim != 4:
                raise ValueError("snapshots must have shape (E, N, I, J)")
            self._snapshots = snaps
            base = snaps[0]
        else:
            self._snapshots = None
            base = np.asarray(weights, dtype=float)
        if base.ndim != 3:
            raise ValueError("weights must have shape (N, I, J)")
        if period < 1:
            raise ValueError("period must be >= 1")
        self.weights = base
        self.period = int(period)
        self.callback = callback
        check = self._snapshots if self._snapshots is not None else base
        if not np.all(np.isfinite(check)) or np.any(check < 0):
            raise ValueError("utility weights must be finite and nonnegative")
        if w_max is None:
            if callback is not None:
                raise ValueError("a callback utility model needs an explicit w_max")
            w_max = float(check.max()) if check.size else 0.0
        self.w_max = float(w_max)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.weights.shape

    @property
    def time_varying(self) -> bool:
        return self._snapshots is not None or self.callback is not None

    def snapshot_key(self, t: int) -> int:
        """Identifier of the weight snapshot in force at slot ``t``."""
        if self.callback is not None:
            return t
        if self._snapshots is None:
            return 0
        return ((t - 1) // self.period) % len(self._snapshots)

    def at(self, t: int) -> np.ndarray:
        if self.callback is not None:
            w = np.asarray(self.callback(t), dtype=float)
            if np.any(w < 0) or w.max(initial=0.0) > self.w_max + 1e-12:
                raise ValueError(f"slot {t}: callback weights outside [0, w_max]")
            return w
        if self._snapshots is None:
            return self.weights
        return self._snapshots[self.snapshot_key(t)]

    @classmethod
    def uniform(cls, num_files: int, num_locations: int, num_caches: int, value: float = 1.0):
        return cls(np.full((num_files, num_locations, num_caches), float(value)))

    @classmethod
    def from_cache_vector(cls, per_cache: Sequence[float], num_files: int, num_locations: int):
        """Same utility vector ``w^n = per_cache`` for every file and location."""
        vec = np.asarray(per_cache, dtype=float)
        return cls(np.broadcast_to(vec, (num_files, num_locations, vec.size)).copy())

    @classmethod
    def from_file_vector(cls, per_file: Sequence[float], num_locations: int = 1, num_caches: int = 1):
        vec = np.asarray(per_file, dtype=float)
        return cls(np.broadcast_to(vec[:, None, None], (vec.size, num_locations, num_caches)).copy())

    @classmethod
    def factored(cls, w_cache: np.ndarray, w_route: np.ndarray):
        """``w[n, i, j] = w_cache[n, j] * w_route[i, j]``."""
        wc = np.asarray(w_cache, dtype=float)
        wr = np.asarray(w_route, dtype=float)
        return cls(wc[:, None, :] * wr[None, :, :])


def is_feasible(y: np.ndarray, top: Topology, tol: float = FEASIBILITY_TOL) -> bool:
    y = np.asarray(y)
    if y.shape != (top.library_size, top.num_caches):
        return False
    if y.min() < -tol or y.max() > 1 + tol:
        return False
    return bool(np.all(y.sum(axis=0) <= np.asarray(top.capacities) + tol))


def feasible_initial_cache(top: Topology, fill: str = "uniform") -> np.ndarray:
    """Caching matrix ``y`` (N x J) with every cache exactly full.

    ``uniform`` stores ``C_j / N`` of every file; ``top-index`` stores files
    ``0..C_j-1`` entirely.
    """
    n, caps = top.library_size, top.capacities
    y = np.zeros((n, len(caps)))
    for j, c in enumerate(caps):
        if fill == "uniform":
            y[:, j] = c / n
        elif fill == "top-index":
            y[:c, j] = 1.0
        else:
            raise ValueError(f"unknown fill mode {fill!r}")
    return y


@dataclass
class GeneralGraph:
    """Undirected network with nonnegative link costs.

    Node names are arbitrary hashables.  Parallel edges are allowed; the
    cheapest one wins.
    """

    edges: list[tuple[object, object, float]]
    users: list[object]
    caches: list[object]
    mbs: object
    capacities: Sequence[int] = ()
    library_size: int = 1


def reduce_general_graph(g: GeneralGraph) -> tuple[Topology, np.ndarray]:
    """Collapse a general network into a bipartite topology.

    Returns the topology and an ``I x J`` table of min-cost path values
    (``inf`` where the cache is unreachable).  Links are assumed uncapacitated.
    """
    graph = nx.Graph()
    graph.add_nodes_from(g.users)
    graph.add_nodes_from(g.caches)
    graph.add_node(g.mbs)
    for u, v, cost in g.edges:
        if cost < 0 or not math.isfinite(cost):
            raise ValueError(f"edge {u!r}-{v!r}: cost must be finite and >= 0")
        if graph.has_edge(u, v) and graph[u][v]["weight"] <= cost:
            continue
        graph.add_edge(u, v, weight=float(cost))

    costs = np.full((len(g.users), len(g.caches)), np.inf)
    for i, user in enumerate(g.users):
        dist = nx.single_source_dijkstra_path_length(graph, user, weight="weight")
        if g.mbs not in dist:
            raise ValueError(f"unserviceable location {user!r}: no path to the MBS")
        for j, cache in enumerate(g.caches):
            if cache in dist:
                costs[i, j] = dist[cache]
    caps = tuple(g.capacities) if g.capacities else (1,) * len(g.caches)
    return Topology(np.isfinite(costs), caps, g.library_size), costs


def routing_utility_from_costs(costs: np.ndarray, transform: Callable[[np.ndarray], np.ndarray] | None = None):
    """Turn a path-cost table into ``w_rout``; unreachable pairs get 0.

    The default transform is ``max_cost - cost`` over the finite entries.
    """
    costs = np.asarray(costs, dtype=float)
    finite = np.isfinite(costs)
    out = np.zeros_like(costs)
    if not finite.any():
        return out
    if transform is None:
        top = costs[finite].max()
        out[finite] = top - costs[finite]
    else:
        out[finite] = transform(costs[finite])
    return out
