"""Request generators and trace ingestion.

Every generator materialises the whole sequence as a :class:`RequestTrace`,
a pure function of its spec and seed.  Slots are 1-based; file and location
ids are 0-based.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import Request

DEFAULT_ZIPF_ALPHA = 0.8
DEFAULT_SHOT_RATE = 0.01
DEFAULT_SHOT_LIFESPAN = 5000
DEFAULT_SHOT_FLOOR = 1e-6


class TraceError(ValueError):
    """Malformed trace file."""


@dataclass
class RequestTrace:
    files: np.ndarray
    locations: np.ndarray
    num_files: int
    num_locations: int = 1

    def __post_init__(self):
        self.files = np.asarray(self.files, dtype=np.int64)
        self.locations = np.asarray(self.locations, dtype=np.int64)
        if self.files.shape != self.locations.shape:
            raise ValueError("files and locations must have the same length")

    def __len__(self) -> int:
        return self.files.size

    def __iter__(self):
        for t, (f, loc) in enumerate(zip(self.files.tolist(), self.locations.tolist()), start=1):
            yield Request(t, f, loc)

    def head(self, t: int) -> "RequestTrace":
        return RequestTrace(self.files[:t], self.locations[:t], self.num_files, self.num_locations)


@dataclass
class WorkloadSpec:
    kind: str
    num_files: int = 1
    horizon: int = 0
    seed: int | None = None
    num_locations: int = 1
    alpha: float = DEFAULT_ZIPF_ALPHA
    shot_rate: float = DEFAULT_SHOT_RATE
    shot_lifespan: int = DEFAULT_SHOT_LIFESPAN
    shot_intensity: float = 1.0
    floor: float = DEFAULT_SHOT_FLOOR
    weights: list[float] | None = None
    path: str | None = None
    extra: dict = field(default_factory=dict)


def zipf_pmf(num_files: int, alpha: float) -> np.ndarray:
    if alpha < 0:
        raise ValueError("Zipf exponent must be >= 0")
    ranks = np.arange(1, num_files + 1, dtype=float)
    p = ranks ** -alpha
    return p / p.sum()


def adversary_pmf(weights) -> np.ndarray:
    """Request pmf proportional to ``1 / w`` (the lower-bound adversary)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("adversary pmf is undefined when some weight is 0")
    inv = 1.0 / w
    return inv / inv.sum()


def _locations(rng: np.random.Generator, spec: WorkloadSpec) -> np.ndarray:
    if spec.num_locations <= 1:
        return np.zeros(spec.horizon, dtype=np.int64)
    return rng.integers(spec.num_locations, size=spec.horizon)


def _iid(pmf: np.ndarray, spec: WorkloadSpec) -> RequestTrace:
    rng = np.random.default_rng(spec.seed)
    files = rng.choice(pmf.size, size=spec.horizon, p=pmf)
    return RequestTrace(files, _locations(rng, spec), pmf.size, spec.num_locations)


def gen_zipf(spec: WorkloadSpec) -> RequestTrace:
    """I.i.d. Zipf requests; locations uniform."""
    return _iid(zipf_pmf(spec.num_files, spec.alpha), spec)


def gen_lb_adversary(weights, spec: WorkloadSpec) -> RequestTrace:
    return _iid(adversary_pmf(weights), spec)


def gen_shot_noise(spec: WorkloadSpec, initial_shots=None) -> RequestTrace:
    """Poisson shot-noise requests.

    Shots arrive as a Poisson process (``shot_rate`` per slot), each attached
    to a fresh file id (ids are handed out round-robin over the library) and
    active for ``shot_lifespan`` slots with constant intensity.  Every file
    also carries a floor intensity ``floor``.  Unless ``initial_shots`` is
    given as ``[(file, remaining_life), ...]``, the process starts in steady
    state with ``Poisson(rate * lifespan)`` shots of uniform residual life.
    """
    if spec.shot_rate <= 0 and not initial_shots:
        raise ValueError("shot arrival rate must be > 0")
    if spec.shot_lifespan < 1:
        raise ValueError("shot lifespan must be >= 1")
    rng = np.random.default_rng(spec.seed)
    n, life = spec.num_files, spec.shot_lifespan
    # (last active slot, file); shots share one lifespan, so appends stay sorted
    shots: deque[tuple[int, int]] = deque()
    next_id = 0
    if initial_shots is None:
        starting = [(int(rng.integers(1, life + 1)), k % n) for k in range(rng.poisson(spec.shot_rate * life))]
        next_id = len(starting)
    else:
        starting = [(int(remaining), int(f)) for f, remaining in initial_shots]
        next_id = max((f + 1 for _, f in starting), default=0)
    shots.extend(sorted(starting))
    arrivals = rng.poisson(spec.shot_rate, size=spec.horizon) if spec.shot_rate > 0 \
        else np.zeros(spec.horizon, dtype=np.int64)
    floor_mass = spec.floor * n
    files = np.empty(spec.horizon, dtype=np.int64)
    for t in range(1, spec.horizon + 1):
        while shots and shots[0][0] < t:
            shots.popleft()
        for _ in range(arrivals[t - 1]):
            shots.append((t + life - 1, next_id % n))
            next_id += 1
        shot_mass = spec.shot_intensity * len(shots)
        if rng.random() * (shot_mass + floor_mass) < floor_mass:
            files[t - 1] = rng.integers(n)
        else:
            files[t - 1] = shots[int(rng.integers(len(shots)))][1]
    return RequestTrace(files, _locations(rng, spec), n, spec.num_locations)


def _is_header(fields: list[str]) -> bool:
    try:
        int(fields[0])
    except ValueError:
        return True
    return False


def parse_trace(path, mapping: dict | None = None, num_locations: int | None = None) -> RequestTrace:
    """Read a ``slot,file_id[,location_id]`` CSV trace.

    Raw file ids are densified to ``0..N-1`` in order of first appearance
    (``mapping`` may pre-seed that dictionary and is updated in place).
    Location ids in the file are 1-based; a missing location column means
    location 1.  The slot column only orders records and is not interpreted.
    """
    mapping = {} if mapping is None else mapping
    files, locs = [], []
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    for lineno, fields in enumerate(reader, start=1):
        fields = [f.strip() for f in fields]
        if not fields or fields == [""]:
            continue
        if lineno == 1 and _is_header(fields):
            continue
        if len(fields) < 2 or len(fields) > 3 or any(f == "" for f in fields):
            raise TraceError(f"line {lineno}: expected slot,file_id[,location_id], got {','.join(fields)!r}")
        try:
            int(fields[0])
            loc = int(fields[2]) if len(fields) == 3 else 1
        except ValueError:
            raise TraceError(f"line {lineno}: slot and location must be integers") from None
        if loc < 1 or (num_locations is not None and loc > num_locations):
            raise TraceError(f"line {lineno}: location {loc} out of range")
        raw = fields[1]
        if raw not in mapping:
            mapping[raw] = len(mapping)
        files.append(mapping[raw])
        locs.append(loc - 1)
    n_locs = num_locations if num_locations is not None else (max(locs) + 1 if locs else 1)
    return RequestTrace(np.array(files, dtype=np.int64), np.array(locs, dtype=np.int64),
                        max(len(mapping), 1), n_locs)


def generate(spec: WorkloadSpec) -> RequestTrace:
    """Dispatch on ``spec.kind``."""
    if spec.kind == "zipf":
        return gen_zipf(spec)
    if spec.kind == "shot-noise":
        return gen_shot_noise(spec)
    if spec.kind == "lb-adversary":
        weights = spec.weights if spec.weights is not None else [1.0] * spec.num_files
        return gen_lb_adversary(weights, spec)
    if spec.kind == "trace":
        if spec.path is None:
            raise ValueError("trace workload needs a path")
        trace = parse_trace(spec.path, num_locations=spec.num_locations)
        if spec.horizon:
            trace = trace.head(spec.horizon)
        return trace
    raise ValueError(f"unknown workload kind {spec.kind!r}")
