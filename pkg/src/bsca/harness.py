"""Experiment runner: workload -> policies -> metrics -> CSV.

Configuration files are INI-style (``configparser``)::

    [experiment]
    horizon = 100000
    seed = 7
    regret_mode = up-to-t        ; at-T | up-to-t
    hindsight = ascent           ; ascent | lp
    record_every = 1

    [topology]
    library_size = 100
    capacities = 10, 10, 10
    reachable =                  ; one row per location, or num_locations = I
        1 1 0
        0 1 1

    [utility]
    cache_vector = 1, 2, 100     ; or file_vector / uniform / random_uniform
    resample_every = 0           ; >0 with random_uniform: time-varying

    [workload]
    kind = zipf                  ; zipf | shot-noise | lb-adversary | trace
    alpha = 0.8

    [policies]
    names = bsca, mlru, qlru-lazy, hindsight
    bsca_schedule = fixed

    [reconfig]
    cost = 0.5                   ; optional, enables the reconfiguration-cost variant
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import (LFUCache, LRUCache, MultiLRU, RequestAggregate, hindsight_network,
                        hindsight_single_cache)
from .bounds import BoundInputs, upper_bound_bsca, upper_bound_diminishing
from .domain import Topology, UtilityModel, validate_topology
from .policy import BSCA, SCHEDULES, StepSchedule, constants
from .workloads import RequestTrace, TraceError, WorkloadSpec, generate, parse_trace

SINGLE_CACHE_POLICIES = ("lru", "lfu")
KNOWN_POLICIES = ("bsca", "lru", "lfu", "mlru", "qlru-lazy", "hindsight") + tuple(f"bsca-{m}" for m in SCHEDULES)
REGRET_MODES = ("at-T", "up-to-t")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    topology: Topology
    utility: UtilityModel
    workload: WorkloadSpec
    policies: list[str]
    horizon: int
    seed: int = 0
    regret_mode: str = "at-T"
    hindsight_method: str = "ascent"
    hindsight_iters: int = 400
    hindsight_passes: int = 5
    bsca_schedule: str = "fixed"
    bsca_init: str = "uniform"
    qlru_q: float = 1.0
    reconfig_cost: float | None = None
    record_every: int = 1
    output: str | None = None
    trace: RequestTrace | None = field(default=None, repr=False)

    def validate(self) -> None:
        problems = validate_topology(self.topology)
        if problems:
            raise ConfigError("; ".join(problems))
        n, i, j = self.utility.shape
        if (n, i, j) != (self.topology.library_size, self.topology.num_locations, self.topology.num_caches):
            raise ConfigError(f"utility shape {(n, i, j)} does not match the topology")
        for p in self.policies:
            if p not in KNOWN_POLICIES:
                raise ConfigError(f"unknown policy {p!r}")
            if p in SINGLE_CACHE_POLICIES and self.topology.num_caches > 1:
                raise ConfigError(f"policy {p!r} only applies to a single cache (J=1)")
        if self.regret_mode not in REGRET_MODES:
            raise ConfigError(f"regret_mode must be one of {REGRET_MODES}")
        if self.hindsight_method not in ("ascent", "lp"):
            raise ConfigError("hindsight must be 'ascent' or 'lp'")
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _matrix(text: str) -> np.ndarray:
    rows = [r for r in text.replace(";", "\n").splitlines() if r.strip()]
    parsed = [[float(v) for v in r.replace(",", " ").split()] for r in rows]
    if len({len(r) for r in parsed}) > 1:
        raise ConfigError("reachable rows have different numbers of columns")
    return np.array(parsed)


def parse_config(text: str, base_dir: Path | None = None, seed: int | None = None) -> ExperimentConfig:
    """Parse an INI config; ``seed`` overrides ``experiment.seed``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    _check_keys(cp)
    try:
        return _build_config(cp, base_dir or Path("."), seed)
    except (ConfigError, TraceError):
        raise
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


ALLOWED_KEYS = {
    "experiment": {"horizon", "seed", "regret_mode", "hindsight", "hindsight_iters", "hindsight_passes",
                   "record_every", "output"},
    "topology": {"library_size", "capacities", "reachable", "num_locations"},
    "utility": {"cache_vector", "file_vector", "uniform", "random_uniform", "resample_every", "snapshots"},
    "workload": {"kind", "alpha", "shot_rate", "shot_lifespan", "shot_intensity", "floor", "path"},
    "policies": {"names", "bsca_schedule", "bsca_init", "qlru_q"},
    "reconfig": {"cost"},
}


def _check_keys(cp: configparser.ConfigParser) -> None:
    if not cp.has_section("topology"):
        raise ConfigError("missing [topology] section")
    for section in cp.sections():
        if section not in ALLOWED_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(cp[section]) - ALLOWED_KEYS[section]
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent, seed)


def _build_config(cp: configparser.ConfigParser, base_dir: Path, seed: int | None) -> ExperimentConfig:
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    if seed is None:
        seed = int(exp.get("seed", 0))
    if seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    seeds = np.random.SeedSequence(seed).spawn(3)

    topo = cp["topology"]
    wl = cp["workload"] if cp.has_section("workload") else {}
    kind = wl.get("kind", "zipf")
    trace = None
    if kind == "trace":
        path = Path(wl["path"])
        if not path.is_absolute():
            path = base_dir / path
        trace = parse_trace(path)
    if "library_size" in topo:
        n = int(topo["library_size"])
    elif trace is not None:
        n = trace.num_files
    else:
        raise ConfigError("topology.library_size is required")
    caps = [int(v) for v in _floats(topo["capacities"])]
    if "reachable" in topo:
        reach = _matrix(topo["reachable"]) != 0
        if "num_locations" in topo and reach.shape[0] != int(topo["num_locations"]):
            raise ConfigError(f"reachable has {reach.shape[0]} rows but num_locations = {topo['num_locations']}")
    else:
        reach = np.ones((int(topo.get("num_locations", 1)), len(caps)), dtype=bool)
    if reach.shape[1] != len(caps):
        raise ConfigError(f"reachable has {reach.shape[1]} columns but {len(caps)} capacities")
    top = Topology(reach, caps, n)

    utility = _build_utility(cp["utility"] if cp.has_section("utility") else {}, top, seeds[0])

    horizon = int(exp.get("horizon", len(trace) if trace is not None else 0))
    weights = None
    if kind == "lb-adversary":
        weights = list(utility.weights[:, 0, :].max(axis=1))
    spec = WorkloadSpec(
        kind=kind,
        num_files=n,
        horizon=horizon,
        seed=int(seeds[1].generate_state(1)[0]),
        num_locations=top.num_locations,
        alpha=float(wl.get("alpha", 0.8)),
        shot_rate=float(wl.get("shot_rate", 0.01)),
        shot_lifespan=int(wl.get("shot_lifespan", 5000)),
        shot_intensity=float(wl.get("shot_intensity", 1.0)),
        floor=float(wl.get("floor", 1e-6)),
        weights=weights,
        path=str(wl.get("path")) if kind == "trace" else None,
    )
    pol = cp["policies"] if cp.has_section("policies") else {}
    names = [p.strip() for p in pol.get("names", "bsca").split(",") if p.strip()]
    reconfig = None
    if cp.has_section("reconfig"):
        reconfig = float(cp["reconfig"].get("cost", 0.0))
    if trace is not None:
        if trace.num_locations > top.num_locations:
            raise ConfigError("trace uses more locations than the topology has")
        if horizon:
            trace = trace.head(horizon)
    cfg = ExperimentConfig(
        topology=top,
        utility=utility,
        workload=spec,
        policies=names,
        horizon=horizon if trace is None else len(trace),
        seed=seed,
        regret_mode=exp.get("regret_mode", "at-T"),
        hindsight_method=exp.get("hindsight", "ascent"),
        hindsight_iters=int(exp.get("hindsight_iters", 400)),
        hindsight_passes=int(exp.get("hindsight_passes", 5)),
        bsca_schedule=pol.get("bsca_schedule", "fixed"),
        bsca_init=pol.get("bsca_init", "uniform"),
        qlru_q=float(pol.get("qlru_q", 1.0)),
        reconfig_cost=reconfig,
        record_every=int(exp.get("record_every", 1)),
        output=exp.get("output"),
        trace=trace,
    )
    cfg.validate()
    return cfg


def _build_utility(sec, top: Topology, seed) -> UtilityModel:
    n, i, j = top.library_size, top.num_locations, top.num_caches
    if "cache_vector" in sec:
        vec = _floats(sec["cache_vector"])
        if len(vec) != j:
            raise ConfigError(f"cache_vector needs {j} entries")
        return UtilityModel.from_cache_vector(vec, n, i)
    if "file_vector" in sec:
        vec = _floats(sec["file_vector"])
        if len(vec) != n:
            raise ConfigError(f"file_vector needs {n} entries")
        return UtilityModel.from_file_vector(vec, i, j)
    if "random_uniform" in sec:
        lo, hi = _floats(sec["random_uniform"])
        rng = np.random.default_rng(seed)
        every = int(sec.get("resample_every", 0))
        if every > 0:
            count = int(sec.get("snapshots", 8))
            snaps = rng.uniform(lo, hi, size=(count, 1, i, j))
            return UtilityModel(None, snapshots=np.broadcast_to(snaps, (count, n, i, j)).copy(), period=every)
        w = rng.uniform(lo, hi, size=(1, i, j))
        return UtilityModel(np.broadcast_to(w, (n, i, j)).copy())
    return UtilityModel.uniform(n, i, j, float(sec.get("uniform", 1.0)))


def checkpoints(horizon: int) -> np.ndarray:
    """Powers of two up to ``horizon``, plus ``horizon`` itself."""
    if horizon <= 0:
        return np.zeros(0, dtype=np.int64)
    pts = [1 << k for k in range(int(math.log2(horizon)) + 1)]
    if pts[-1] != horizon:
        pts.append(horizon)
    return np.array(pts, dtype=np.int64)


def regret_series(utilities, hindsight, points=None) -> np.ndarray:
    """Rows ``(t, R_t, R_t / t)`` with ``R_t = hindsight_t - sum_{s<=t} utility_s``.

    ``hindsight`` is aligned with ``points`` (1-based slots); without
    ``points`` it must be given for every slot.
    """
    u = np.asarray(utilities, dtype=float)
    h = np.asarray(hindsight, dtype=float)
    if points is None:
        if h.size != u.size:
            raise ValueError(f"length mismatch: {u.size} utilities vs {h.size} hindsight values")
        points = np.arange(1, u.size + 1)
    points = np.asarray(points, dtype=np.int64)
    if h.size != points.size:
        raise ValueError(f"length mismatch: {points.size} checkpoints vs {h.size} hindsight values")
    if points.size and (points.min() < 1 or points.max() > u.size):
        raise ValueError("checkpoint outside the utility series")
    cum = np.cumsum(u)
    regret = h - cum[points - 1] if points.size else np.zeros(0)
    return np.column_stack([points, regret, regret / np.maximum(points, 1)]) if points.size \
        else np.zeros((0, 3))


@dataclass
class MetricsSeries:
    policies: list[str]
    utilities: dict[str, np.ndarray]
    hits: dict[str, np.ndarray]
    points: np.ndarray
    hindsight: np.ndarray
    bounds: dict[str, np.ndarray]
    record_every: int = 1

    def regret(self, policy: str) -> np.ndarray:
        return regret_series(self.utilities[policy], self.hindsight, self.points)

    def final_avg_utility(self, policy: str) -> float:
        u = self.utilities[policy]
        return float(u.mean()) if u.size else 0.0

    def final_hit_ratio(self, policy: str) -> float:
        h = self.hits[policy]
        return float(h.mean()) if h.size else 0.0

    def hindsight_avg_utility(self) -> float:
        return float(self.hindsight[-1] / self.points[-1]) if self.points.size else 0.0

    def columns(self) -> list[str]:
        cols = ["t", "row"]
        for p in self.policies:
            cols += [f"{p}_utility", f"{p}_cum_utility", f"{p}_hit", f"{p}_hit_ratio", f"{p}_avg_utility"]
        cols.append("hindsight_total")
        for p in self.policies:
            cols += [f"{p}_regret", f"{p}_regret_per_t"]
        cols += list(self.bounds)
        return cols

    def write_csv(self, fh) -> None:
        fmt = "{:.12g}".format
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.columns())
        horizon = self.utilities[self.policies[0]].size if self.policies else 0
        cum = {p: np.cumsum(self.utilities[p]) for p in self.policies}
        cum_hits = {p: np.cumsum(self.hits[p]) for p in self.policies}
        regrets = {p: self.regret(p) for p in self.policies}
        n_tail = 1 + 2 * len(self.policies) + len(self.bounds)
        check_idx = {int(t): k for k, t in enumerate(self.points)}
        for t in range(1, horizon + 1):
            if t % self.record_every == 0 or t == horizon:
                row = [t, "slot"]
                for p in self.policies:
                    c = cum[p][t - 1]
                    row += [fmt(self.utilities[p][t - 1]), fmt(c), fmt(self.hits[p][t - 1]),
                            fmt(cum_hits[p][t - 1] / t), fmt(c / t)]
                writer.writerow(row + [""] * n_tail)
            if t in check_idx:
                k = check_idx[t]
                row = [t, "checkpoint"]
                for p in self.policies:
                    c = cum[p][t - 1]
                    row += ["", fmt(c), "", fmt(cum_hits[p][t - 1] / t), fmt(c / t)]
                row.append(fmt(self.hindsight[k]))
                for p in self.policies:
                    row += [fmt(regrets[p][k, 1]), fmt(regrets[p][k, 2])]
                row += [fmt(v[k]) for v in self.bounds.values()]
                writer.writerow(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _make_policies(cfg: ExperimentConfig):
    top, n_pol = cfg.topology, len(cfg.policies)
    seeds = np.random.SeedSequence([cfg.seed, 1]).spawn(max(n_pol, 1))
    made = {}
    for name, ss in zip(cfg.policies, seeds):
        if name.startswith("bsca"):
            mode = name.split("-", 1)[1] if "-" in name else cfg.bsca_schedule
            made[name] = BSCA(top, cfg.utility, StepSchedule(mode, max(cfg.horizon, 1)),
                              init=cfg.bsca_init, reconfig_costs=cfg.reconfig_cost)
        elif name == "lru":
            made[name] = LRUCache(top.capacities[0])
        elif name == "lfu":
            made[name] = LFUCache(top.capacities[0])
        elif name == "mlru":
            made[name] = MultiLRU(top, ss)
        elif name == "qlru-lazy":
            made[name] = MultiLRU(top, ss, lazy=True, q=cfg.qlru_q)
        elif name == "hindsight":
            made[name] = None
    return made


def _solve_hindsight(cfg: ExperimentConfig, trace: RequestTrace, upto: int):
    top, util = cfg.topology, cfg.utility
    files, locs = trace.files[:upto], trace.locations[:upto]
    if top.num_caches == 1 and top.num_locations == 1 and not util.time_varying:
        if top.reachable[0, 0]:
            return hindsight_single_cache(files, util.weights[:, 0, 0], top.capacities[0], top.library_size)
    return hindsight_network(files, locs, top, util, iters=cfg.hindsight_iters,
                             passes=cfg.hindsight_passes, method=cfg.hindsight_method)


def materialize(cfg: ExperimentConfig) -> RequestTrace:
    if cfg.trace is not None:
        return cfg.trace
    return generate(cfg.workload)


def run(cfg: ExperimentConfig, trace: RequestTrace | None = None) -> MetricsSeries:
    """Run every configured policy on one shared request sequence."""
    cfg.validate()
    trace = materialize(cfg) if trace is None else trace
    top, util = cfg.topology, cfg.utility
    horizon = len(trace)
    policies = _make_policies(cfg)
    names = [p for p in cfg.policies if p != "hindsight"]
    utilities = {p: np.zeros(horizon) for p in cfg.policies}
    hits = {p: np.zeros(horizon) for p in cfg.policies}

    for req in trace:
        t, f, loc = req
        w = util.at(t)
        k = t - 1
        for name in names:
            pol = policies[name]
            if isinstance(pol, BSCA):
                out = pol.step(req, w)
                utilities[name][k] = out.utility - pol.last_cost
                hits[name][k] = out.served_fraction
            elif isinstance(pol, (LRUCache, LFUCache)):
                reach = top.reachable[loc, 0]
                hit = pol.step(f) if reach else 0
                utilities[name][k] = hit * w[f, loc, 0]
                hits[name][k] = hit
            else:
                utilities[name][k] = pol.step(f, loc, w)
                hits[name][k] = pol.last_hit

    points = checkpoints(horizon)
    hindsight_vals = np.zeros(points.size)
    if horizon:
        final = _solve_hindsight(cfg, trace, horizon)
        agg = RequestAggregate(trace.files, trace.locations, top, util)
        replay = agg.per_request_utility(final.y)
        if "hindsight" in utilities:
            utilities["hindsight"][:] = replay
            _, served = _served_fraction(agg, final.y)
            hits["hindsight"][:] = served
        if cfg.regret_mode == "at-T":
            hindsight_vals = np.cumsum(replay)[points - 1]
        else:
            for k, t in enumerate(points[:-1]):
                hindsight_vals[k] = _solve_hindsight(cfg, trace, int(t)).total_utility
            hindsight_vals[-1] = final.total_utility

    deg, J = top.deg, top.num_caches
    C = max(top.capacities)
    delta, K, _ = constants(top, util)
    if cfg.reconfig_cost:
        K += cfg.reconfig_cost * math.sqrt(deg)
    bounds = {
        "bound_upper": np.array([upper_bound_bsca(BoundInputs(J=J, C=C, deg=deg, w1=util.w_max, T=int(t)))
                                 for t in points]),
        "bound_diminishing": np.array([upper_bound_diminishing(int(t), delta, K) for t in points]),
    }
    return MetricsSeries(list(cfg.policies), utilities, hits, points, hindsight_vals, bounds, cfg.record_every)


def _served_fraction(agg: RequestAggregate, y: np.ndarray):
    avail = np.where(agg.mask, y[agg.files], 0.0)
    per_row = np.minimum(avail.sum(axis=1), 1.0)
    return per_row, per_row[agg.inverse]
