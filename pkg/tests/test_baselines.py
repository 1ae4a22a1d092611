import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsca.baselines import (LFUCache, LRUCache, MultiLRU, RequestAggregate, hindsight_network,
                            hindsight_single_cache, lfu_step, lru_step, mlru_step, qlru_lazy_step)
from bsca.domain import Topology, UtilityModel
from oracles import lfu_replay, lru_replay, static_utility


def test_lru_reference_sequence():
    cache = LRUCache(2)
    hits = []
    for f in (0, 1, 2, 0):
        cache, h = lru_step(cache, f)
        hits.append(h)
    assert hits == [0, 0, 0, 0] and cache.contents == {2, 0}


def test_lru_hit_refreshes_recency():
    cache = LRUCache(2)
    for f in (0, 1, 0, 2):
        cache.step(f)
    assert cache.contents == {0, 2}


def test_lfu_reference_sequence():
    cache = LFUCache(2)
    hits = []
    for f in (0, 0, 1, 2):
        cache, h = lfu_step(cache, f)
        hits.append(h)
    assert hits == [0, 1, 0, 0] and cache.contents == {0, 2}


def test_lfu_tie_evicts_lower_id_and_single_file_stays():
    cache = LFUCache(2)
    for f in (3, 1, 2):
        cache.step(f)
    assert cache.contents == {3, 2}
    cache = LFUCache(1)
    assert [cache.step(5) for _ in range(4)] == [0, 1, 1, 1]


@settings(max_examples=200)
@given(st.lists(st.integers(0, 7), max_size=60), st.integers(1, 4))
def test_lru_lfu_match_replay(reqs, cap):
    lru, lfu = LRUCache(cap), LFUCache(cap)
    hits_lru = [lru.step(f) for f in reqs]
    hits_lfu = [lfu.step(f) for f in reqs]
    assert (hits_lru, lru.contents) == lru_replay(reqs, cap)
    assert (hits_lfu, lfu.contents) == lfu_replay(reqs, cap)


def test_warm_cache_always_hits():
    cache = LRUCache(5)
    for f in range(5):
        cache.step(f)
    assert all(cache.step(f) for f in [3, 1, 4, 0, 2] * 3)


def _two_cache():
    top = Topology(np.array([[1, 1], [1, 0], [0, 0]], dtype=bool), (1, 1), 3)
    w = UtilityModel.from_cache_vector([2, 100], 3, 3)
    return top, w


def test_mlru_serves_from_best_holder():
    top, w = _two_cache()
    pol = MultiLRU(top, 0)
    pol.caches[0].insert(1)
    pol.caches[1].insert(1)
    pol, u = mlru_step(pol, 1, 0, w.at(1))
    assert u == 100 and pol.last_hit == 1


def test_mlru_single_reachable_inserts_and_deg0_is_noop():
    top, w = _two_cache()
    pol = MultiLRU(top, 0)
    assert pol.step(2, 1, w.at(1)) == 0
    assert 2 in pol.caches[0]
    before = [c.contents for c in pol.caches]
    assert pol.step(0, 2, w.at(1)) == 0
    assert [c.contents for c in pol.caches] == before


def test_lazy_rule_skips_insertion_when_held():
    top, w = _two_cache()
    pol = MultiLRU(top, 0, lazy=True)
    pol.caches[0].insert(1)
    for _ in range(20):
        pol, u = qlru_lazy_step(pol, 1, 0, w.at(1))
        assert u == 2
    assert 1 not in pol.caches[1]
    pol.step(0, 1, w.at(1))
    assert 0 in pol.caches[0]


def test_qlru_with_q_zero_never_changes():
    top, w = _two_cache()
    pol = MultiLRU(top, 0, lazy=True, q=0.0)
    for f in (0, 1, 2, 0):
        pol.step(f, 0, w.at(1))
    assert all(not c.contents for c in pol.caches)


def test_mlru_inserts_even_when_another_cache_holds_file():
    top, w = _two_cache()
    pol = MultiLRU(top, 3)
    pol.caches[0].insert(1)
    for _ in range(30):
        pol.step(1, 0, w.at(1))
    assert 1 in pol.caches[1]


def test_hindsight_single_cache_examples():
    files = [0] * 5 + [1] * 3 + [2] * 2
    sol = hindsight_single_cache(files, [1, 2, 1], 1)
    assert sol.y[:, 0].tolist() == [0, 1, 0] and sol.total_utility == 6
    sol = hindsight_single_cache(files, [1, 1, 1], 2)
    assert sol.y[:, 0].tolist() == [1, 1, 0]
    sol = hindsight_single_cache(files, [1, 2, 3], 3)
    assert sol.total_utility == 5 + 6 + 6


def test_hindsight_network_single_atom():
    top = Topology(np.array([[1, 1, 0], [0, 1, 1]], dtype=bool), (1, 1, 1), 4)
    w = UtilityModel.from_cache_vector([1, 2, 100], 4, 2)
    sol = hindsight_network([2] * 50, [1] * 50, top, w)
    assert sol.y[2, 2] == pytest.approx(1.0, abs=1e-6)
    assert sol.total_utility == pytest.approx(5000)


def test_hindsight_history_is_monotone_and_lp_bounds_ascent():
    rng = np.random.default_rng(1)
    top = Topology(rng.random((3, 2)) < 0.8, (2, 1), 6)
    w = UtilityModel(rng.uniform(0, 4, (6, 3, 2)))
    files, locs = rng.integers(6, size=300), rng.integers(3, size=300)
    asc = hindsight_network(files, locs, top, w, iters=200, passes=4)
    lp = hindsight_network(files, locs, top, w, method="lp")
    assert all(b >= a for a, b in zip(asc.history, asc.history[1:]))
    assert asc.total_utility <= lp.total_utility + 1e-6
    assert asc.total_utility >= 0.99 * lp.total_utility
    ys = asc.y
    assert ys.min() >= 0 and ys.max() <= 1 and np.all(ys.sum(axis=0) <= np.array(top.capacities) + 1e-9)
    reach = top.reachable
    assert asc.total_utility == pytest.approx(static_utility(ys, files, locs, reach, w.weights))
    with pytest.raises(ValueError):
        hindsight_network(files, locs, top, w, method="simplex")


def test_request_aggregate_supergradient_inequality():
    rng = np.random.default_rng(2)
    top = Topology(np.ones((2, 2), dtype=bool), (2, 2), 5)
    w = UtilityModel(rng.uniform(0, 3, (5, 2, 2)))
    agg = RequestAggregate(rng.integers(5, size=100), rng.integers(2, size=100), top, w)
    for _ in range(50):
        y = rng.uniform(0, 0.4, (5, 2))
        y2 = rng.uniform(0, 0.4, (5, 2))
        f1, g = agg.objective(y)
        f2, _ = agg.objective(y2)
        assert f2 <= f1 + np.sum(g * (y2 - y)) + 1e-9
