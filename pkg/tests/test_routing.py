import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsca.domain import Request, Topology, UtilityModel
from bsca.routing import batch_route, evaluate_utility, greedy_route, route
from oracles import route_by_vertices, routing_kkt_residual


def _three_cache_setup():
    top = Topology.full(1, (1, 1, 1), 2)
    w = UtilityModel.from_cache_vector([1, 2, 100], 2, 1)
    y = np.zeros((2, 3))
    y[0] = [1.0, 0.5, 0.3]
    return top, w, y


def test_reference_example():
    top, w, y = _three_cache_setup()
    out = route(Request(1, 0, 0), y, top, w)
    assert np.allclose(out.z, [0.2, 0.5, 0.3])
    assert out.z0 == pytest.approx(0.0, abs=1e-12)
    assert out.utility == pytest.approx(31.2)
    assert out.alpha == 1.0
    assert np.allclose(out.beta, [0, 1, 99])
    assert evaluate_utility(Request(1, 0, 0), y, top, w) == pytest.approx(31.2)
    best, _ = route_by_vertices([1, 2, 100], [1.0, 0.5, 0.3])
    assert best == pytest.approx(31.2)


def test_nothing_cached():
    top, w, y = _three_cache_setup()
    out = route(Request(1, 1, 0), y, top, w)
    assert out.utility == 0 and out.z0 == 1 and not out.z.any()


def test_single_reachable_cache_slack_demand():
    top = Topology.single_cache(3, 1)
    w = UtilityModel.uniform(3, 1, 1, 5.0)
    y = np.array([[0.2], [0.0], [0.0]])
    out = route(Request(1, 0, 0), y, top, w)
    assert out.z[0] == pytest.approx(0.2) and out.z0 == pytest.approx(0.8)
    assert out.utility == pytest.approx(1.0) and out.alpha == 0 and out.beta.tolist() == [5.0]


def test_full_copy_at_best_cache_and_zero_weights():
    top, w, y = _three_cache_setup()
    y[0] = [0.0, 0.0, 1.0]
    assert evaluate_utility(Request(1, 0, 0), y, top, w) == 100
    out = route(Request(1, 0, 0), y, top, w)
    assert out.beta.tolist() == [0, 0, 0]
    zero = UtilityModel(np.zeros((2, 1, 3)))
    assert evaluate_utility(Request(1, 0, 0), y, top, zero) == 0


def test_unreachable_caches_are_ignored():
    top = Topology(np.array([[True, False, True]]), (1, 1, 1), 2)
    w = UtilityModel.from_cache_vector([1, 50, 2], 2, 1)
    y = np.ones((2, 3)) * 0.5
    out = route(Request(1, 0, 0), y, top, w)
    assert out.caches.tolist() == [0, 2]
    assert out.utility == pytest.approx(1.5)


def test_time_varying_weights_use_slot():
    snaps = np.stack([np.full((1, 1, 1), 1.0), np.full((1, 1, 1), 4.0)])
    w = UtilityModel(None, snapshots=snaps)
    top = Topology.single_cache(2, 1)
    y = np.array([[1.0], [0.0]])
    assert route(Request(2, 0, 0), y, top, w).utility == 4.0


@settings(max_examples=300)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 1)), min_size=1, max_size=4))
def test_greedy_matches_vertex_oracle_and_kkt(pairs):
    w = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    z, z0, util, alpha, beta = greedy_route(w, y)
    best, _ = route_by_vertices(w, y)
    assert util == pytest.approx(best, abs=1e-9)
    assert z0 == pytest.approx(1 - sum(z), abs=1e-12)
    assert routing_kkt_residual(w, y, z, alpha, beta) <= 1e-9


@settings(max_examples=100)
@given(st.integers(1, 20), st.integers(1, 4), st.integers(0, 2**31))
def test_batch_route_matches_scalar(rows, caches, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 10, (rows, caches)).round(1)
    y = rng.choice([0.0, 0.25, 0.5, 1.0], (rows, caches))
    mask = rng.random((rows, caches)) < 0.7
    util, beta = batch_route(w, y, mask)
    for r in range(rows):
        idx = np.flatnonzero(mask[r])
        _, _, u, _, b = greedy_route(w[r, idx], y[r, idx])
        assert util[r] == pytest.approx(u, abs=1e-12)
        assert np.allclose(beta[r, idx], b)
        assert np.all(beta[r, ~mask[r]] == 0)
