import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsca.domain import Request, Topology, UtilityModel, is_feasible
from bsca.policy import (BSCA, StepSchedule, cache_diameter, constants, reconfig_cost, reconfig_supergradient,
                         single_cache_gradient, step_size, supergradient)
from bsca.routing import route


def _ref():
    top = Topology.full(1, (1, 1, 1), 2)
    w = UtilityModel.from_cache_vector([1, 2, 100], 2, 1)
    y = np.zeros((2, 3))
    y[0] = [1.0, 0.5, 0.3]
    return top, w, y


def test_supergradient_from_duals():
    top, w, y = _ref()
    req = Request(1, 0, 0)
    g = supergradient(route(req, y, top, w), req)
    assert g.dense(2, 3)[0].tolist() == [0, 1, 99]
    assert g.norm == pytest.approx(math.hypot(1, 99))


def test_supergradient_zero_when_served_by_best_cache():
    top, w, y = _ref()
    y[0] = [0.0, 0.0, 1.0]
    req = Request(1, 0, 0)
    assert not supergradient(route(req, y, top, w), req).values.any()


def test_single_cache_gradient_is_weight():
    top = Topology.single_cache(3, 1)
    w = UtilityModel.from_file_vector([3.0, 4.0, 5.0])
    y = np.array([[1.0], [0.0], [0.0]])
    req = Request(1, 0, 0)
    out = route(req, y, top, w)
    assert supergradient(out, req).values.tolist() == [0.0]
    assert single_cache_gradient(out, req).values.tolist() == [3.0]


def test_reconfig_supergradient_cases():
    top, w, y = _ref()
    req = Request(1, 0, 0)
    g = supergradient(route(req, y, top, w), req)
    q = reconfig_supergradient(g, y, y, 10.0)
    assert np.array_equal(q, g.dense(2, 3))
    prev = y.copy()
    prev[0, 2] = 0.1
    q = reconfig_supergradient(g, y, prev, 10.0)
    assert q[0, 2] == 89
    zero = np.zeros((2, 3))
    prev = y.copy()
    prev[1, 0] = -0.2
    q = reconfig_supergradient(zero, y, prev, 5.0)
    assert q[1, 0] == -5
    q = reconfig_supergradient(g, y, prev, 5.0, requested_only=True)
    assert q[1, 0] == 0
    assert reconfig_cost(y, prev, 5.0) == pytest.approx(1.0)
    assert reconfig_cost(y, None, 5.0) == 0
    with pytest.raises(ValueError):
        reconfig_supergradient(g, y, prev, -1.0)


def test_step_size_schedules():
    assert step_size("fixed", 1, 10**4, math.sqrt(20), 1) == pytest.approx(0.044721, abs=1e-6)
    assert step_size("diminishing", 4, None, 1, 1) == 0.5
    assert step_size("doubling", 5, None, 2.0, 1.0) == pytest.approx(2.0 / math.sqrt(8))
    assert step_size("doubling", 8, None, 2.0, 1.0) == pytest.approx(2.0 / math.sqrt(8))
    assert step_size("doubling", 1, None, 2.0, 1.0) == pytest.approx(2.0)
    with pytest.raises(ValueError, match="horizon"):
        step_size("fixed", 1, None, 1, 1)
    with pytest.raises(ValueError):
        step_size("adagrad", 1, 10, 1, 1)
    with pytest.raises(ValueError):
        StepSchedule("adagrad")


def test_constants():
    d, k, deg = constants(Topology.single_cache(100, 10), 1.0)
    assert (d, k, deg) == (pytest.approx(math.sqrt(20)), 1.0, 1)
    assert cache_diameter(80, 100) == pytest.approx(math.sqrt(40))
    reach = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=bool)
    d, k, deg = constants(Topology(reach, (10, 10, 10), 100), 100.0)
    assert d == pytest.approx(math.sqrt(60)) and k == pytest.approx(100 * math.sqrt(2)) and deg == 2


def test_fixed_schedule_requires_horizon():
    top = Topology.single_cache(3, 1)
    with pytest.raises(ValueError, match="horizon"):
        BSCA(top, UtilityModel.uniform(3, 1, 1))


def test_step_reference_example():
    # N=3, C=1: delta = sqrt(2), K = 1, T = 8 gives eta = 0.5
    top = Topology.single_cache(3, 1)
    pol = BSCA(top, UtilityModel.uniform(3, 1, 1), "fixed", horizon=8)
    assert pol.eta() == pytest.approx(0.5)
    pol.y = np.array([[0.5], [0.5], [0.0]])
    out = pol.step(Request(1, 2, 0))
    assert out.utility == 0
    assert np.allclose(pol.y[:, 0], 1 / 3)
    assert pol.t == 2


def test_zero_gradient_leaves_state():
    top, w, y = _ref()
    pol = BSCA(top, w, "diminishing")
    pol.y = y.copy()
    pol.y[0] = [0.0, 0.0, 1.0]
    pol.y[1] = [1.0, 1.0, 0.0]
    before = pol.y.copy()
    pol.step(Request(1, 0, 0))
    assert np.array_equal(pol.y, before)


def test_utility_is_accounted_before_update():
    top = Topology.single_cache(4, 1)
    pol = BSCA(top, UtilityModel.uniform(4, 1, 1), "diminishing")
    out = pol.step(Request(1, 0, 0))
    assert out.utility == pytest.approx(0.25)
    assert pol.y[0, 0] > 0.25


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["fixed", "diminishing", "doubling"]))
def test_iterates_stay_feasible(seed, mode):
    rng = np.random.default_rng(seed)
    reach = rng.random((3, 3)) < 0.7
    reach[:, 0] = True
    top = Topology(reach, (2, 3, 1), 8)
    w = UtilityModel(rng.uniform(0, 5, (8, 3, 3)))
    costs = rng.uniform(0, 1) if seed % 2 else None
    pol = BSCA(top, w, mode, horizon=60, reconfig_costs=costs)
    for t in range(1, 61):
        pol.step(Request(t, int(rng.integers(8)), int(rng.integers(3))))
        assert is_feasible(pol.y, top)


def test_determinism():
    top = Topology.full(2, (2, 2), 6)
    w = UtilityModel(np.random.default_rng(0).uniform(0, 3, (6, 2, 2)))
    reqs = [Request(t, t * 7 % 6, t % 2) for t in range(1, 100)]
    ys = []
    for _ in range(2):
        pol = BSCA(top, w, "fixed", horizon=99)
        for r in reqs:
            pol.step(r)
        ys.append(pol.y.copy())
    assert np.array_equal(ys[0], ys[1])
