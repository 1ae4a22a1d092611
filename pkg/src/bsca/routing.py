"""Optimal per-request routing and the duals of the routing LP.

For a request (file n, location i) the routing LP is

    max  sum_j w_j z_j   s.t.  sum_j z_j <= 1,  0 <= z_j <= y_j   (j reachable)

and the remainder ``1 - sum_j z_j`` goes to the MBS.  It is a fractional
knapsack, so filling caches in decreasing weight order is optimal.  With
``alpha`` the multiplier of the demand constraint and ``beta_j`` those of the
per-cache availability constraints, an optimal dual is ``alpha = w`` of the
cache where demand is exhausted (0 if it never is) and
``beta_j = max(w_j - alpha, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Request, Topology, UtilityModel


@dataclass(frozen=True)
class RoutingOutcome:
    """Routing of one request.  Arrays are aligned with ``caches``."""

    caches: np.ndarray
    z: np.ndarray
    z0: float
    utility: float
    alpha: float
    beta: np.ndarray
    weights: np.ndarray
    available: np.ndarray

    @property
    def served_fraction(self) -> float:
        return float(self.z.sum())

    def z_dense(self, num_caches: int) -> np.ndarray:
        out = np.zeros(num_caches)
        out[self.caches] = self.z
        return out

    def beta_dense(self, num_caches: int) -> np.ndarray:
        out = np.zeros(num_caches)
        out[self.caches] = self.beta
        return out


def greedy_route(weights, available):
    """Solve the routing LP over the given caches.

    Returns ``(z, z0, utility, alpha, beta)``.  Equal weights are visited in
    index order.  When the demand is met exactly at a cache whose content is
    also exhausted, that cache's weight is taken as ``alpha`` (so its beta is 0).
    """
    w = [float(v) for v in weights]
    avail = [float(v) for v in available]
    k = len(w)
    z = [0.0] * k
    remaining = 1.0
    alpha = 0.0
    for a in sorted(range(k), key=lambda a: (-w[a], a)):
        ya = avail[a]
        if ya >= remaining:
            z[a] = remaining
            alpha = w[a]
            remaining = 0.0
            break
        if ya > 0.0:
            z[a] = ya
            remaining -= ya
    utility = sum(wa * za for wa, za in zip(w, z))
    beta = [wa - alpha if wa > alpha else 0.0 for wa in w]
    return z, remaining, utility, alpha, beta


def _weights_for(w, req: Request) -> np.ndarray:
    return w.at(req.slot) if isinstance(w, UtilityModel) else np.asarray(w)


def route(req: Request, y: np.ndarray, top: Topology, w) -> RoutingOutcome:
    """Route ``req`` optimally given caching matrix ``y`` (N x J).

    ``w`` is a :class:`UtilityModel` or a weight snapshot of shape (N, I, J).
    """
    weights = _weights_for(w, req)
    caches = top.reachable_caches(req.location)
    wv = weights[req.file, req.location, caches]
    yv = y[req.file, caches]
    z, z0, utility, alpha, beta = greedy_route(wv, yv)
    return RoutingOutcome(
        caches=caches,
        z=np.asarray(z),
        z0=z0,
        utility=utility,
        alpha=alpha,
        beta=np.asarray(beta),
        weights=wv,
        available=yv,
    )


def evaluate_utility(req: Request, y: np.ndarray, top: Topology, w) -> float:
    """Utility of serving ``req`` under ``y``; no duals are formed."""
    weights = _weights_for(w, req)
    caches = top.reachable_caches(req.location)
    wv = weights[req.file, req.location, caches]
    yv = y[req.file, caches]
    remaining, total = 1.0, 0.0
    for a in np.argsort(-wv, kind="stable"):
        take = min(yv[a], remaining)
        if take > 0:
            total += wv[a] * take
            remaining -= take
        if remaining <= 0:
            break
    return float(total)


def batch_route(weights: np.ndarray, available: np.ndarray, mask: np.ndarray):
    """Vectorised routing for many (file, location) rows at once.

    ``weights``, ``available`` and ``mask`` have shape (P, J); ``mask`` flags
    reachable caches.  Returns ``(utility, beta)`` with shapes (P,) and (P, J).
    """
    weights = np.asarray(weights, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    avail = np.where(mask, available, 0.0)
    keyed = np.where(mask, weights, -np.inf)
    order = np.argsort(-keyed, axis=1, kind="stable")
    ws = np.take_along_axis(np.where(mask, weights, 0.0), order, axis=1)
    ys = np.take_along_axis(avail, order, axis=1)
    ms = np.take_along_axis(mask, order, axis=1)
    before = np.cumsum(ys, axis=1) - ys
    remaining = 1.0 - before
    z = np.clip(np.minimum(ys, remaining), 0.0, None)
    crosses = ms & (remaining > 0) & (ys >= remaining)
    has = crosses.any(axis=1)
    kstar = np.argmax(crosses, axis=1)
    alpha = np.where(has, ws[np.arange(len(ws)), kstar], 0.0)
    utility = (ws * z).sum(axis=1)
    beta = np.where(mask, np.maximum(weights - alpha[:, None], 0.0), 0.0)
    return utility, beta
