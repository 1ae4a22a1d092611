"""Closed-form regret bounds used as overlays on measured regret."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BoundInputs:
    J: int = 1
    C: int = 1
    deg: int = 1
    w1: float = 1.0
    T: float = 0
    N: int | None = None

    @property
    def gamma(self) -> float:
        if not self.N:
            raise ValueError("gamma = C/N needs the library size N")
        return self.C / self.N


def upper_bound_bsca(inp: BoundInputs) -> float:
    """Fixed-step regret bound ``w1 * sqrt(2 * deg * J * C * T)``."""
    return inp.w1 * math.sqrt(2.0 * inp.deg * inp.J * inp.C * inp.T)


def upper_bound_diminishing(T: float, delta_y: float, K: float) -> float:
    """Regret bound for the ``1/sqrt(t)`` schedule."""
    root = math.sqrt(T)
    return delta_y ** 2 * root / 2.0 + (root - 0.5) * K ** 2


def lower_bound_uniform(inp: BoundInputs) -> float:
    """Regret lower bound for equal weights, ``w sqrt(gamma/pi) sqrt(C T)``."""
    if inp.N is None or inp.C >= inp.N / 2:
        raise ValueError("bound inapplicable: requires C < N/2")
    return inp.w1 * math.sqrt(inp.gamma / math.pi) * math.sqrt(inp.C * inp.T)


def best_pairing(weights: Sequence[float], C: int) -> tuple[float, list[tuple[int, int]]]:
    """Maximise ``sum_k sqrt(w_a + w_b)`` over ``C`` disjoint pairs.

    Take the ``2C`` largest weights and pair them outside-in (largest with
    smallest of that group).  Since sqrt is increasing the largest weights are
    used, and since it is concave the most even pair sums win.
    """
    w = np.asarray(weights, dtype=float)
    order = np.argsort(-w, kind="stable")[: 2 * C]
    pairs = [(int(order[k]), int(order[2 * C - 1 - k])) for k in range(C)]
    value = float(sum(math.sqrt(w[a] + w[b]) for a, b in pairs))
    return value, pairs


def lower_bound_weighted(weights: Sequence[float], C: int, T: float) -> float:
    """Regret lower bound for per-file weights (requires ``C < N/2``, ``w > 0``)."""
    w = np.asarray(weights, dtype=float)
    if C >= w.size / 2:
        raise ValueError("bound inapplicable: requires C < N/2")
    if np.any(w <= 0):
        raise ValueError("bound inapplicable: weights must be positive")
    pair_sum, _ = best_pairing(w, C)
    return pair_sum / math.sqrt(2.0 * math.pi * np.sum(1.0 / w)) * math.sqrt(T)
