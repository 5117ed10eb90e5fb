"""Side branches of the aggregation tree and power-law fits of their sizes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .errors import InsufficientTail

S_MIN = 5
MIN_TAIL = 50


@dataclass(frozen=True)
class BranchRecord:
    root: int
    size: int
    birth: int


@dataclass(frozen=True)
class PowerLawFit:
    alpha_hat: float
    s_min: int
    n_tail: int
    ks_distance: float

    def to_dict(self):
        return {"alpha_hat": self.alpha_hat, "s_min": self.s_min, "n_tail": self.n_tail,
                "ks_distance": self.ks_distance}


def subtree_sizes(parent):
    """Subtree cardinality of every node; children always have larger ids."""
    parent = np.asarray(parent)
    size = np.ones(len(parent), dtype=np.int64)
    for i in range(len(parent) - 1, -1, -1):
        p = parent[i]
        if p >= 0:
            size[p] += size[i]
    return size


def extract_branches(parent, extremal, n_initial=1):
    """Backbone ids and the branches hanging off it.

    ``parent`` is the parent array (-1 for initial discs) and ``extremal`` the
    final extremal disc ids. The backbone is every ancestor path from an
    extremal disc to the initial cluster; initial discs always belong to it.
    """
    parent = np.asarray(parent)
    n = len(parent)
    on = np.zeros(n, dtype=bool)
    on[:n_initial] = True
    for v in extremal:
        v = int(v)
        while v >= 0 and not on[v]:
            on[v] = True
            v = int(parent[v])
    size = subtree_sizes(parent)
    roots = np.flatnonzero(~on & (parent >= 0))
    roots = roots[on[parent[roots]]]
    branches = [BranchRecord(int(r), int(size[r]), int(r) - n_initial + 1) for r in roots]
    return {"backbone": set(np.flatnonzero(on).tolist()), "branches": branches}


def extract_run_branches(record):
    return extract_branches(record.parent, record.final_ring, record.n_initial)


def fit_power_law(sizes, s_min=S_MIN) -> PowerLawFit:
    """Discrete power-law tail exponent by the approximate maximum-likelihood formula.

    ``ks_distance`` compares the empirical tail CCDF with the exact discrete
    CCDF ``zeta(alpha, s) / zeta(alpha, s_min)``.
    """
    s = np.asarray(sizes, dtype=float)
    tail = np.sort(s[s >= s_min])
    n = tail.size
    if n < MIN_TAIL:
        raise InsufficientTail(f"{n} sizes >= s_min={s_min}, need {MIN_TAIL}")
    denom = float(np.sum(np.log(tail / (s_min - 0.5))))
    if denom <= 0 or np.all(tail == tail[0]):
        raise InsufficientTail("degenerate tail: all sizes equal")
    alpha = 1.0 + n / denom
    values, counts = np.unique(tail, return_counts=True)
    # empirical P(S >= v) at each distinct value
    emp = 1.0 - np.concatenate([[0], np.cumsum(counts)[:-1]]) / n
    model = zeta(alpha, values) / zeta(alpha, s_min)
    ks = float(np.max(np.abs(emp - model)))
    return PowerLawFit(float(alpha), int(s_min), int(n), ks)


def ccdf(sizes):
    """``(values, P(S >= value))`` for plotting."""
    s = np.sort(np.asarray(sizes))
    if s.size == 0:
        return s, np.zeros(0)
    values, counts = np.unique(s, return_counts=True)
    tail = 1.0 - np.concatenate([[0], np.cumsum(counts)[:-1]]) / s.size
    return values, tail


def binned_ccdf_slope(sizes, s_min=S_MIN):
    """Least-squares slope of the log CCDF (cross-check for the MLE only)."""
    values, tail = ccdf([x for x in sizes if x >= s_min])
    if len(values) < 3:
        return float("nan")
    return float(np.polyfit(np.log(values), np.log(tail), 1)[0])
