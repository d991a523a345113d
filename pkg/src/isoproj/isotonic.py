"""Weighted isotonic projections of step functions.

The L2 projection is the pool-adjacent-violators algorithm (PAVA); the L1
projection pools blocks the same way but represents each block by its lower
weighted median. ``gcm_left_derivative`` gives the independent
greatest-convex-minorant characterisation of the L2 solution.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .data import Partition

L1 = "L1"
L2 = "L2"


@dataclass(frozen=True)
class StepFunction:
    """``f(x) = heights[j]`` for ``x`` in bin ``j`` of ``partition``."""

    partition: Partition
    heights: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float).ravel()
        if h.size != self.partition.J:
            raise ValueError(
                f"{h.size} heights for a partition with {self.partition.J} bins"
            )
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    def __call__(self, x) -> np.ndarray:
        return self.heights[self.partition.locate(x)]

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return self.partition == other.partition and np.array_equal(self.heights, other.heights)

    def __hash__(self):
        return hash((self.partition, self.heights.tobytes()))

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.heights) >= 0))


def _check(values, weights):
    v = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if v.size != w.size:
        raise ValueError(f"length mismatch: {v.size} values, {w.size} weights")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if v.size and not w.sum() > 0:
        raise ValueError("at least one weight must be positive")
    return v, w


def _fill_zero_weight(v, w, solve):
    """Run ``solve`` on the positive-weight entries and give each zero-weight
    entry the value of its left neighbour (right neighbour at the start)."""
    pos = w > 0
    if pos.all():
        return np.asarray(solve(v.tolist(), w.tolist()), dtype=float)
    fitted = solve(v[pos].tolist(), w[pos].tolist())
    out = np.empty(v.size)
    out[pos] = fitted
    idx = np.flatnonzero(pos)
    # index of the nearest positive-weight entry to the left, else the first one
    left = np.searchsorted(idx, np.arange(v.size), side="right") - 1
    src = idx[np.maximum(left, 0)]
    out[~pos] = out[src[~pos]]
    return out


def _pava(v: list, w: list) -> list:
    # block stack: (mean, weight, size); means are kept directly so that a
    # singleton block returns its input bit-for-bit
    means, wts, sizes = [], [], []
    for x, wx in zip(v, w):
        m, t, c = x, wx, 1
        while means and means[-1] > m:
            t0 = wts.pop()
            m = (means.pop() * t0 + m * t) / (t0 + t)
            t += t0
            c += sizes.pop()
        means.append(m)
        wts.append(t)
        sizes.append(c)
    out = []
    for m, c in zip(means, sizes):
        out.extend([m] * c)
    return out


def pava_l2(values, weights) -> np.ndarray:
    """Weighted least-squares nondecreasing fit.

    Zero-weight entries do not affect the objective; they are given the value
    of the adjacent block so the output stays monotone.
    """
    v, w = _check(values, weights)
    if v.size == 0:
        return v.copy()
    return _fill_zero_weight(v, w, _pava)


def weighted_median(values, weights) -> float:
    """Smallest ``m`` with ``sum(w_i : x_i <= m) >= sum(w) / 2``."""
    v, w = _check(values, weights)
    order = np.argsort(v, kind="stable")
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, cw[-1] / 2.0, side="left"))
    return float(v[order][min(k, v.size - 1)])


def _lower_median(items: list, total: float) -> float:
    half = total / 2.0
    acc = 0.0
    for x, wx in items:
        acc += wx
        if acc >= half:
            return x
    return items[-1][0]


def _median_pava(v: list, w: list) -> list:
    # block stack: (sorted (value, weight) list, total weight, median)
    blocks = []
    for x, wx in zip(v, w):
        items, tot, med = [(x, wx)], wx, x
        while blocks and blocks[-1][2] > med:
            prev_items, prev_tot, _ = blocks.pop()
            items = list(heapq.merge(prev_items, items))
            tot += prev_tot
            med = _lower_median(items, tot)
        blocks.append((items, tot, med))
    out = []
    for items, _, med in blocks:
        out.extend([med] * len(items))
    return out


def isotonic_l1(values, weights) -> np.ndarray:
    """Weighted least-absolute-deviation nondecreasing fit.

    The minimiser is generally not unique; each pooled block takes its lower
    weighted median, which makes the output deterministic.
    """
    v, w = _check(values, weights)
    if v.size == 0:
        return v.copy()
    return _fill_zero_weight(v, w, _median_pava)


def gcm_left_derivative(points) -> np.ndarray:
    """Left derivatives of the greatest convex minorant of a cumulative-sum
    diagram, evaluated at every abscissa after the origin.

    Args:
        points: ``(m + 1, 2)`` array of ``(abscissa, ordinate)`` pairs with
            ``points[0] == (0, 0)`` and strictly increasing abscissas.

    Returns:
        Array of ``m`` slopes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("points must be an (m+1, 2) array with m >= 1")
    if pts[0, 0] != 0.0 or pts[0, 1] != 0.0:
        raise ValueError("cumulative-sum diagram must start at (0, 0)")
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise ValueError("abscissas must be strictly increasing")

    # lower hull, monotone chain
    hull = []
    for p in map(tuple, pts):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx = np.array([h[0] for h in hull])
    hy = np.array([h[1] for h in hull])
    seg_slopes = np.diff(hy) / np.diff(hx)
    # segment k covers (hx[k], hx[k+1]]
    seg = np.searchsorted(hx, pts[1:, 0], side="left") - 1
    return seg_slopes[np.clip(seg, 0, seg_slopes.size - 1)]


def project(f: StepFunction, weights, metric: str = L2) -> StepFunction:
    """Monotone projection of ``f`` with per-bin weights, same partition."""
    if metric == L2:
        heights = pava_l2(f.heights, weights)
    elif metric == L1:
        heights = isotonic_l1(f.heights, weights)
    else:
        raise ValueError(f"unknown projection metric {metric!r}")
    return StepFunction(f.partition, heights)
