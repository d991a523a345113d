"""Distances between step functions and distances to the monotone cone.

All integrals are exact sums over the common refinement of the partitions
involved; no quadrature is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import Partition
from .isotonic import L1, L2, StepFunction, isotonic_l1, pava_l2

HELLINGER = "Hellinger"


@dataclass(frozen=True)
class Uniform:
    """Lebesgue measure on [0, 1]."""


@dataclass(frozen=True)
class StepDensity:
    """Piecewise-constant density on the bins of ``knots``."""

    knots: np.ndarray
    densities: np.ndarray
    bounded_away: bool = False

    def __post_init__(self):
        part = Partition(self.knots)
        dens = np.asarray(self.densities, dtype=float).ravel()
        if dens.size != part.J:
            raise ValueError("one density value per bin is required")
        if np.any(dens < 0):
            raise ValueError("densities must be nonnegative")
        total = float(np.sum(dens * part.lengths))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"density integrates to {total}, not 1")
        if self.bounded_away and not dens.min() > 0:
            raise ValueError("density flagged as bounded away from zero has a zero bin")
        object.__setattr__(self, "knots", part.knots)
        object.__setattr__(self, "densities", dens)


@dataclass(frozen=True)
class EmpiricalWeights:
    """Bin masses ``w_j`` on ``partition``, spread evenly inside each bin.

    For step functions on ``partition`` this gives the empirical
    ``L_p(G_n)`` distance when ``w_j = N_j / n``.
    """

    weights: np.ndarray
    partition: Partition

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != self.partition.J:
            raise ValueError("one weight per bin is required")
        if np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be nonnegative with positive total")
        object.__setattr__(self, "weights", w / w.sum())


DesignMeasure = Union[Uniform, StepDensity, EmpiricalWeights]


@dataclass(frozen=True)
class Discrepancy:
    value: float
    metric: str

    def __float__(self):
        return float(self.value)


def _density_form(mu: DesignMeasure):
    if isinstance(mu, Uniform):
        return np.array([0.0, 1.0]), np.array([1.0])
    if isinstance(mu, StepDensity):
        return mu.knots, mu.densities
    if isinstance(mu, EmpiricalWeights):
        return mu.partition.knots, mu.weights / mu.partition.lengths
    raise TypeError(f"unknown design measure {mu!r}")


def _refine(*knot_arrays):
    knots = np.unique(np.concatenate(knot_arrays))
    mids = 0.5 * (knots[:-1] + knots[1:])
    return knots, mids


def _cell_masses(knots, mids, mu):
    mk, dens = _density_form(mu)
    return dens[Partition(mk).locate(mids)] * np.diff(knots)


def bin_masses(part: Partition, mu: DesignMeasure) -> np.ndarray:
    """Measure of each bin of ``part``."""
    mk, _ = _density_form(mu)
    knots, mids = _refine(part.knots, mk)
    cells = _cell_masses(knots, mids, mu)
    return np.bincount(part.locate(mids), weights=cells, minlength=part.J)


def _check_p(p):
    if not 0 < p <= 2:
        raise ValueError(f"p must lie in (0, 2], got {p}")


def _lp_from_masses(diff, masses, p):
    s = float(np.sum(masses * np.abs(diff) ** p))
    return s ** (1.0 / p) if p >= 1 else s


def lp_distance(f: StepFunction, h: StepFunction, mu: DesignMeasure, p: float = 1.0) -> Discrepancy:
    """``(int |f-h|^p dmu)^(1/p)`` for ``p >= 1``; the bare integral for ``p < 1``."""
    _check_p(p)
    mk, _ = _density_form(mu)
    knots, mids = _refine(f.partition.knots, h.partition.knots, mk)
    masses = _cell_masses(knots, mids, mu)
    tag = L1 if p == 1 else f"L{p:g}"
    return Discrepancy(_lp_from_masses(f(mids) - h(mids), masses, p), tag)


def _bhattacharyya(diff, sigma_f, sigma_h):
    s2 = sigma_f**2 + sigma_h**2
    return math.sqrt(2.0 * sigma_f * sigma_h / s2) * np.exp(-(diff**2) / (4.0 * s2))


def hellinger_distance(f: StepFunction, h: StepFunction, sigma_f: float, sigma_h: float,
                       mu: DesignMeasure = Uniform()) -> Discrepancy:
    """Hellinger distance between ``N(f(x), sigma_f^2) g(x)`` and
    ``N(h(x), sigma_h^2) g(x)`` where ``g`` is the density of ``mu``."""
    if isinstance(mu, EmpiricalWeights):
        raise ValueError("Hellinger distance is defined for a continuous design measure only")
    if not (sigma_f > 0 and sigma_h > 0):
        raise ValueError("sigmas must be positive")
    mk, _ = _density_form(mu)
    knots, mids = _refine(f.partition.knots, h.partition.knots, mk)
    masses = _cell_masses(knots, mids, mu)
    bc = float(np.sum(masses * _bhattacharyya(f(mids) - h(mids), sigma_f, sigma_h)))
    return Discrepancy(math.sqrt(max(1.0 - bc, 0.0)), HELLINGER)


def cone_distances(thetas, masses, metric: str, sigmas=None) -> np.ndarray:
    """Distance to the monotone cone of each row of ``thetas``.

    Rows are heights on one partition whose bins carry ``masses``. L1 and L2
    use the projection in the same metric; Hellinger uses the L2 projection
    with the row's sigma plugged into both densities.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    masses = np.asarray(masses, dtype=float)
    out = np.empty(thetas.shape[0])
    if metric == L1:
        for i, row in enumerate(thetas):
            out[i] = float(np.dot(masses, np.abs(row - isotonic_l1(row, masses))))
    elif metric == L2:
        for i, row in enumerate(thetas):
            out[i] = math.sqrt(float(np.dot(masses, (row - pava_l2(row, masses)) ** 2)))
    elif metric == HELLINGER:
        if sigmas is None:
            raise ValueError("Hellinger distance needs sigma")
        sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), (thetas.shape[0],))
        for i, row in enumerate(thetas):
            diff = row - pava_l2(row, masses)
            bc = float(np.dot(masses, np.exp(-(diff**2) / (8.0 * sigmas[i] ** 2))))
            out[i] = math.sqrt(max(1.0 - bc, 0.0))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return out


def distance_to_monotone(f: StepFunction, mu: DesignMeasure, metric: str,
                         sigma: Optional[float] = None) -> Discrepancy:
    """``d(f, f*)`` where ``f*`` is the monotone projection of ``f`` under ``mu``.

    For Hellinger the reference point is the L2(mu) projection, which is a
    valid discrepancy: it vanishes exactly on monotone ``f``.
    """
    if metric == HELLINGER and isinstance(mu, EmpiricalWeights):
        raise ValueError("Hellinger distance is defined for a continuous design measure only")
    masses = bin_masses(f.partition, mu)
    value = cone_distances(f.heights[None, :], masses, metric, sigma)[0]
    return Discrepancy(float(value), metric)
