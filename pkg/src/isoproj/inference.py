"""Projection-posterior sampling: unconstrained conjugate draws pushed onto
the monotone cone, plus pointwise summaries of the projected draws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from .conjugate import (
    InverseGamma,
    PriorSpec,
    Type1,
    Type2,
    Type3,
    _log_marginal,
    _log_marginal_ig,
    _prior_arrays,
    draw_heights,
    posterior_over_J,
    posterior_params,
    reference_sigma,
)
from .data import BinStats, Dataset, Partition, bin_stats, default_J, equispaced_partition, sample_knots_from_design
from .isotonic import L1, L2, StepFunction, isotonic_l1, pava_l2
from .metrics import DesignMeasure, Uniform, lp_distance

EMPIRICAL = "empirical"
UNIFORM = "uniform"


@dataclass(frozen=True)
class ProjectionSample:
    raw: StepFunction
    projected: StepFunction
    discrepancy_l1: float
    discrepancy_l2: float
    sigma_draw: float


@dataclass
class DrawBatch:
    """Posterior draws sharing one partition; ``positions`` index the
    draws within the full sample."""

    partition: Partition
    stats: BinStats
    thetas: np.ndarray
    sigmas: np.ndarray
    positions: np.ndarray


@dataclass(frozen=True)
class PosteriorSummary:
    grid: np.ndarray
    mean_curve: np.ndarray
    median_curve: np.ndarray
    lower_band: np.ndarray
    upper_band: np.ndarray
    alpha: float
    mean_l1_error_vs: Optional[float] = None


def resolve_J(prior_type, n: int) -> int:
    return prior_type.J if prior_type.J is not None else default_J(n)


def _type2_candidates(data, prior, J, rng, sigma_ref):
    ptype = prior.prior_type
    parts, logw = [], []
    for _ in range(ptype.candidates):
        part = sample_knots_from_design(data.xs, J, rng)
        stats = bin_stats(data, part)
        zeta, lambda2 = _prior_arrays(stats, prior)
        if sigma_ref is None:
            mode = prior.sigma_mode
            logw.append(_log_marginal_ig(stats, zeta, lambda2, mode.beta1, mode.beta2))
        else:
            logw.append(_log_marginal(stats, zeta, lambda2, sigma_ref))
        parts.append(part)
    logw = np.array(logw)
    probs = np.exp(logw - logsumexp(logw))
    return parts, probs / probs.sum()


def posterior_batches(data: Dataset, prior: PriorSpec, count: int,
                      rng: np.random.Generator) -> List[DrawBatch]:
    """Draw ``count`` unconstrained posterior step functions, grouped by
    partition. Deterministic given the generator state."""
    if count < 1:
        raise ValueError("count must be at least 1")
    ptype = prior.prior_type
    n = data.n

    if isinstance(ptype, Type1):
        part = equispaced_partition(resolve_J(ptype, n))
        stats = bin_stats(data, part)
        thetas, sigmas = draw_heights(posterior_params(stats, prior), count, rng)
        return [DrawBatch(part, stats, thetas, sigmas, np.arange(count))]

    integrate_sigma = isinstance(prior.sigma_mode, InverseGamma)
    sigma_ref = None if integrate_sigma else reference_sigma(data, prior)

    if isinstance(ptype, Type2):
        parts, probs = _type2_candidates(data, prior, resolve_J(ptype, n), rng, sigma_ref)
    elif isinstance(ptype, Type3):
        probs = posterior_over_J(data, prior)
        parts = [equispaced_partition(J) for J in range(1, probs.size + 1)]
    else:
        raise TypeError(f"unknown prior type {ptype!r}")

    which = rng.choice(len(parts), size=count, p=probs)
    batches = []
    for k in np.unique(which):
        positions = np.flatnonzero(which == k)
        stats = bin_stats(data, parts[k])
        state = posterior_params(stats, prior, sigma_hat=sigma_ref)
        thetas, sigmas = draw_heights(state, positions.size, rng)
        batches.append(DrawBatch(parts[k], stats, thetas, sigmas, positions))
    return batches


def projection_weights(batch_or_stats, weights: str = EMPIRICAL) -> np.ndarray:
    stats = batch_or_stats.stats if isinstance(batch_or_stats, DrawBatch) else batch_or_stats
    if weights == EMPIRICAL:
        return stats.counts / stats.n
    if weights == UNIFORM:
        return stats.partition.lengths.copy()
    raise ValueError(f"unknown projection weights {weights!r}")


def draw_projection_posterior(data: Dataset, prior: PriorSpec, count: int,
                              metric: str = L2, rng: Optional[np.random.Generator] = None,
                              weights: str = EMPIRICAL) -> List[ProjectionSample]:
    """Sample the projection posterior.

    Each unconstrained draw is projected on the monotone cone in ``metric``
    using bin weights ``N_j / n`` (or bin lengths with ``weights="uniform"``).
    """
    if rng is None:
        rng = np.random.default_rng()
    solver = {L2: pava_l2, L1: isotonic_l1}.get(metric)
    if solver is None:
        raise ValueError(f"unknown projection metric {metric!r}")
    out: list = [None] * count
    for batch in posterior_batches(data, prior, count, rng):
        w = projection_weights(batch, weights)
        for pos, theta, sigma in zip(batch.positions, batch.thetas, batch.sigmas):
            proj = solver(theta, w)
            diff = theta - proj
            out[pos] = ProjectionSample(
                raw=StepFunction(batch.partition, theta),
                projected=StepFunction(batch.partition, proj),
                discrepancy_l1=float(np.dot(w, np.abs(diff))),
                discrepancy_l2=math.sqrt(float(np.dot(w, diff**2))),
                sigma_draw=float(sigma),
            )
    return out


def evaluate_projected(samples, x) -> np.ndarray:
    """``(len(samples), len(x))`` matrix of projected curves at ``x``."""
    x = np.asarray(x, dtype=float)
    return np.vstack([s.projected(x) for s in samples])


def summarize(samples, grid_size: int = 101, alpha: float = 0.05,
              reference: Optional[StepFunction] = None) -> PosteriorSummary:
    """Pointwise mean, median and equal-tailed ``1 - alpha`` band of the
    projected draws on an equispaced grid of ``[0, 1]``."""
    if not samples:
        raise ValueError("empty sample list")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    grid = np.linspace(0.0, 1.0, grid_size)
    curves = evaluate_projected(samples, grid)
    lo, med, hi = np.quantile(curves, [alpha / 2.0, 0.5, 1.0 - alpha / 2.0], axis=0)
    err = None
    if reference is not None:
        err = float(np.mean([lp_distance(s.projected, reference, Uniform(), 1.0).value
                             for s in samples]))
    return PosteriorSummary(grid, curves.mean(axis=0), med, lo, hi, alpha, err)


@dataclass(frozen=True)
class InheritanceReport:
    ok: bool
    checked: int
    violations: int
    max_ratio: float


def inheritance_check(samples, reference: StepFunction, mu: DesignMeasure,
                      metric: str = L1) -> InheritanceReport:
    """Check ``d(f*, f0) <= 2 d(f, f0) + 1e-12`` draw by draw.

    ``mu`` must be the measure whose bin masses were used for the projection
    (``EmpiricalWeights(N_j / n)`` for the default pipeline).
    """
    if not reference.is_monotone:
        raise ValueError("reference function must be monotone")
    p = {L1: 1.0, L2: 2.0}.get(metric)
    if p is None:
        raise ValueError(f"unknown metric {metric!r}")
    violations, max_ratio = 0, 0.0
    for s in samples:
        d_raw = lp_distance(s.raw, reference, mu, p).value
        d_proj = lp_distance(s.projected, reference, mu, p).value
        if d_proj > 2.0 * d_raw + 1e-12:
            violations += 1
        if d_raw > 0:
            max_ratio = max(max_ratio, d_proj / d_raw)
    return InheritanceReport(violations == 0, len(samples), violations, max_ratio)
