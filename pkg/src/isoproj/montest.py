"""Bayesian tests of monotonicity.

Both tests reject when the posterior probability of a shrinking neighbourhood
of the monotone cone falls below ``gamma``:

* ``fixed``: Type 1 prior with ``J = ceil(n^(1/3))``, L1 distance to the cone,
  threshold ``M_n n^(-1/3)``;
* ``adaptive``: Poisson prior on J, Hellinger distance between induced
  densities, threshold ``M0 sqrt(J log n / n)`` with the drawn J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .conjugate import PriorSpec, Type1, Type3, posterior_over_J, reference_sigma
from .data import Dataset, default_J
from .inference import posterior_batches
from .isotonic import L1, pava_l2
from .metrics import HELLINGER, DesignMeasure, EmpiricalWeights, Uniform, bin_masses, cone_distances
from .parallel import run_tasks, task_rng

FIXED = "fixed"
ADAPTIVE = "adaptive"


def default_rate_constant(n: int) -> float:
    """``log log max(n, 27)``, the slowly growing ``M_n``."""
    return math.log(math.log(max(n, 27)))


@dataclass(frozen=True)
class TestConfig:
    gamma: float = 0.5
    rate_constant: Optional[float] = None
    m0: float = 1.0
    mode: str = FIXED
    sample_count: int = 500
    measure: DesignMeasure = field(default_factory=Uniform)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.m0 > 0:
            raise ValueError("m0 must be positive")
        if self.mode not in (FIXED, ADAPTIVE):
            raise ValueError(f"mode must be {FIXED!r} or {ADAPTIVE!r}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        if self.rate_constant is not None and not self.rate_constant > 0:
            raise ValueError("rate_constant must be positive")
        if isinstance(self.measure, EmpiricalWeights):
            raise ValueError("tests integrate against a continuous design measure")


@dataclass(frozen=True)
class TestResult:
    mode: str
    n: int
    posterior_prob_near_cone: float
    threshold_tau: float
    reject: bool
    mc_se: float
    gamma: float
    J: Optional[int] = None
    per_J_breakdown: Optional[list] = None

    __test__ = False

    def as_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "n": self.n,
            "gamma": self.gamma,
            "tau": self.threshold_tau,
            "prob": self.posterior_prob_near_cone,
            "mc_se": self.mc_se,
            "reject": self.reject,
        }
        if self.J is not None:
            out["J"] = self.J
        if self.per_J_breakdown is not None:
            out["J_posterior"] = [
                {"J": J, "weight": w, "prob": p} for J, w, p in self.per_J_breakdown
            ]
        return out


def _decide(mode, n, below, tau, cfg, **extra) -> TestResult:
    prob = float(np.mean(below))
    se = math.sqrt(prob * (1.0 - prob) / below.size)
    return TestResult(mode=mode, n=n, posterior_prob_near_cone=prob, threshold_tau=tau,
                      reject=prob < cfg.gamma, mc_se=se, gamma=cfg.gamma, **extra)


def test_fixedJ(data: Dataset, prior: Optional[PriorSpec], cfg: TestConfig,
                rng: np.random.Generator) -> TestResult:
    """L1 test with a Type 1 prior and ``tau = M_n n^(-1/3)``."""
    n = data.n
    J = default_J(n)
    if prior is None:
        prior = PriorSpec(prior_type=Type1(J))
    if not isinstance(prior.prior_type, Type1):
        raise ValueError("the fixed-J test requires a Type1 prior")
    if prior.prior_type.J not in (None, J):
        raise ValueError(f"the fixed-J test uses J = ceil(n^(1/3)) = {J}, got {prior.prior_type.J}")
    if prior.prior_type.J is None:
        prior = PriorSpec(Type1(J), prior.zeta, prior.lambda2, prior.sigma_mode, prior.lambda2_bounds)
    m_n = cfg.rate_constant if cfg.rate_constant is not None else default_rate_constant(n)
    tau = m_n * n ** (-1.0 / 3.0)
    (batch,) = posterior_batches(data, prior, cfg.sample_count, rng)
    dist = cone_distances(batch.thetas, bin_masses(batch.partition, cfg.measure), L1)
    return _decide(FIXED, n, dist <= tau, tau, cfg, J=J)


test_fixedJ.__test__ = False  # keep pytest from collecting the import


def adaptive_threshold(m0: float, J, n: int):
    return m0 * np.sqrt(np.asarray(J, dtype=float) * math.log(n) / n)


def adaptive_discrepancies(data: Dataset, prior: PriorSpec, count: int, measure: DesignMeasure,
                           rng: np.random.Generator):
    """Per-draw ``(J, Hellinger distance to the cone)`` under the joint posterior."""
    Js = np.empty(count, dtype=int)
    dist = np.empty(count)
    for batch in posterior_batches(data, prior, count, rng):
        masses = bin_masses(batch.partition, measure)
        Js[batch.positions] = batch.partition.J
        dist[batch.positions] = cone_distances(batch.thetas, masses, HELLINGER, batch.sigmas)
    return Js, dist


def test_adaptive(data: Dataset, prior: Optional[PriorSpec], cfg: TestConfig,
                  rng: np.random.Generator) -> TestResult:
    """Hellinger test with a Poisson prior on the number of bins."""
    if prior is None:
        prior = PriorSpec(prior_type=Type3())
    if not isinstance(prior.prior_type, Type3):
        raise ValueError("the adaptive test requires a Type3 prior")
    n = data.n
    Js, dist = adaptive_discrepancies(data, prior, cfg.sample_count, cfg.measure, rng)
    below = dist <= adaptive_threshold(cfg.m0, Js, n)

    weights = posterior_over_J(data, prior)
    breakdown = []
    for J in range(1, weights.size + 1):
        hit = Js == J
        p = float(np.mean(below[hit])) if hit.any() else None
        breakdown.append((J, float(weights[J - 1]), p))
    # reported tau: the threshold at the posterior-mean J
    J_bar = float(np.dot(np.arange(1, weights.size + 1), weights))
    tau = float(adaptive_threshold(cfg.m0, J_bar, n))
    return _decide(ADAPTIVE, n, below, tau, cfg, per_J_breakdown=breakdown)


test_adaptive.__test__ = False


def run_test(data: Dataset, cfg: TestConfig, rng: np.random.Generator,
             prior: Optional[PriorSpec] = None) -> TestResult:
    if cfg.mode == FIXED:
        return test_fixedJ(data, prior, cfg, rng)
    return test_adaptive(data, prior, cfg, rng)


def calibrate_m0(data: Dataset, prior: Optional[PriorSpec], cfg: TestConfig, seed: int,
                 reps: int = 50, quantile: float = 0.95) -> float:
    """Pick ``M0`` from a pilot simulation under a monotone null.

    The null truth is the L2 isotonic fit of ``data`` with the plug-in sigma.
    Every posterior draw of every pilot dataset contributes the ratio
    ``d / sqrt(J log n / n)``; the result is the ``quantile`` of the pooled
    ratios. When that quantile is zero (almost every null draw is already
    monotone, so any positive ``M0`` keeps the size down) the default
    ``cfg.m0`` is returned.
    """
    if prior is None:
        prior = PriorSpec(prior_type=Type3())
    n = data.n
    order = np.argsort(data.xs, kind="stable")
    fit = pava_l2(data.ys[order], np.ones(n))
    null_mean = np.empty(n)
    null_mean[order] = fit
    sigma = reference_sigma(data, prior)
    ratios = []
    for rep in range(reps):
        rng = task_rng(seed, rep)
        ys = null_mean + sigma * rng.standard_normal(n)
        Js, dist = adaptive_discrepancies(Dataset(data.xs, ys), prior, cfg.sample_count,
                                          cfg.measure, rng)
        ratios.append(dist / adaptive_threshold(1.0, Js, n))
    m0 = float(np.quantile(np.concatenate(ratios), quantile))
    return m0 if m0 > 0 else cfg.m0


@dataclass(frozen=True)
class _SeparationTask:
    family: Callable
    n: int
    cfg: TestConfig
    separation: float
    seed: int
    cell: int
    rep: int


def _separation_task(task: _SeparationTask) -> bool:
    rng = task_rng(task.seed, task.cell, task.rep)
    data = task.family(task.separation, task.n, rng)
    return run_test(data, task.cfg, rng).reject


def separation_curve(alternative_family: Callable, n: int, cfg: TestConfig,
                     separations: Sequence[float], reps: int, seed: int,
                     threads: Optional[int] = None) -> List[tuple]:
    """Empirical power along a family of alternatives.

    Args:
        alternative_family: picklable callable ``(separation, n, rng) ->
            Dataset`` whose truth sits at L1 distance ``separation`` from the
            monotone cone. It raises ``ValueError`` when a separation cannot
            be reached.
        n: sample size.
        cfg: test settings.
        separations: distances to sweep.
        reps: replications per separation.
        seed: master seed; replication ``r`` of cell ``c`` uses stream
            ``(seed, c, r)``.

    Returns:
        Rows ``(separation, power, mc_se)``.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    tasks = [_SeparationTask(alternative_family, n, cfg, float(s), seed, c, r)
             for c, s in enumerate(separations) for r in range(reps)]
    rejects = np.array(run_tasks(_separation_task, tasks, threads), dtype=float)
    rows = []
    for c, s in enumerate(separations):
        power = float(rejects[c * reps:(c + 1) * reps].mean())
        rows.append((float(s), power, math.sqrt(power * (1.0 - power) / reps)))
    return rows
