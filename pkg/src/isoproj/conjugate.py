"""Conjugate normal posterior for step heights and the treatment of sigma^2.

Everything is computed from bin sums, so each call is O(n) at most. The
quadratic form ``q' (B Lam B' + I)^-1 q`` with ``q = Y - B zeta`` reduces by
the Woodbury identity to ``|q|^2 - sum_j S_j^2 / (N_j + 1/lam_j^2)`` where
``S_j`` is the sum of ``q`` over bin ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .data import BinStats, Dataset, Partition, bin_stats, default_J, equispaced_partition
from .isotonic import StepFunction


# --- prior types -----------------------------------------------------------

@dataclass(frozen=True)
class Type1:
    """Equispaced knots, fixed J (``None`` means ``ceil(n^(1/3))``)."""
    J: Optional[int] = None


@dataclass(frozen=True)
class Type2:
    """Knots drawn from the design points, fixed J.

    ``candidates`` knot sets are drawn from the uniform prior and reweighted
    by their marginal likelihood.
    """
    J: Optional[int] = None
    candidates: int = 64


@dataclass(frozen=True)
class Type3:
    """Equispaced knots with a Poisson prior on J, truncated to ``1..J_max``."""
    poisson_mean: Optional[float] = None
    J_max: Optional[int] = None

    def __post_init__(self):
        if self.poisson_mean is not None and not self.poisson_mean > 0:
            raise ValueError("poisson_mean must be positive")
        if self.J_max is not None and self.J_max < 1:
            raise ValueError("J_max must be at least 1")


# --- sigma handling --------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class PlugInMLE:
    pass


@dataclass(frozen=True)
class InverseGamma:
    beta1: float = 3.0
    beta2: float = 1.0

    def __post_init__(self):
        if not self.beta1 > 2:
            raise ValueError("inverse-gamma shape beta1 must exceed 2")
        if not self.beta2 > 0:
            raise ValueError("inverse-gamma scale beta2 must be positive")


@dataclass(frozen=True)
class SigmaGrid:
    """Uniform prior on a geometric grid over ``[sigma_hat/3, 3 sigma_hat]``."""
    points: int = 25

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("sigma grid needs at least two points")


PriorType = Union[Type1, Type2, Type3]
SigmaMode = Union[Fixed, PlugInMLE, InverseGamma, SigmaGrid]


@dataclass(frozen=True)
class PriorSpec:
    prior_type: PriorType = field(default_factory=Type1)
    zeta: Union[float, np.ndarray] = 0.0
    lambda2: Union[float, np.ndarray] = 1.0
    sigma_mode: SigmaMode = field(default_factory=PlugInMLE)
    lambda2_bounds: tuple = (1e-8, 1e8)

    def __post_init__(self):
        lo, hi = self.lambda2_bounds
        if not 0 < lo <= hi:
            raise ValueError("lambda2_bounds must satisfy 0 < B1^2 <= B2^2")
        lam = np.atleast_1d(np.asarray(self.lambda2, dtype=float))
        if np.any(lam < lo) or np.any(lam > hi):
            raise ValueError(f"lambda2 outside declared bounds [{lo}, {hi}]")
        if not np.all(np.isfinite(np.atleast_1d(np.asarray(self.zeta, dtype=float)))):
            raise ValueError("zeta must be finite")

    def zeta_for(self, J: int) -> np.ndarray:
        return _broadcast(self.zeta, J, "zeta")

    def lambda2_for(self, J: int) -> np.ndarray:
        return _broadcast(self.lambda2, J, "lambda2")


def _broadcast(value, J, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(J, float(arr))
    arr = arr.ravel()
    if arr.size != J:
        raise ValueError(f"{name} has {arr.size} entries, partition has {J} bins")
    return arr


def default_J_max(n: int) -> int:
    if n < 3:
        return 1
    return int(min(200, math.ceil(math.sqrt(n / math.log(n)))))


def default_poisson_mean(n: int) -> float:
    return n ** (1.0 / 3.0)


# --- posterior state -------------------------------------------------------

@dataclass(frozen=True)
class PosteriorState:
    """Conditional posterior of the heights given the partition.

    ``theta_j ~ N(post_means[j], sigma^2 * post_vars_unit_sigma[j])`` with
    sigma^2 fixed (``sigma2``), inverse-gamma (``ig``) or discrete on a grid
    (``sigma_grid`` = (values of sigma, probabilities)).
    """

    partition: Partition
    post_means: np.ndarray
    post_vars_unit_sigma: np.ndarray
    sigma2: Optional[float] = None
    ig: Optional[tuple] = None
    sigma_grid: Optional[tuple] = None

    def sigma2_mean(self) -> float:
        if self.sigma2 is not None:
            return self.sigma2
        if self.ig is not None:
            a, b = self.ig
            return b / (a - 1.0)
        values, probs = self.sigma_grid
        return float(np.sum(probs * values**2))


def _quad_form(stats: BinStats, zeta, lambda2) -> float:
    # |q|^2 with q_i = y_i - zeta_{j(i)}
    qq = np.sum(stats.sumsq - 2.0 * zeta * stats.sums + stats.counts * zeta**2)
    S = stats.sums - stats.counts * zeta
    return float(max(qq - np.sum(S**2 / (stats.counts + 1.0 / lambda2)), 0.0))


def _log_det(stats: BinStats, lambda2) -> float:
    return float(np.sum(np.log1p(stats.counts * lambda2)))


def _log_marginal(stats: BinStats, zeta, lambda2, sigma: float) -> float:
    n = stats.n
    q = _quad_form(stats, zeta, lambda2)
    return (-0.5 * n * math.log(2.0 * math.pi * sigma**2)
            - 0.5 * _log_det(stats, lambda2)
            - 0.5 * q / sigma**2)


def _log_marginal_ig(stats: BinStats, zeta, lambda2, beta1, beta2) -> float:
    """Log marginal with sigma^2 ~ IG(beta1, beta2) integrated out."""
    n = stats.n
    q = _quad_form(stats, zeta, lambda2)
    a, b = beta1 + n / 2.0, beta2 + q / 2.0
    return (-0.5 * n * math.log(2.0 * math.pi) - 0.5 * _log_det(stats, lambda2)
            + beta1 * math.log(beta2) - gammaln(beta1) + gammaln(a) - a * math.log(b))


def _prior_arrays(stats: BinStats, prior: PriorSpec):
    return prior.zeta_for(stats.J), prior.lambda2_for(stats.J)


def _sigma_grid(stats, zeta, lambda2, sigma_hat, points):
    values = np.geomspace(sigma_hat / 3.0, 3.0 * sigma_hat, points)
    logp = np.array([_log_marginal(stats, zeta, lambda2, s) for s in values])
    probs = np.exp(logp - logsumexp(logp))
    return values, probs / probs.sum()


def posterior_params(stats: BinStats, prior: PriorSpec,
                     sigma_hat: Optional[float] = None) -> PosteriorState:
    """Posterior of the step heights for one partition.

    Args:
        stats: bin statistics of the data on the partition.
        prior: height prior and sigma handling.
        sigma_hat: reference plug-in value of sigma used by the plug-in and
            grid modes; computed from ``stats`` when omitted.
    """
    zeta, lambda2 = _prior_arrays(stats, prior)
    prec = stats.counts + 1.0 / lambda2
    means = (stats.sums + zeta / lambda2) / prec
    empty = stats.counts == 0
    means[empty] = zeta[empty]
    variances = 1.0 / prec
    variances[empty] = lambda2[empty]

    mode = prior.sigma_mode
    kw = {}
    if isinstance(mode, Fixed):
        kw["sigma2"] = float(mode.sigma) ** 2
    elif isinstance(mode, PlugInMLE):
        kw["sigma2"] = (float(sigma_hat) ** 2 if sigma_hat is not None
                        else _quad_form(stats, zeta, lambda2) / stats.n)
    elif isinstance(mode, InverseGamma):
        q = _quad_form(stats, zeta, lambda2)
        kw["ig"] = (mode.beta1 + stats.n / 2.0, mode.beta2 + q / 2.0)
    elif isinstance(mode, SigmaGrid):
        if sigma_hat is None:
            sigma_hat = math.sqrt(_quad_form(stats, zeta, lambda2) / stats.n)
        if not sigma_hat > 0:
            raise ValueError("sigma grid needs a positive plug-in estimate")
        kw["sigma_grid"] = _sigma_grid(stats, zeta, lambda2, sigma_hat, mode.points)
    else:
        raise TypeError(f"unknown sigma mode {mode!r}")
    return PosteriorState(stats.partition, means, variances, **kw)


def marginal_mle_sigma2(data: Dataset, part: Partition, prior: PriorSpec) -> float:
    """Marginal maximum-likelihood estimate of sigma^2 for a fixed partition."""
    stats = bin_stats(data, part)
    zeta, lambda2 = _prior_arrays(stats, prior)
    return _quad_form(stats, zeta, lambda2) / stats.n


def sigma2_posterior(data: Dataset, part: Partition, prior: PriorSpec) -> tuple:
    """Inverse-gamma ``(shape, scale)`` of the marginal posterior of sigma^2."""
    mode = prior.sigma_mode
    if not isinstance(mode, InverseGamma):
        raise ValueError("sigma2_posterior requires an InverseGamma sigma mode")
    stats = bin_stats(data, part)
    zeta, lambda2 = _prior_arrays(stats, prior)
    q = _quad_form(stats, zeta, lambda2)
    return (mode.beta1 + data.n / 2.0, mode.beta2 + q / 2.0)


def log_marginal_likelihood(data: Dataset, part: Partition, sigma: float,
                            prior: PriorSpec) -> float:
    """Log density of ``N(B zeta, sigma^2 (B Lam B' + I))`` at the responses."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    stats = bin_stats(data, part)
    zeta, lambda2 = _prior_arrays(stats, prior)
    return _log_marginal(stats, zeta, lambda2, sigma)


def reference_sigma(data: Dataset, prior: PriorSpec) -> float:
    """Plug-in sigma at ``J = ceil(n^(1/3))`` on equispaced bins.

    Shared across partitions whenever marginal likelihoods are compared.
    """
    mode = prior.sigma_mode
    if isinstance(mode, Fixed):
        return float(mode.sigma)
    J = default_J(data.n)
    scalar = PriorSpec(zeta=_scalar_or_fail(prior.zeta), lambda2=_scalar_or_fail(prior.lambda2),
                       lambda2_bounds=prior.lambda2_bounds)
    return math.sqrt(marginal_mle_sigma2(data, equispaced_partition(J), scalar))


def _scalar_or_fail(value):
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 0:
        raise ValueError("per-bin hyperparameters need a fixed J; use scalars with a prior on J")
    return float(arr)


def posterior_over_J(data: Dataset, prior: PriorSpec,
                     sigma: Optional[float] = None) -> np.ndarray:
    """Posterior probabilities of ``J = 1..J_max`` (entry ``k`` is ``J = k+1``).

    With ``sigma`` omitted the sigma mode decides: an inverse-gamma prior is
    integrated out exactly, every other mode uses :func:`reference_sigma`.
    """
    ptype = prior.prior_type
    if not isinstance(ptype, Type3):
        raise ValueError("posterior_over_J requires a Type3 prior")
    n = data.n
    J_max = ptype.J_max if ptype.J_max is not None else default_J_max(n)
    mean = ptype.poisson_mean if ptype.poisson_mean is not None else default_poisson_mean(n)
    zeta0, lam0 = _scalar_or_fail(prior.zeta), _scalar_or_fail(prior.lambda2)
    integrate = sigma is None and isinstance(prior.sigma_mode, InverseGamma)
    if sigma is None and not integrate:
        sigma = reference_sigma(data, prior)
    if not integrate and not sigma > 0:
        raise ValueError("sigma must be positive to compare partitions")

    logw = np.empty(J_max)
    for J in range(1, J_max + 1):
        stats = bin_stats(data, equispaced_partition(J))
        zeta, lambda2 = np.full(J, zeta0), np.full(J, lam0)
        if integrate:
            mode = prior.sigma_mode
            loglik = _log_marginal_ig(stats, zeta, lambda2, mode.beta1, mode.beta2)
        else:
            loglik = _log_marginal(stats, zeta, lambda2, sigma)
        logprior = J * math.log(mean) - mean - gammaln(J + 1)
        logw[J - 1] = logprior + loglik
    if not np.any(np.isfinite(logw)):
        raise FloatingPointError("all J-posterior weights underflow; check J_max and sigma")
    probs = np.exp(logw - logsumexp(logw))
    return probs / probs.sum()


def draw_heights(state: PosteriorState, count: int, rng: np.random.Generator):
    """Vectorised draws: ``(thetas of shape (count, J), sigmas of shape (count,))``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if state.sigma2 is not None:
        sig2 = np.full(count, state.sigma2)
    elif state.ig is not None:
        a, b = state.ig
        sig2 = 1.0 / rng.gamma(a, 1.0 / b, size=count)
    else:
        values, probs = state.sigma_grid
        sig2 = rng.choice(values, size=count, p=probs) ** 2
    z = rng.standard_normal((count, state.post_means.size))
    thetas = state.post_means + z * np.sqrt(sig2[:, None] * state.post_vars_unit_sigma)
    return thetas, np.sqrt(sig2)


def sample_heights(state: PosteriorState, count: int,
                   rng: np.random.Generator) -> list:
    thetas, _ = draw_heights(state, count, rng)
    return [StepFunction(state.partition, row) for row in thetas]
