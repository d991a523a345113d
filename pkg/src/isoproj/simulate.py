"""Data generators and Monte Carlo studies.

Truths are named by short specs such as ``linear``, ``sinusoid:c=0.3,k=2`` or
``custom:knots=0|0.5|1,heights=0|1``; see :func:`make_truth`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from .conjugate import PriorSpec, Type1, Type2
from .data import Dataset, Partition, default_J, equispaced_partition, bin_stats
from .inference import posterior_batches, projection_weights
from .isotonic import isotonic_l1, pava_l2
from .metrics import DesignMeasure, StepDensity, Uniform
from .montest import TestConfig, run_test
from .parallel import run_tasks, task_rng

# --- truths ----------------------------------------------------------------

_FAMILIES = ("linear", "quadratic", "step3", "constant", "neglinear",
             "sinusoid", "nonsmooth", "holder", "custom")


@dataclass(frozen=True)
class Truth:
    """A regression function on [0, 1], picklable and vectorised."""

    family: str
    params: Tuple[Tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown truth {self.family!r}; choose from {', '.join(_FAMILIES)}")

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "linear":
            return x.copy()
        if fam == "quadratic":
            return x**2
        if fam == "step3":
            return np.searchsorted([0.25, 0.5, 0.75], x, side="right") / 3.0
        if fam == "constant":
            return np.full_like(x, float(self.param("c", 0.0)))
        if fam == "neglinear":
            return -x
        if fam == "sinusoid":
            c, k = float(self.param("c", 0.0)), float(self.param("k", 1))
            return x + c * np.sin(2.0 * math.pi * k * x)
        if fam == "nonsmooth":
            # downward jump at 1/2 plus a square-root cusp at 3/4
            return np.where(x < 0.5, 1.0, -1.0) + 0.5 * np.sqrt(np.abs(x - 0.75))
        if fam == "holder":
            a, c = float(self.param("alpha", 0.5)), float(self.param("c", 1.0))
            return x - c * np.abs(2.0 * x - 1.0) ** a
        knots = np.asarray(self.param("knots"), dtype=float)
        heights = np.asarray(self.param("heights"), dtype=float)
        return heights[Partition(knots).locate(x)]

    @property
    def monotone(self) -> bool:
        fam = self.family
        if fam in ("linear", "quadratic", "step3", "constant"):
            return True
        if fam == "sinusoid":
            c, k = float(self.param("c", 0.0)), float(self.param("k", 1))
            return 2.0 * math.pi * k * abs(c) <= 1.0
        if fam == "custom":
            return bool(np.all(np.diff(self.param("heights")) >= 0))
        return False

    def spec(self) -> str:
        if not self.params:
            return self.family
        parts = []
        for k, v in self.params:
            if isinstance(v, (tuple, list)):
                v = "|".join(f"{x:.17g}" for x in v)
            elif isinstance(v, float):
                v = f"{v:.17g}"
            parts.append(f"{k}={v}")
        return f"{self.family}:{','.join(parts)}"


def make_truth(spec: str) -> Truth:
    """Parse ``family[:key=value,...]``; list values are ``|``-separated."""
    spec = spec.strip()
    family, _, rest = spec.partition(":")
    params = []
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"bad truth parameter {item!r} in {spec!r}")
            key = key.strip()
            if "|" in value:
                params.append((key, tuple(float(v) for v in value.split("|"))))
            else:
                params.append((key, float(value)))
    truth = Truth(family.strip(), tuple(params))
    if truth.family == "custom":
        if truth.param("knots") is None or truth.param("heights") is None:
            raise ValueError("custom truth needs knots=...|... and heights=...|...")
        Partition(truth.param("knots"))
        if len(truth.param("heights")) != len(truth.param("knots")) - 1:
            raise ValueError("custom truth needs one height per bin")
    return truth


# --- configuration ---------------------------------------------------------

ERROR_DISTS = ("normal", "rademacher", "uniform")
DESIGNS = ("fixed", "random")


@dataclass(frozen=True)
class SimConfig:
    truths: Tuple[str, ...] = ("linear",)
    sigma0: float = 0.5
    error_dist: str = "normal"
    design: str = "fixed"
    design_density: Optional[StepDensity] = None
    n_grid: Tuple[int, ...] = (500, 1000, 2000, 4000, 8000)
    reps: int = 50
    seed: int = 0
    k_bound: Optional[float] = None
    draws: int = 200

    def __post_init__(self):
        if isinstance(self.truths, str):
            object.__setattr__(self, "truths", (self.truths,))
        if not self.truths:
            raise ValueError("truths: at least one truth is required")
        for t in self.truths:
            make_truth(t)
        if self.sigma0 < 0:
            raise ValueError("sigma0: must be nonnegative")
        if self.error_dist not in ERROR_DISTS:
            raise ValueError(f"error_dist: must be one of {ERROR_DISTS}")
        if self.design not in DESIGNS:
            raise ValueError(f"design: must be one of {DESIGNS}")
        if not self.n_grid or any(int(n) < 2 for n in self.n_grid):
            raise ValueError("n_grid: sample sizes must be at least 2")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.reps < 1:
            raise ValueError("reps: must be positive")
        if self.draws < 1:
            raise ValueError("draws: must be positive")
        if self.k_bound is not None:
            grid = np.linspace(0.0, 1.0, 2001)
            for t in self.truths:
                if np.max(np.abs(make_truth(t)(grid))) > self.k_bound:
                    raise ValueError(f"k_bound: truth {t!r} exceeds the bound {self.k_bound}")

    @property
    def measure(self) -> DesignMeasure:
        return self.design_density if self.design_density is not None else Uniform()


def _sample_design(cfg: SimConfig, n: int, rng) -> np.ndarray:
    if cfg.design == "fixed":
        return np.arange(1, n + 1) / (n + 1.0)
    u = rng.random(n)
    dens = cfg.design_density
    if dens is None:
        return u
    # inverse CDF of a step density
    cdf = np.concatenate(([0.0], np.cumsum(dens.densities * np.diff(dens.knots))))
    cdf /= cdf[-1]
    j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, dens.densities.size - 1)
    width = np.diff(dens.knots)[j]
    mass = cdf[j + 1] - cdf[j]
    return np.clip(dens.knots[j] + (u - cdf[j]) / mass * width, 0.0, 1.0)


def sample_errors(dist: str, sigma0: float, n: int, rng) -> np.ndarray:
    """Mean-zero errors with variance ``sigma0**2``."""
    if dist == "normal":
        return sigma0 * rng.standard_normal(n)
    if dist == "rademacher":
        return sigma0 * (2.0 * rng.integers(0, 2, size=n) - 1.0)
    if dist == "uniform":
        return sigma0 * math.sqrt(3.0) * rng.uniform(-1.0, 1.0, size=n)
    raise ValueError(f"unknown error distribution {dist!r}")


def generate(cfg: SimConfig, n: int, rng: np.random.Generator,
             truth=None) -> Dataset:
    """Draw ``n`` observations; ``truth`` (spec string or :class:`Truth`)
    defaults to the first configured truth."""
    if truth is None:
        truth = cfg.truths[0]
    f0 = truth if isinstance(truth, Truth) else make_truth(truth)
    xs = _sample_design(cfg, n, rng)
    ys = f0(xs)
    if cfg.sigma0 > 0:
        ys = ys + sample_errors(cfg.error_dist, cfg.sigma0, n, rng)
    return Dataset(xs, ys)


# --- rate study ------------------------------------------------------------

L1_EMPIRICAL = "L1_empirical"
L1_DESIGN = "L1_designG"


def parse_metric(metric: str) -> float:
    """Exponent ``p`` of an error metric; ``L1_designG`` maps to ``-1``."""
    if metric == L1_EMPIRICAL:
        return 1.0
    if metric == L1_DESIGN:
        return -1.0
    if metric.startswith("Lp_empirical"):
        _, _, p = metric.partition(":")
        p = float(p or 2)
        if not 0 < p <= 2:
            raise ValueError("Lp_empirical exponent must lie in (0, 2]")
        return p
    raise ValueError(f"unknown error metric {metric!r}")


def _design_grid(measure, m=4096):
    x = (np.arange(m) + 0.5) / m
    if isinstance(measure, StepDensity):
        w = measure.densities[Partition(measure.knots).locate(x)] / m
    else:
        w = np.full(m, 1.0 / m)
    return x, w


def _lp_err(values, target, weights, p):
    s = np.sum(weights * np.abs(values - target) ** p, axis=-1)
    return s ** (1.0 / p) if p >= 1 else s


@dataclass(frozen=True)
class _RateTask:
    cfg: SimConfig
    prior: PriorSpec
    metric: str
    cell: int
    rep: int


def _resolve_prior(prior: PriorSpec, n: int) -> PriorSpec:
    ptype = prior.prior_type
    if isinstance(ptype, (Type1, Type2)) and ptype.J is None:
        ptype = Type1(default_J(n)) if isinstance(ptype, Type1) else Type2(default_J(n), ptype.candidates)
        return PriorSpec(ptype, prior.zeta, prior.lambda2, prior.sigma_mode, prior.lambda2_bounds)
    return prior


def _rate_task(task: _RateTask):
    cfg = task.cfg
    n = cfg.n_grid[task.cell]
    rng = task_rng(cfg.seed, task.cell, task.rep)
    data = generate(cfg, n, rng)
    f0 = make_truth(cfg.truths[0])
    p = parse_metric(task.metric)
    if p < 0:
        pts, wts = _design_grid(cfg.measure)
        p = 1.0
    else:
        pts, wts = data.xs, np.full(n, 1.0 / n)
    target = f0(pts)
    prior = _resolve_prior(task.prior, n)
    start = time.perf_counter()
    curves = np.empty((cfg.draws, pts.size))
    Js = []
    for batch in posterior_batches(data, prior, cfg.draws, rng):
        w = projection_weights(batch)
        proj = np.vstack([pava_l2(row, w) for row in batch.thetas])
        curves[batch.positions] = proj[:, batch.partition.locate(pts)]
        Js.extend([batch.partition.J] * batch.positions.size)
    mean_err = float(_lp_err(curves.mean(axis=0), target, wts, p))
    draw_err = float(np.median(_lp_err(curves, target, wts, p)))
    return mean_err, draw_err, float(np.mean(Js)), time.perf_counter() - start


@dataclass(frozen=True)
class RateReport:
    metric: str
    n_grid: Tuple[int, ...]
    median_error: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    median_draw_error: np.ndarray
    mean_J: np.ndarray
    slope: float
    slope_se: float
    runtime: np.ndarray

    def rows(self) -> List[dict]:
        return [
            {"n": n, "mean_J": float(j), "median_error": float(m), "q25": float(a),
             "q75": float(b), "median_draw_error": float(d)}
            for n, j, m, a, b, d in zip(self.n_grid, self.mean_J, self.median_error,
                                        self.q25, self.q75, self.median_draw_error)
        ]


def fit_loglog_slope(ns, errors) -> Tuple[float, float]:
    """Least-squares slope of ``log error`` on ``log n`` and its standard error."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if x.size < 3:
        raise ValueError("need at least 3 grid points to fit a slope")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    s2 = float(resid @ resid) / (x.size - 2)
    se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return float(slope), se


def run_rate_study(cfg: SimConfig, prior: Optional[PriorSpec] = None,
                   metric: str = L1_EMPIRICAL, threads: Optional[int] = None) -> RateReport:
    """Error of the projection-posterior mean curve along ``cfg.n_grid``.

    For each sample size and replication: generate data, draw the projection
    posterior, and record the error of the pointwise posterior-mean curve and
    the median of the per-draw errors. The slope is fitted to the per-n
    median of the mean-curve error.
    """
    if len(cfg.truths) != 1:
        raise ValueError("a rate study takes exactly one truth")
    ns = np.array(cfg.n_grid)
    if ns.size < 3 or ns.max() < 8 * ns.min():
        raise ValueError("n_grid needs at least 3 points spanning a factor of 8")
    parse_metric(metric)
    prior = prior if prior is not None else PriorSpec()
    tasks = [_RateTask(cfg, prior, metric, c, r) for c in range(ns.size) for r in range(cfg.reps)]
    res = np.array(run_tasks(_rate_task, tasks, threads)).reshape(ns.size, cfg.reps, 4)
    mean_err, draw_err = res[:, :, 0], res[:, :, 1]
    med = np.median(mean_err, axis=1)
    slope, se = fit_loglog_slope(ns, med)
    return RateReport(
        metric=metric,
        n_grid=tuple(int(n) for n in ns),
        median_error=med,
        q25=np.quantile(mean_err, 0.25, axis=1),
        q75=np.quantile(mean_err, 0.75, axis=1),
        median_draw_error=np.median(draw_err, axis=1),
        mean_J=res[:, :, 2].mean(axis=1),
        slope=slope,
        slope_se=se,
        runtime=res[:, :, 3].sum(axis=1),
    )


# --- power study -----------------------------------------------------------

@dataclass(frozen=True)
class _PowerTask:
    cfg: SimConfig
    prior: Optional[PriorSpec]
    test_cfg: TestConfig
    truth: int
    cell: int
    rep: int


def _power_task(task: _PowerTask) -> bool:
    cfg = task.cfg
    rng = task_rng(cfg.seed, task.truth, task.cell, task.rep)
    data = generate(cfg, cfg.n_grid[task.cell], rng, truth=cfg.truths[task.truth])
    return run_test(data, task.test_cfg, rng, task.prior).reject


def run_power_study(cfg: SimConfig, prior: Optional[PriorSpec], test_cfg: TestConfig,
                    threads: Optional[int] = None) -> List[dict]:
    """Rejection frequency of the test for every ``(truth, n)`` cell."""
    if cfg.reps < 50:
        raise ValueError("reps: a power study needs at least 50 replications")
    tasks = [_PowerTask(cfg, prior, test_cfg, t, c, r)
             for t in range(len(cfg.truths)) for c in range(len(cfg.n_grid))
             for r in range(cfg.reps)]
    rejects = np.array(run_tasks(_power_task, tasks, threads), dtype=float)
    rejects = rejects.reshape(len(cfg.truths), len(cfg.n_grid), cfg.reps)
    rows = []
    for t, truth in enumerate(cfg.truths):
        for c, n in enumerate(cfg.n_grid):
            rate = float(rejects[t, c].mean())
            rows.append({"truth": truth, "n": int(n), "mode": test_cfg.mode,
                         "rejection_rate": rate,
                         "mc_se": math.sqrt(rate * (1.0 - rate) / cfg.reps)})
    return rows


# --- alternatives at a prescribed distance from the cone --------------------

def l1_distance_to_cone(f0: Callable, measure: DesignMeasure = Uniform(), m: int = 1000) -> float:
    """L1 distance from ``f0`` to the monotone cone on a midpoint grid of ``m`` cells."""
    x, w = _design_grid(measure, m)
    v = f0(x)
    return float(np.dot(w, np.abs(v - isotonic_l1(v, w))))


@dataclass
class SinusoidFamily:
    """``x + c sin(2 pi k x)`` with ``c`` tuned so the L1 distance to the
    cone equals the requested separation. Callable as
    ``family(separation, n, rng) -> Dataset``."""

    sigma0: float = 0.5
    k: int = 1
    error_dist: str = "normal"
    design: str = "fixed"
    grid: int = 1000
    c_max: float = 100.0
    _cache: Dict[float, float] = field(default_factory=dict, repr=False)

    def _distance(self, c):
        return l1_distance_to_cone(Truth("sinusoid", (("c", c), ("k", float(self.k)))), m=self.grid)

    def amplitude(self, separation: float) -> float:
        if separation < 0:
            raise ValueError("separation must be nonnegative")
        if separation in self._cache:
            return self._cache[separation]
        c0 = 1.0 / (2.0 * math.pi * self.k)  # largest monotone amplitude
        if separation == 0:
            c = 0.0
        else:
            if self._distance(self.c_max) < separation:
                raise ValueError(f"separation {separation} unreachable with amplitude <= {self.c_max}")
            c = optimize.brentq(lambda a: self._distance(a) - separation, c0, self.c_max, xtol=1e-10)
        self._cache[separation] = c
        return c

    def truth(self, separation: float) -> Truth:
        return Truth("sinusoid", (("c", self.amplitude(separation)), ("k", float(self.k))))

    def __call__(self, separation: float, n: int, rng) -> Dataset:
        cfg = SimConfig(sigma0=self.sigma0, error_dist=self.error_dist, design=self.design)
        return generate(cfg, n, rng, truth=self.truth(separation))


# --- step approximation -----------------------------------------------------

def _integrate(fn, a, b, points=None):
    pts = [p for p in (points or []) if a < p < b]
    val, _ = integrate.quad(fn, a, b, points=pts or None, limit=200, epsabs=1e-14, epsrel=1e-13)
    return val


def _crossing(f0, level, a, b):
    """Point in ``(a, b)`` where monotone ``f0`` passes ``level``, if any."""
    fa, fb = float(f0(np.array(a))), float(f0(np.array(b)))
    if not fa < level < fb:
        return None
    lo, hi = a, b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(f0(np.array(mid))) < level:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def _piece_error(f0, density, a, b, level, p):
    kink = _crossing(f0, level, a, b)
    return density * _integrate(lambda t: abs(float(f0(np.array(t))) - level) ** p, a, b,
                                [kink] if kink is not None else None)


def _cells(measure, a, b):
    """Sub-intervals of ``[a, b]`` on which the density of ``measure`` is constant."""
    if isinstance(measure, StepDensity):
        inner = [k for k in measure.knots if a < k < b]
        edges = [a, *inner, b]
        part = Partition(measure.knots)
        return [(lo, hi, float(measure.densities[part.locate(0.5 * (lo + hi))]))
                for lo, hi in zip(edges[:-1], edges[1:])]
    return [(a, b, 1.0)]


def _step_error(f0, measure, knots, heights, p):
    total = 0.0
    for a, b, h in zip(knots[:-1], knots[1:], heights):
        for lo, hi, dens in _cells(measure, a, b):
            total += _piece_error(f0, dens, lo, hi, h, p)
    return total


def _bin_average(f0, measure, a, b):
    num = den = 0.0
    for lo, hi, dens in _cells(measure, a, b):
        num += dens * _integrate(lambda t: float(f0(np.array(t))), lo, hi)
        den += dens * (hi - lo)
    return num / den if den > 0 else 0.0, den


def _generalised_inverse(f0, level):
    """``inf {x in [0, 1] : f0(x) >= level}`` by bisection."""
    if float(f0(np.array(0.0))) >= level:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(f0(np.array(mid))) >= level:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-16:
            break
    return hi


def free_knot_approximation(f0: Callable, J: int):
    """Knots at level crossings of ``f0`` with ``J`` equal value bands; each
    bin takes the midpoint of its band. Returns ``(knots, heights)``."""
    lo, hi = float(f0(np.array(0.0))), float(f0(np.array(1.0)))
    if hi <= lo:
        return np.array([0.0, 1.0]), np.array([lo])
    levels = lo + (hi - lo) * np.arange(J + 1) / J
    raw = [0.0] + [_generalised_inverse(f0, t) for t in levels[1:-1]] + [1.0]
    knots, heights = [0.0], []
    for j in range(1, J + 1):
        if raw[j] > knots[-1]:
            # values on (knots[-1], raw[j]) lie in [levels[j-1], levels[j])
            heights.append(0.5 * (levels[j - 1] + levels[j]))
            knots.append(raw[j])
    if knots[-1] < 1.0:
        heights.append(0.5 * (levels[-2] + levels[-1]))
        knots.append(1.0)
    return np.array(knots), np.array(heights)


def approximation_check(f0: Callable, J_grid: Sequence[int], p: float = 1.0,
                        measure: DesignMeasure = Uniform(), K: Optional[float] = None) -> List[dict]:
    """Step-function approximation errors of a bounded monotone ``f0``.

    For each J reports ``int |f0 - f_J|^p dH`` for the equispaced bin-average
    approximation, checked against ``M K^p / J`` (``M = J max_j H(I_j)``), and
    for the level-crossing free-knot approximation, checked against
    ``K^p / J^p``. ``K`` defaults to ``sup |f0|``.
    """
    if p < 1:
        raise ValueError("approximation bounds are stated for p >= 1")
    grid = np.linspace(0.0, 1.0, 4001)
    vals = f0(grid)
    if np.any(np.diff(vals) < 0):
        raise ValueError("f0 must be monotone nondecreasing")
    if K is None:
        K = float(np.max(np.abs(vals)))
    rows = []
    for J in J_grid:
        part = equispaced_partition(J)
        averages, masses = zip(*(_bin_average(f0, measure, a, b)
                                 for a, b in zip(part.knots[:-1], part.knots[1:])))
        eq_err = _step_error(f0, measure, part.knots, averages, p)
        M = J * max(masses)
        knots, heights = free_knot_approximation(f0, J)
        fk_err = _step_error(f0, measure, knots, heights, p)
        bound_a = M * K**p / J
        bound_b = K**p / J**p
        rows.append({"J": int(J), "equispaced_error": eq_err, "bound_equispaced": bound_a,
                     "free_knot_error": fk_err, "bound_free_knot": bound_b,
                     "within_bounds": bool(eq_err <= bound_a + 1e-12 and fk_err <= bound_b + 1e-12)})
    return rows


def max_bin_fraction(n: int, J: Optional[int] = None) -> float:
    """``max_j N_j / n`` for the fixed grid design on equispaced bins."""
    xs = np.arange(1, n + 1) / (n + 1.0)
    J = default_J(n) if J is None else J
    stats = bin_stats(Dataset(xs, np.zeros(n)), equispaced_partition(J))
    return float(stats.counts.max() / n)
