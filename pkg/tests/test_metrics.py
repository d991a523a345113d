import math

import numpy as np
import pytest

from isoproj import (
    EmpiricalWeights,
    Partition,
    StepDensity,
    StepFunction,
    Uniform,
    distance_to_monotone,
    equispaced_partition,
    hellinger_distance,
    lp_distance,
    pava_l2,
)
from isoproj.isotonic import L1, L2
from isoproj.metrics import HELLINGER, bin_masses, cone_distances
from oracles import bhattacharyya_quadrature, isotonic_l2_enumeration

U = Uniform()


def const(c):
    return StepFunction(equispaced_partition(1), [c])


def random_step(gen, J=None):
    J = J or int(gen.integers(1, 7))
    inner = np.sort(gen.uniform(0.01, 0.99, size=J - 1))
    return StepFunction(Partition(np.r_[0, inner, 1]), gen.normal(size=J))


def random_measure(gen):
    kind = gen.integers(3)
    if kind == 0:
        return U
    part = random_step(gen, 4).partition
    w = gen.uniform(0.2, 2, size=4)
    if kind == 1:
        return StepDensity(part.knots, w / np.sum(w * part.lengths))
    return EmpiricalWeights(w, part)


class TestLp:
    def test_identity(self, rng):
        f = random_step(rng)
        assert float(lp_distance(f, f, U, 1)) == 0

    @pytest.mark.parametrize("p", [0.5, 1, 1.5, 2])
    def test_constant_gap(self, p):
        assert float(lp_distance(const(1), const(0), U, p)) == pytest.approx(1)

    def test_halves(self):
        f = StepFunction(equispaced_partition(2), [0, 2])
        assert float(lp_distance(f, const(0), U, 1)) == pytest.approx(1.0)

    def test_p_below_one_has_no_root(self):
        f = StepFunction(equispaced_partition(2), [0, 4])
        assert float(lp_distance(f, const(0), U, 0.5)) == pytest.approx(0.5 * 2)

    @pytest.mark.parametrize("p", [0, 2.5, -1])
    def test_invalid_p(self, p):
        with pytest.raises(ValueError):
            lp_distance(const(0), const(1), U, p)

    def test_design_density_weighting(self):
        mu = StepDensity([0, 0.5, 1], [1.5, 0.5])
        f = StepFunction(equispaced_partition(2), [1, 0])
        assert float(lp_distance(f, const(0), mu, 1)) == pytest.approx(0.75)

    def test_triangle_inequality(self, rng):
        for _ in range(200):
            f, g, h = (random_step(rng) for _ in range(3))
            mu = random_measure(rng)
            for p in (1, 2):
                assert float(lp_distance(f, h, mu, p)) <= float(lp_distance(f, g, mu, p)) + float(
                    lp_distance(g, h, mu, p)) + 1e-12
            if not isinstance(mu, EmpiricalWeights):
                s = 0.7
                assert float(hellinger_distance(f, h, s, s, mu)) <= float(
                    hellinger_distance(f, g, s, s, mu)) + float(hellinger_distance(g, h, s, s, mu)) + 1e-12

    def test_refinement_invariance(self, rng):
        for _ in range(100):
            f, h = random_step(rng), random_step(rng)
            mu = random_measure(rng)
            extra = np.sort(rng.uniform(size=5))
            knots = np.unique(np.r_[f.partition.knots, extra])
            fine = StepFunction(Partition(knots), f(0.5 * (knots[:-1] + knots[1:])))
            for p in (0.5, 1, 2):
                assert float(lp_distance(fine, h, mu, p)) == pytest.approx(
                    float(lp_distance(f, h, mu, p)), abs=1e-12)


class TestHellinger:
    def test_identical(self, rng):
        f = random_step(rng)
        assert float(hellinger_distance(f, f, 0.4, 0.4)) == 0

    def test_mean_shift(self):
        sigma = 0.3
        c = math.sqrt(8) * sigma
        value = float(hellinger_distance(const(0), const(c), sigma, sigma))
        assert value == pytest.approx(math.sqrt(1 - math.exp(-1)), abs=1e-12)
        quad = math.sqrt(1 - bhattacharyya_quadrature(0, c, sigma, sigma))
        assert value == pytest.approx(quad, abs=1e-8)
        assert value == pytest.approx(0.7951, abs=5e-5)

    def test_variance_ratio(self):
        value = float(hellinger_distance(const(0.2), const(0.2), 1.0, math.sqrt(3)))
        assert value == pytest.approx(math.sqrt(1 - math.sqrt(2 * math.sqrt(3) / 4)), abs=1e-12)
        quad = math.sqrt(1 - bhattacharyya_quadrature(0, 0, 1, math.sqrt(3)))
        assert value == pytest.approx(quad, abs=1e-8)
        assert value == pytest.approx(0.2634, abs=5e-5)

    def test_general_quadrature(self, rng):
        for _ in range(5):
            a, b = rng.normal(size=2)
            sf, sh = rng.uniform(0.3, 2, size=2)
            value = float(hellinger_distance(const(a), const(b), sf, sh))
            assert value**2 == pytest.approx(1 - bhattacharyya_quadrature(a, b, sf, sh), abs=1e-8)

    def test_bounded_by_l2(self, rng):
        for _ in range(200):
            f, h = random_step(rng), random_step(rng)
            s = float(rng.uniform(0.2, 2))
            h2 = float(hellinger_distance(f, h, s, s)) ** 2
            assert h2 <= float(lp_distance(f, h, U, 2)) ** 2 / (8 * s * s) + 1e-12

    def test_empirical_measure_rejected(self):
        mu = EmpiricalWeights([1, 1], equispaced_partition(2))
        with pytest.raises(ValueError):
            hellinger_distance(const(0), const(1), 1, 1, mu)


class TestDistanceToMonotone:
    @pytest.mark.parametrize("metric", [L1, L2, HELLINGER])
    def test_monotone_is_zero(self, metric):
        f = StepFunction(equispaced_partition(3), [0, 0, 2])
        assert float(distance_to_monotone(f, U, metric, sigma=1.0)) == 0

    @pytest.mark.parametrize("metric", [L1, L2])
    def test_two_bins(self, metric):
        f = StepFunction(equispaced_partition(2), [2, 1])
        assert float(distance_to_monotone(f, U, metric)) == pytest.approx(0.5)

    def test_l2_matches_enumeration(self):
        f = StepFunction(equispaced_partition(3), [1, 2, 0])
        w = np.full(3, 1 / 3)
        _, obj = isotonic_l2_enumeration(f.heights, w)
        assert float(distance_to_monotone(f, U, L2)) == pytest.approx(math.sqrt(obj), abs=1e-12)
        direct = math.sqrt(np.dot(w, (f.heights - pava_l2(f.heights, w)) ** 2))
        assert float(distance_to_monotone(f, U, L2)) == pytest.approx(direct, abs=1e-15)

    def test_zero_iff_monotone(self, rng):
        for _ in range(200):
            f = random_step(rng)
            d = float(distance_to_monotone(f, U, L1))
            assert (d == 0) == f.is_monotone

    def test_reverse_triangle(self, rng):
        for _ in range(200):
            f, f0 = random_step(rng), random_step(rng)
            gap = float(lp_distance(f, f0, U, 1))
            assert float(distance_to_monotone(f, U, L1)) >= float(distance_to_monotone(f0, U, L1)) - gap - 1e-12

    def test_cone_distances_vectorised(self, rng):
        thetas = rng.normal(size=(20, 4))
        masses = bin_masses(equispaced_partition(4), U)
        rows = cone_distances(thetas, masses, L1)
        for row, value in zip(thetas, rows):
            f = StepFunction(equispaced_partition(4), row)
            assert value == pytest.approx(float(distance_to_monotone(f, U, L1)))

    def test_hellinger_needs_sigma(self):
        f = StepFunction(equispaced_partition(2), [1, 0])
        with pytest.raises(ValueError):
            distance_to_monotone(f, U, HELLINGER)


class TestMeasures:
    def test_density_must_integrate(self):
        with pytest.raises(ValueError):
            StepDensity([0, 0.5, 1], [1, 2])

    def test_bounded_away_flag(self):
        with pytest.raises(ValueError):
            StepDensity([0, 0.5, 1], [2, 0], bounded_away=True)

    def test_bin_masses_cross_partition(self):
        mu = EmpiricalWeights([1, 3], equispaced_partition(2))
        np.testing.assert_allclose(bin_masses(equispaced_partition(4), mu), [0.125, 0.125, 0.375, 0.375])
