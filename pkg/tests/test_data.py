import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from isoproj import (
    DataError,
    Dataset,
    Partition,
    bin_stats,
    equispaced_partition,
    load_dataset,
    sample_knots_from_design,
)
from isoproj.data import default_J


class TestLoad:
    def test_two_rows(self, write_csv):
        data = load_dataset(write_csv([(0.1, 1.0), (0.6, 2.0)]))
        assert data.n == 2
        np.testing.assert_array_equal(data.xs, [0.1, 0.6])
        np.testing.assert_array_equal(data.ys, [1.0, 2.0])

    def test_empty(self, write_csv):
        with pytest.raises(DataError, match="empty dataset"):
            load_dataset(write_csv([]))

    def test_out_of_range_names_line(self, write_csv):
        with pytest.raises(DataError, match="line 2"):
            load_dataset(write_csv([(1.5, 0.0)]))

    def test_malformed_row(self, write_csv):
        with pytest.raises(DataError, match="line 3"):
            load_dataset(write_csv([(0.1, 1), ("abc", 2)]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="nope.csv"):
            load_dataset(tmp_path / "nope.csv")

    def test_extra_columns_warn(self, write_csv):
        path = write_csv([(0.2, 1, "a"), (0.4, 2, "b")], header="x,y,label")
        with pytest.warns(UserWarning, match="label"):
            data = load_dataset(path)
        assert data.n == 2

    def test_bad_header(self, write_csv):
        with pytest.raises(DataError, match="header"):
            load_dataset(write_csv([(0.1, 1)], header="a,b"))


class TestPartition:
    @pytest.mark.parametrize("J,knots", [(1, [0, 1]), (2, [0, 0.5, 1]), (4, [0, 0.25, 0.5, 0.75, 1])])
    def test_equispaced(self, J, knots):
        np.testing.assert_array_equal(equispaced_partition(J).knots, knots)

    def test_invalid_J(self):
        with pytest.raises(ValueError):
            equispaced_partition(0)

    def test_invalid_knots(self):
        with pytest.raises(ValueError):
            Partition(np.array([0, 0.6, 0.4, 1]))

    def test_left_closed_bins(self):
        part = equispaced_partition(2)
        np.testing.assert_array_equal(part.locate([0, 0.5, 1.0]), [0, 1, 1])

    def test_default_J_perfect_cubes(self):
        assert [default_J(n) for n in (1, 8, 9, 27, 28, 1000, 1001)] == [1, 2, 3, 3, 4, 10, 11]


class TestKnotSampler:
    def test_single_bin(self, rng):
        np.testing.assert_array_equal(sample_knots_from_design([0.2, 0.9], 1, rng).knots, [0, 1])

    def test_too_few_values(self, rng):
        with pytest.raises(ValueError):
            sample_knots_from_design([0.3], 3, rng)

    def test_ties_collapsed(self, rng):
        for _ in range(50):
            part = sample_knots_from_design([0.3, 0.3, 0.3, 0.7], 3, rng)
            np.testing.assert_array_equal(part.knots, [0, 0.3, 0.7, 1])

    def test_three_values_chi_square(self, rng):
        draws = [sample_knots_from_design([0.2, 0.5, 0.8], 2, rng).knots[1] for _ in range(3000)]
        counts = Counter(draws)
        assert set(counts) == {0.2, 0.5, 0.8}
        assert stats.chisquare([counts[0.2], counts[0.5], counts[0.8]]).pvalue > 1e-3

    @pytest.mark.parametrize("distinct,interior", [(4, 2), (5, 3), (6, 3), (6, 1)])
    def test_uniform_subset_law(self, rng, distinct, interior):
        xs = np.linspace(0.1, 0.9, distinct)
        subsets = list(itertools.combinations(xs, interior))
        counts = Counter(
            tuple(sample_knots_from_design(xs, interior + 1, rng).knots[1:-1]) for _ in range(200 * len(subsets))
        )
        assert set(counts) == set(subsets)
        assert stats.chisquare([counts[s] for s in subsets]).pvalue > 1e-3


class TestBinStats:
    def test_two_bins(self):
        s = bin_stats(Dataset([0.1, 0.6], [1, 3]), equispaced_partition(2))
        np.testing.assert_array_equal(s.counts, [1, 1])
        np.testing.assert_array_equal(s.means, [1, 3])

    def test_empty_bin_mean_undefined(self):
        s = bin_stats(Dataset([0.1, 0.2, 0.3], [1, 2, 3]), equispaced_partition(3))
        np.testing.assert_array_equal(s.counts, [3, 0, 0])
        assert math.isnan(s.means[1])

    def test_hand_count(self):
        s = bin_stats(Dataset([0.25, 0.25, 0.75], [1, 3, 5]), equispaced_partition(2))
        np.testing.assert_array_equal(s.counts, [2, 1])
        np.testing.assert_array_equal(s.means, [2, 5])
        # cross-check by a plain scan
        scan = [sum(1 for x in (0.25, 0.25, 0.75) if lo <= x < hi) for lo, hi in ((0, 0.5), (0.5, 1))]
        assert scan == [2, 1]

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.integers(1, 12))
    def test_counts_sum_to_n(self, xs, J):
        data = Dataset(xs, np.zeros(len(xs)))
        s = bin_stats(data, equispaced_partition(J))
        assert s.counts.sum() == data.n
        idx = equispaced_partition(J).locate(xs)
        assert np.all((idx >= 0) & (idx < J))

    @pytest.mark.parametrize("J", [5, 10, 20])
    def test_counts_of_order_n_over_J(self, J):
        n = math.ceil(20 * J * math.log(J + 1))
        ok = 0
        for seed in range(200):
            gen = np.random.default_rng(seed)
            counts = bin_stats(Dataset(gen.uniform(size=n), np.zeros(n)), equispaced_partition(J)).counts
            ok += n / (2 * J) <= counts.min() and counts.max() <= 2 * n / J
        assert ok >= 190


class TestDatasetValidation:
    def test_length_mismatch(self):
        with pytest.raises(DataError):
            Dataset([0.1, 0.2], [1])

    def test_out_of_range(self):
        with pytest.raises(DataError):
            Dataset([-0.1], [1])
