"""Regression samples, interval partitions of [0, 1] and per-bin statistics."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for unreadable or invalid input data."""


@dataclass(frozen=True)
class Dataset:
    """Observed pairs ``(x_i, y_i)`` with every ``x_i`` in ``[0, 1]``."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).ravel()
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape != ys.shape:
            raise DataError(f"xs and ys differ in length ({xs.size} != {ys.size})")
        if xs.size == 0:
            raise DataError("empty dataset")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise DataError("non-finite values in dataset")
        if xs.min() < 0.0 or xs.max() > 1.0:
            raise DataError("x values must lie in [0, 1]")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return int(self.xs.size)


@dataclass(frozen=True)
class Partition:
    """Knots ``0 = xi_0 < xi_1 < ... < xi_J = 1``.

    Bins are left-closed and right-open, except the last one which also
    contains 1, so that every point of ``[0, 1]`` has exactly one bin.
    """

    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).ravel()
        if knots.size < 2:
            raise ValueError("a partition needs at least two knots")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("partition must start at 0 and end at 1")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def J(self) -> int:
        return int(self.knots.size - 1)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.knots)

    def locate(self, x) -> np.ndarray:
        """Bin index (0-based) of each point in ``x``."""
        idx = np.searchsorted(self.knots, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.J - 1)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash(self.knots.tobytes())


@dataclass(frozen=True)
class BinStats:
    """Counts, means and raw sums of the responses falling in each bin.

    ``means`` holds NaN for empty bins. ``sums`` and ``sumsq`` are kept so
    that the conjugate formulas never need the raw sample again.
    """

    counts: np.ndarray
    means: np.ndarray
    sums: np.ndarray
    sumsq: np.ndarray
    n: int
    partition: Partition = field(repr=False)

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def J(self) -> int:
        return int(self.counts.size)


def load_dataset(path) -> Dataset:
    """Read a CSV file with header ``x,y``.

    Extra columns are ignored with a warning. Errors name the offending line.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    xs, ys = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        if "x" not in header or "y" not in header:
            raise DataError(f"{path}: header must contain columns x,y")
        ix, iy = header.index("x"), header.index("y")
        extra = [h for h in header if h not in ("x", "y")]
        if extra:
            warnings.warn(f"{path}: ignoring extra columns {extra}", stacklevel=2)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                x = float(row[ix])
                y = float(row[iy])
            except (IndexError, ValueError):
                raise DataError(f"{path}: malformed row at line {lineno}: {row!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise DataError(f"{path}: non-finite value at line {lineno}")
            if not 0.0 <= x <= 1.0:
                raise DataError(f"{path}: x={x} outside [0, 1] at line {lineno}")
            xs.append(x)
            ys.append(y)
    if not xs:
        raise DataError(f"{path}: empty dataset")
    return Dataset(np.array(xs), np.array(ys))


def equispaced_partition(J: int) -> Partition:
    if int(J) != J or J < 1:
        raise ValueError(f"J must be a positive integer, got {J}")
    J = int(J)
    knots = np.arange(J + 1) / J
    return Partition(knots)


def sample_knots_from_design(xs, J: int, rng: np.random.Generator) -> Partition:
    """Draw ``J - 1`` interior knots uniformly without replacement.

    Knots come from the distinct design values strictly inside (0, 1), so
    every ``(J-1)``-subset of them is equally likely.
    """
    if int(J) != J or J < 1:
        raise ValueError(f"J must be a positive integer, got {J}")
    J = int(J)
    if J == 1:
        return Partition(np.array([0.0, 1.0]))
    candidates = np.unique(np.asarray(xs, dtype=float))
    candidates = candidates[(candidates > 0.0) & (candidates < 1.0)]
    if candidates.size < J - 1:
        raise ValueError(
            f"need {J - 1} distinct interior design values, found {candidates.size}"
        )
    chosen = np.sort(rng.choice(candidates, size=J - 1, replace=False))
    return Partition(np.concatenate(([0.0], chosen, [1.0])))


def bin_stats(data: Dataset, part: Partition) -> BinStats:
    idx = part.locate(data.xs)
    J = part.J
    counts = np.bincount(idx, minlength=J)
    sums = np.bincount(idx, weights=data.ys, minlength=J)
    sumsq = np.bincount(idx, weights=data.ys**2, minlength=J)
    means = np.full(J, np.nan)
    nz = counts > 0
    means[nz] = sums[nz] / counts[nz]
    return BinStats(counts=counts, means=means, sums=sums, sumsq=sumsq, n=data.n, partition=part)


def default_J(n: int) -> int:
    """``ceil(n^(1/3))``, guarded against floating error at perfect cubes."""
    j = math.ceil(n ** (1.0 / 3.0))
    while j > 1 and (j - 1) ** 3 >= n:
        j -= 1
    while j**3 < n:
        j += 1
    return j
