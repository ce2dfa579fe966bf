"""Samples, empirical quantile functions and merged integration grids.

Every empirical quantile function here is the left-continuous generalized
inverse ``F_n^{-1}(t) = x_(ceil(n t))``.  It is piecewise constant on the
intervals ``((k-1)/n, k/n]``, so integrals over ``(0, 1)`` reduce to exact
weighted sums over order statistics.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, EmptySample, NonFiniteValue


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuantileFn:
    """Piecewise-constant quantile function.

    ``F^{-1}(t) = levels[k]`` for ``t`` in ``(breakpoints[k-1], breakpoints[k]]``
    with ``breakpoints[-1] := 0``.  The last breakpoint is 1.
    """

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = _frozen(self.breakpoints)
        lv = _frozen(self.levels)
        if bp.ndim != 1 or bp.shape != lv.shape or bp.size == 0:
            raise DomainError("breakpoints and levels must be 1-d arrays of equal, positive length")
        if not np.all(np.isfinite(lv)):
            raise NonFiniteValue("quantile levels must be finite")
        if bp[0] <= 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must increase strictly in (0, 1] and end at 1")
        if np.any(np.diff(lv) < 0):
            raise DomainError("quantile levels must be non-decreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def from_sorted(cls, values) -> "QuantileFn":
        values = np.asarray(values, dtype=float)
        n = values.size
        return cls(np.arange(1, n + 1) / n, values)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints, prepend=0.0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t <= 0) | (t > 1)):
            raise DomainError("quantile level t must lie in (0, 1]")
        idx = np.searchsorted(self.breakpoints, t, side="left")
        return self.levels[idx]

    def mean(self) -> float:
        return float(np.dot(self.widths, self.levels))

    def shift(self, c: float) -> "QuantileFn":
        return QuantileFn(self.breakpoints, self.levels + c)

    def __repr__(self):
        return f"QuantileFn(k={self.levels.size})"


@dataclass(frozen=True, eq=False)
class Sample:
    """Sorted, finite, non-empty sample."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1 or v.size == 0:
            raise EmptySample("a sample needs at least one observation")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("sample contains NaN or infinite values")
        if np.any(np.diff(v) < 0):
            raise DomainError("sample values must be sorted ascending; use make_sample")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @cached_property
    def quantile_fn(self) -> QuantileFn:
        return QuantileFn.from_sorted(self.values)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Sample(n={self.n})"


def make_sample(raw) -> Sample:
    """Build a :class:`Sample` from unsorted raw observations."""
    arr = np.asarray(raw, dtype=float).ravel()
    if arr.size == 0:
        raise EmptySample("empty input")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("input contains NaN or infinite values")
    return Sample(np.sort(arr, kind="stable"))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """The ``J >= 2`` groups of observations of the deformation model."""

    samples: tuple

    def __post_init__(self):
        samples = tuple(s if isinstance(s, Sample) else make_sample(s) for s in self.samples)
        if len(samples) < 2:
            raise DomainError("a SampleSet needs at least two groups")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_arrays(cls, arrays: Sequence) -> "SampleSet":
        return cls(tuple(make_sample(a) for a in arrays))

    @property
    def J(self) -> int:
        return len(self.samples)

    @property
    def sizes(self) -> tuple:
        return tuple(s.n for s in self.samples)

    @property
    def equal_sizes(self) -> bool:
        return len(set(self.sizes)) == 1

    def matrix(self) -> np.ndarray:
        """``(J, n)`` array of order statistics; equal sizes only."""
        if not self.equal_sizes:
            raise DomainError("groups have unequal sizes")
        return np.vstack([s.values for s in self.samples])

    @cached_property
    def grid(self) -> "MergedGrid":
        return merged_grid([s.quantile_fn for s in self.samples])

    def quantile_fns(self) -> list:
        return [s.quantile_fn for s in self.samples]

    def __getitem__(self, j):
        return self.samples[j]

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return self.J


def quantile_at(s: Sample, t: float) -> float:
    """Order statistic at rank ``ceil(n t)``."""
    if not 0.0 < t <= 1.0:
        raise DomainError(f"t={t!r} outside (0, 1]")
    return float(s.quantile_fn(t))


@dataclass(frozen=True, eq=False)
class MergedGrid:
    """Common refinement of several quantile-function partitions.

    ``weights[s]`` is the length of segment ``s`` and ``index[j, s]`` the
    position in function ``j``'s level array that is active on it.
    """

    breakpoints: np.ndarray
    weights: np.ndarray
    index: np.ndarray

    def levels(self, qs) -> np.ndarray:
        return np.vstack([q.levels[self.index[j]] for j, q in enumerate(qs)])


def merged_grid(qs) -> MergedGrid:
    qs = list(qs)
    if not qs:
        raise DomainError("need at least one quantile function")
    bps = np.unique(np.concatenate([q.breakpoints for q in qs]))
    index = np.vstack([np.searchsorted(q.breakpoints, bps, side="left") for q in qs])
    weights = np.diff(bps, prepend=0.0)
    return MergedGrid(bps, weights, index)


def merged_quantile_grid(a: QuantileFn, b: QuantileFn) -> np.ndarray:
    """Rows ``(segment length, level_a, level_b)`` on the common refinement."""
    g = merged_grid([a, b])
    la, lb = g.levels([a, b])
    return np.column_stack([g.weights, la, lb])
