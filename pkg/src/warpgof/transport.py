"""Exact one-dimensional quadratic optimal transport.

On the real line the comonotone coupling is optimal for the quadratic cost, so
``W2^2`` is the squared L2 distance between quantile functions and the
barycenter is the measure whose quantile function is the average of the
inputs.  :func:`coupling_oracle_min` ignores both facts and enumerates
couplings, which makes it a useful independent check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .empirical import QuantileFn, Sample, merged_grid
from .errors import DomainError, EmptyCollection, OracleTooLarge

#: Largest number of permutation tuples :func:`coupling_oracle_min` will visit.
ORACLE_MAX_COUPLINGS = 5_000_000


@dataclass(frozen=True, eq=False)
class BarycenterQuantile:
    quantile: QuantileFn

    @property
    def atoms(self) -> np.ndarray:
        return self.quantile.levels

    @property
    def weights(self) -> np.ndarray:
        return self.quantile.widths


def _as_qf(q) -> QuantileFn:
    if isinstance(q, QuantileFn):
        return q
    if isinstance(q, Sample):
        return q.quantile_fn
    if isinstance(q, BarycenterQuantile):
        return q.quantile
    raise TypeError(f"expected a quantile function, got {type(q).__name__}")


def wasserstein2_1d(a, b) -> float:
    """Squared 2-Wasserstein distance between two quantile functions."""
    a, b = _as_qf(a), _as_qf(b)
    g = merged_grid([a, b])
    la, lb = g.levels([a, b])
    return float(np.dot(g.weights, (la - lb) ** 2))


def barycenter_quantile(qs) -> BarycenterQuantile:
    """Quantile function of the Wasserstein barycenter (pointwise average)."""
    qs = [_as_qf(q) for q in qs]
    if not qs:
        raise EmptyCollection("barycenter of an empty collection")
    g = merged_grid(qs)
    levels = g.levels(qs).mean(axis=0)
    # averaging sorted arrays can lose monotonicity by one ulp
    levels = np.maximum.accumulate(levels)
    return BarycenterQuantile(QuantileFn(g.breakpoints, levels))


def variation2(qs) -> float:
    """Squared Wasserstein 2-variation ``(1/J) sum_j W2^2(q_j, barycenter)``."""
    qs = [_as_qf(q) for q in qs]
    if len(qs) < 2:
        raise DomainError("the variation needs at least two measures")
    bary = barycenter_quantile(qs).quantile
    return float(np.mean([wasserstein2_1d(q, bary) for q in qs]))


def sorted_matching_w2(x, y) -> float:
    """``(1/n) sum (x_(i) - y_(i))^2`` for equal-size samples."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DomainError("sorted matching needs equal sizes")
    return float(np.mean((x - y) ** 2))


def coupling_oracle_min(samples, max_n: int = 6, max_groups: int = 4) -> float:
    """Brute-force multimarginal minimum over permutation couplings.

    Minimizes ``(1/n) sum_i T(x_{i,1}, x_{s2(i),2}, ..., x_{sJ(i),J})`` over
    all tuples of permutations, where ``T`` is the spread of its arguments
    around their arithmetic mean.
    """
    arrays = [np.asarray(s.values if isinstance(s, Sample) else s, dtype=float) for s in samples]
    J = len(arrays)
    if J < 2:
        raise DomainError("the oracle needs at least two samples")
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise DomainError("the oracle needs samples of equal size")
    if n > max_n or J > max_groups:
        raise OracleTooLarge(f"n={n}, J={J} exceeds limits n<={max_n}, J<={max_groups}")
    n_perm = math.factorial(n)
    if n_perm ** (J - 1) > ORACLE_MAX_COUPLINGS:
        raise OracleTooLarge(f"{n_perm ** (J - 1)} couplings exceed {ORACLE_MAX_COUPLINGS}")

    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    # rows[k, p, i] = value of sample k at position perms[p, i]
    rows = [a[perms] for a in arrays[1:]]
    first = arrays[0]
    best = math.inf
    for head in itertools.product(range(n_perm), repeat=J - 2):
        fixed = [first] + [rows[k][p] for k, p in enumerate(head)]
        fixed = np.vstack(fixed)  # (J-1, n)
        s1 = fixed.sum(axis=0) + rows[-1]  # (n_perm, n)
        s2 = (fixed ** 2).sum(axis=0) + rows[-1] ** 2
        # T = (1/J) sum y^2 - ybar^2
        t = s2 / J - (s1 / J) ** 2
        best = min(best, float(t.mean(axis=1).min()))
    return max(best, 0.0)
