"""m-out-of-n bootstrap of the minimal Wasserstein variation.

Each replicate resamples ``m_n`` points with replacement from every group,
minimizes ``U`` on the resample and keeps ``inf U*_{m_n}``.  Replicate ``r``
draws from ``SeedSequence(master_seed, spawn_key=(r,))`` so results do not
depend on how replicates are spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .criterion import MinimizeOptions, minimize_u_n
from .deformation import DeformationFamily, ThetaVector
from .empirical import QuantileFn, Sample, SampleSet
from .errors import BootstrapUnstable, DomainError

MODES = ("parametric-null", "nonparametric")
#: Fraction of non-converged replicates tolerated before giving up.
MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class BootstrapConfig:
    """``m_n=None`` applies the mode's growth rule: ``ceil(n^0.7)`` for the
    parametric null, ``ceil(n^0.45)`` for the nonparametric tests."""

    m_n: int | None = None
    B: int = 500
    master_seed: int = 0
    mode: str = "parametric-null"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.B < 1:
            raise DomainError("B must be >= 1")
        if self.m_n is not None and self.m_n < 1:
            raise DomainError("m_n must be >= 1")

    def resolve_m(self, n: int) -> int:
        if self.m_n is not None:
            if self.m_n > n:
                raise DomainError(f"m_n={self.m_n} exceeds n={n}")
            return int(self.m_n)
        rate = 0.7 if self.mode == "parametric-null" else 0.45
        return max(1, min(n, math.ceil(n**rate)))


@dataclass(frozen=True)
class Statistic:
    """``scaled-inf``: ``m inf U*``; ``centered-root-inf``: ``sqrt(m) (inf U* - center)``."""

    kind: str = "scaled-inf"
    center: float = 0.0

    def apply(self, inf_values: np.ndarray, m: int) -> np.ndarray:
        if self.kind == "scaled-inf":
            return m * inf_values
        if self.kind == "centered-root-inf":
            return math.sqrt(m) * (inf_values - self.center)
        raise DomainError(f"unknown bootstrap statistic {self.kind!r}")


@dataclass(frozen=True, eq=False)
class BootstrapDistribution:
    replicate_values: np.ndarray
    statistic: Statistic
    m_n: int
    inf_values: np.ndarray
    failures: int = 0

    @property
    def B(self) -> int:
        return int(self.replicate_values.size)

    def restate(self, statistic: Statistic) -> "BootstrapDistribution":
        """Same replicates under a different scaling/centering."""
        vals = np.sort(statistic.apply(self.inf_values, self.m_n))
        return replace(self, replicate_values=vals, statistic=statistic)


def replicate_rng(master_seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(r),)))


def resample_mn(data: SampleSet, m_n: int, rng: np.random.Generator) -> SampleSet:
    """Independent with-replacement draws of size ``m_n`` from each group."""
    if m_n < 1:
        raise DomainError("m_n must be >= 1")
    out = []
    for s in data.samples:
        idx = np.sort(rng.integers(0, s.n, size=m_n))
        out.append(Sample(s.values[idx]))
    return SampleSet(tuple(out))


def bootstrap_inf_values(data: SampleSet, fam: DeformationFamily, config: BootstrapConfig,
                         theta0: ThetaVector | None = None,
                         options: MinimizeOptions | None = None):
    """Unscaled ``inf U*_{m_n}`` per replicate, in replicate order, plus failure count."""
    m = config.resolve_m(min(data.sizes))
    options = replace(options or MinimizeOptions(), workers=1)

    def one(r):
        res = minimize_u_n(resample_mn(data, m, replicate_rng(config.master_seed, r)),
                           fam, theta0, options=options)
        return res.value, res.converged

    if config.workers > 1 and config.B > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            results = list(ex.map(one, range(config.B)))
    else:
        results = [one(r) for r in range(config.B)]
    values = np.array([v for v, _ in results])
    failures = sum(1 for _, ok in results if not ok)
    return m, values, failures


def bootstrap_statistic_distribution(data: SampleSet, fam: DeformationFamily,
                                     config: BootstrapConfig,
                                     statistic: Statistic = Statistic(),
                                     theta0: ThetaVector | None = None,
                                     options: MinimizeOptions | None = None
                                     ) -> BootstrapDistribution:
    m, values, failures = bootstrap_inf_values(data, fam, config, theta0, options)
    if failures > MAX_FAILURE_RATE * config.B:
        raise BootstrapUnstable(f"{failures} of {config.B} bootstrap minimizations did not converge")
    reps = np.sort(statistic.apply(values, m))
    return BootstrapDistribution(reps, statistic, m, values, failures)


def bootstrap_quantile(dist: BootstrapDistribution, alpha: float) -> float:
    """Order statistic of rank ``ceil(B alpha)`` of the replicate values."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha!r} outside (0, 1)")
    return float(QuantileFn.from_sorted(dist.replicate_values)(alpha))
