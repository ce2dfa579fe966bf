import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warpgof.bootstrap import (BootstrapConfig, BootstrapDistribution, Statistic,
                               bootstrap_quantile, bootstrap_statistic_distribution,
                               replicate_rng, resample_mn)
from warpgof.deformation import get_family
from warpgof.empirical import SampleSet
from warpgof.errors import BootstrapUnstable, DomainError
from warpgof.criterion import MinimizeOptions
from warpgof.inference import analytic_phi, simulate_limit_null
from warpgof.synthetic import simulate_groups

LOC = get_family("location")


def dist_of(values):
    v = np.sort(np.asarray(values, dtype=float))
    return BootstrapDistribution(v, Statistic(), 1, v)


def test_config_defaults():
    assert BootstrapConfig().resolve_m(1000) == math.ceil(1000**0.7) == 126
    assert BootstrapConfig(mode="nonparametric").resolve_m(1000) == math.ceil(1000**0.45)
    assert BootstrapConfig(m_n=10).resolve_m(50) == 10
    with pytest.raises(DomainError):
        BootstrapConfig(m_n=60).resolve_m(50)
    with pytest.raises(DomainError):
        BootstrapConfig(m_n=0)
    with pytest.raises(DomainError):
        BootstrapConfig(mode="wild")


def test_resample_trivial():
    data = SampleSet.from_arrays([[7.0] * 5, [3.0]])
    out = resample_mn(data, 5, np.random.default_rng(0))
    assert out[0].values.tolist() == [7.0] * 5
    assert out[1].values.tolist() == [3.0] * 5
    with pytest.raises(DomainError):
        resample_mn(data, 0, np.random.default_rng(0))


def test_resample_frequencies():
    n, m, reps = 10, 20, 4000
    data = SampleSet.from_arrays([np.arange(n, dtype=float), np.arange(n, dtype=float)])
    rng = np.random.default_rng(1)
    counts = np.zeros(n)
    for _ in range(reps):
        counts += np.bincount(resample_mn(data, m, rng)[0].values.astype(int), minlength=n)
    expect = reps * m / n
    se = math.sqrt(reps * m * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - expect) <= 4 * se)


def test_quantile_examples():
    assert bootstrap_quantile(dist_of(np.arange(1, 101)), 0.95) == 95
    assert bootstrap_quantile(dist_of([1, 2, 3]), 0.5) == 2
    for a in (0.01, 0.5, 0.99):
        assert bootstrap_quantile(dist_of([4.2] * 7), a) == 4.2
    with pytest.raises(DomainError):
        bootstrap_quantile(dist_of([1.0]), 1.0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50),
       st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_quantile_monotone(values, a, b):
    d = dist_of(values)
    lo, hi = sorted([a, b])
    assert bootstrap_quantile(d, lo) <= bootstrap_quantile(d, hi)


def test_identical_groups_give_zero():
    const = SampleSet.from_arrays([[2.0] * 8, [5.0] * 8])
    d = bootstrap_statistic_distribution(const, LOC, BootstrapConfig(m_n=4, B=15, master_seed=3))
    np.testing.assert_allclose(d.replicate_values, 0.0, atol=1e-12)


def test_single_replicate():
    data = SampleSet.from_arrays(np.random.default_rng(3).normal(size=(2, 40)))
    d = bootstrap_statistic_distribution(data, LOC, BootstrapConfig(m_n=10, B=1, master_seed=9))
    assert d.B == 1
    assert bootstrap_quantile(d, 0.3) == d.replicate_values[0]


def test_sorted_and_restated():
    data = SampleSet.from_arrays(np.random.default_rng(4).normal(size=(2, 40)))
    d = bootstrap_statistic_distribution(data, LOC, BootstrapConfig(m_n=12, B=30, master_seed=1))
    assert np.all(np.diff(d.replicate_values) >= 0)
    c = d.restate(Statistic("centered-root-inf", 0.1))
    np.testing.assert_allclose(c.replicate_values,
                               np.sort(math.sqrt(12) * (d.inf_values - 0.1)))


def test_deterministic_across_workers():
    data = SampleSet.from_arrays(np.random.default_rng(5).normal(size=(3, 60)))
    cfg = dict(m_n=20, B=40, master_seed=123)
    a = bootstrap_statistic_distribution(data, LOC, BootstrapConfig(**cfg, workers=1))
    b = bootstrap_statistic_distribution(data, LOC, BootstrapConfig(**cfg, workers=8))
    np.testing.assert_array_equal(a.replicate_values, b.replicate_values)
    c = bootstrap_statistic_distribution(data, LOC, BootstrapConfig(**cfg))
    np.testing.assert_array_equal(a.inf_values, c.inf_values)


def test_replicate_streams_independent_of_order():
    x = replicate_rng(42, 7).random(3)
    replicate_rng(42, 3).random(100)
    np.testing.assert_array_equal(x, replicate_rng(42, 7).random(3))
    assert not np.array_equal(x, replicate_rng(42, 8).random(3))


def test_unstable_bootstrap():
    data = SampleSet.from_arrays(np.random.default_rng(6).normal(size=(3, 40)))
    with pytest.raises(BootstrapUnstable):
        bootstrap_statistic_distribution(data, LOC, BootstrapConfig(m_n=20, B=10),
                                         options=MinimizeOptions(maxiter=2))


@pytest.mark.slow
def test_bootstrap_mean_tracks_limit():
    rng = np.random.default_rng(10)
    X = simulate_groups(LOC, [[0.0], [0.0]], 1000, "uniform", rng)
    d = bootstrap_statistic_distribution(SampleSet.from_arrays(X), LOC,
                                         BootstrapConfig(B=500, master_seed=10))
    one = lambda t: np.ones_like(t)  # noqa: E731
    lim = simulate_limit_null([one, one], one, [[0.5]], K=1024, n_draws=4000, rng=10)
    assert d.m_n == 126
    assert abs(d.replicate_values.mean() - lim.draws.mean()) <= 0.5 * lim.draws.mean()
