import math
import warnings

import numpy as np
import pytest

from warpgof.bootstrap import BootstrapConfig
from warpgof.criterion import minimize_u_n
from warpgof.deformation import get_family
from warpgof.empirical import SampleSet
from warpgof.errors import DomainError, SigmaDegenerate, SigmaDegenerateWarning
from warpgof.synthetic import simulate_groups
from warpgof.testing import (ExperimentalWarning, TestReport, estimate_sigma, normal_quantile,
                             test_nonparametric_delta0, test_parametric_null, test_vn_normal)

LOC = get_family("location")
DELTA_BOUNDARY = 1 / 720  # inf U for quantiles t and t^2 under location warps, J = 2


def alignable(n=40, seed=0):
    x = np.random.default_rng(seed).normal(size=n)
    return SampleSet.from_arrays([x, x + 2.5])


def test_normal_quantile():
    assert normal_quantile(0.05) == pytest.approx(-1.6448536269514722, abs=1e-12)
    assert normal_quantile(0.5) == 0.0
    # lower tail via the Mills-ratio asymptotic series
    p = 1e-10
    x = -math.sqrt(2 * math.log(1 / p))
    for _ in range(50):
        tail = math.exp(-x * x / 2) / (-x * math.sqrt(2 * math.pi)) * (1 - 1 / x**2 + 3 / x**4)
        x -= (tail - p) / (math.exp(-x * x / 2) / math.sqrt(2 * math.pi))
    assert normal_quantile(p) == pytest.approx(x, rel=1e-3)
    with pytest.raises(DomainError):
        normal_quantile(1.0)


def test_null_test_alignable_data():
    for alpha in (0.01, 0.5, 0.99):
        rep = test_parametric_null(alignable(), LOC, alpha, BootstrapConfig(m_n=15, B=30, master_seed=2))
        assert rep.statistic == pytest.approx(0.0, abs=1e-10)
        assert not rep.reject
        assert rep.theta_hat[0][0] == pytest.approx(2.5, abs=1e-6)


def test_null_test_monotone_in_alpha():
    rng = np.random.default_rng(3)
    X = simulate_groups(LOC, [[0.0], [0.4]], 200, "uniform", rng, squared_groups=(1,))
    data = SampleSet.from_arrays(X)
    cfg = BootstrapConfig(B=60, master_seed=5)
    rejects = [test_parametric_null(data, LOC, a, cfg).reject for a in (0.01, 0.05, 0.2, 0.5, 0.9)]
    assert rejects == sorted(rejects)


def test_null_test_permutation_invariant():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(2, 60))
    cfg = BootstrapConfig(B=20, master_seed=1)
    a = test_parametric_null(SampleSet.from_arrays(X), LOC, 0.05, cfg)
    b = test_parametric_null(SampleSet.from_arrays([rng.permutation(x) for x in X]), LOC, 0.05, cfg)
    assert a.statistic == pytest.approx(b.statistic, abs=1e-8)


def test_delta0_alignable_rejects():
    rep = test_nonparametric_delta0(alignable(), LOC, 0.5, 0.05,
                                    BootstrapConfig(B=40, master_seed=1, mode="nonparametric"))
    assert rep.statistic < -2 and rep.reject
    with pytest.raises(DomainError):
        test_nonparametric_delta0(alignable(), LOC, 0.0)


def test_delta0_centering():
    data = SampleSet.from_arrays(np.random.default_rng(5).normal(size=(2, 50)))
    cfg = BootstrapConfig(B=10, master_seed=1, mode="nonparametric")
    first = test_nonparametric_delta0(data, LOC, 0.1, 0.05, cfg)
    rep = test_nonparametric_delta0(data, LOC, first.inf_u_n, 0.05, cfg)
    assert rep.statistic == 0.0


def test_reject_consistent_with_rule():
    data = SampleSet.from_arrays(np.random.default_rng(6).normal(size=(2, 80)))
    cfg = BootstrapConfig(B=40, master_seed=3, mode="nonparametric")
    r = test_nonparametric_delta0(data, LOC, 0.01, 0.05, cfg)
    assert r.reject == (r.statistic <= r.threshold)
    r = test_vn_normal(data, LOC, 0.01, 0.05, cfg)
    assert r.threshold == pytest.approx(-1.6448536269514722)
    assert r.reject == (r.statistic <= r.threshold)


def test_vn_far_below_rejects():
    rng = np.random.default_rng(7)
    data = SampleSet.from_arrays(rng.normal(size=(2, 200)))
    rep = test_vn_normal(data, LOC, 1.0, 0.05, BootstrapConfig(B=50, master_seed=1, mode="nonparametric"))
    assert rep.statistic < -10 and rep.reject and rep.sigma_hat > 0


def test_sigma_degenerate():
    const = SampleSet.from_arrays([[1.0] * 10, [4.0] * 10])
    cfg = BootstrapConfig(B=20, master_seed=1, mode="nonparametric")
    th = minimize_u_n(const, LOC).theta_hat
    assert estimate_sigma(const, LOC, th, cfg) == 0.0
    with pytest.raises(SigmaDegenerate):
        test_vn_normal(const, LOC, 0.1, 0.05, cfg)


def test_sigma_degenerate_warning():
    x = np.linspace(0, 1, 9)
    data = SampleSet.from_arrays([x, x])
    th = minimize_u_n(data, LOC).theta_hat
    with pytest.warns(SigmaDegenerateWarning):
        assert estimate_sigma(data, LOC, th, BootstrapConfig(m_n=1, B=5, mode="nonparametric")) == 0.0


def test_sigma_plugin_is_experimental():
    data = SampleSet.from_arrays(np.random.default_rng(8).normal(size=(2, 30)))
    th = minimize_u_n(data, LOC).theta_hat
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SigmaDegenerateWarning)
        with pytest.warns(ExperimentalWarning):
            s = estimate_sigma(data, LOC, th, strategy="plugin-L")
    assert s >= 0
    with pytest.raises(DomainError):
        estimate_sigma(data, LOC, th, strategy="jackknife")


def test_report_round_trip():
    rep = test_parametric_null(alignable(), LOC, 0.05, BootstrapConfig(m_n=10, B=5, master_seed=9))
    assert TestReport.from_dict(rep.to_dict()) == rep
    assert rep.test_kind == "parametric-null" and rep.seed == 9 and rep.B == 5


@pytest.mark.slow
@pytest.mark.parametrize("kind", [
    # sqrt(m)(inf U*_m - Delta0) carries an O(m^-1/2) upward bias; with m = ceil(n^0.45)
    # the measured boundary rate is 0.37 at n = 1000 and still 0.11 at n = 1e5
    pytest.param("delta0", marks=pytest.mark.xfail(
        strict=True, reason="finite-m bias of the Delta0-centred bootstrap; see decisions ledger")),
    "vn",
])
def test_boundary_level(kind):
    reps, rejects = 200, 0
    for r in range(reps):
        rng = np.random.default_rng(5000 + r)
        X = simulate_groups(LOC, [[0.0], [0.0]], 1000, "uniform", rng, squared_groups=(1,))
        data = SampleSet.from_arrays(X)
        cfg = BootstrapConfig(B=200, master_seed=r + 1, mode="nonparametric")
        fn = test_nonparametric_delta0 if kind == "delta0" else test_vn_normal
        rejects += fn(data, LOC, DELTA_BOUNDARY, 0.05, cfg).reject
    assert 0.025 <= rejects / reps <= 0.10


@pytest.mark.slow
def test_bootstrap_sigma_matches_monte_carlo_sd():
    n = 2000
    stat = []
    for r in range(300):
        X = simulate_groups(LOC, [[0.0], [0.0]], n, "uniform", np.random.default_rng(7000 + r),
                            squared_groups=(1,))
        stat.append(math.sqrt(n) * (minimize_u_n(SampleSet.from_arrays(X), LOC).value - DELTA_BOUNDARY))
    mc_sd = float(np.std(stat, ddof=1))
    sigmas = []
    for r in range(20):
        X = simulate_groups(LOC, [[0.0], [0.0]], n, "uniform", np.random.default_rng(7000 + r),
                            squared_groups=(1,))
        data = SampleSet.from_arrays(X)
        th = minimize_u_n(data, LOC).theta_hat
        sigmas.append(estimate_sigma(data, LOC, th, BootstrapConfig(B=200, master_seed=r + 1,
                                                                    mode="nonparametric")))
    assert abs(np.mean(sigmas) - mc_sd) <= 0.4 * mc_sd
