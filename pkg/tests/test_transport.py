import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from warpgof.empirical import make_sample
from warpgof.errors import DomainError, EmptyCollection, OracleTooLarge
from warpgof.transport import (barycenter_quantile, coupling_oracle_min, sorted_matching_w2,
                               variation2, wasserstein2_1d)


def qf(xs):
    return make_sample(xs).quantile_fn


def lp_w2(x, y):
    """Squared W2 between two empirical measures by solving the transport LP."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    n, m = x.size, y.size
    cost = ((x[:, None] - y[None, :]) ** 2).ravel()
    A = np.vstack([np.kron(np.eye(n), np.ones(m)), np.kron(np.ones(n), np.eye(m))])
    b = np.concatenate([np.full(n, 1 / n), np.full(m, 1 / m)])
    res = linprog(cost, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.fun


vals = st.floats(-100, 100, allow_nan=False)
small = st.lists(vals, min_size=1, max_size=7)


def scale_tol(*arrays):
    """1e-12 relative to the squared magnitude of the data."""
    return 1e-12 * max(1.0, max(float(np.max(np.abs(a))) for a in arrays) ** 2)


def test_w2_examples():
    assert wasserstein2_1d(qf([0, 2]), qf([1, 3])) == pytest.approx(1.0, abs=1e-15)
    assert wasserstein2_1d(qf([0, 2]), qf([0, 1, 3])) == pytest.approx(2 / 3, abs=1e-15)
    assert wasserstein2_1d(qf([0, 5, 1]), qf([1, 0, 5])) == 0.0


def test_barycenter_examples():
    b = barycenter_quantile([qf([0, 2]), qf([1, 3])])
    assert b.atoms.tolist() == [0.5, 2.5]
    np.testing.assert_allclose(b.weights, [0.5, 0.5])
    b = barycenter_quantile([qf([0]), qf([1]), qf([2])])
    assert b.atoms.tolist() == [1.0]
    q = qf([0, 1, 1, 4])
    b = barycenter_quantile([q, q, q])
    np.testing.assert_allclose(b.quantile(np.linspace(0.01, 1, 50)), q(np.linspace(0.01, 1, 50)))


def test_barycenter_empty():
    with pytest.raises(EmptyCollection):
        barycenter_quantile([])


def test_variation_examples():
    assert variation2([qf([0, 2]), qf([1, 3])]) == pytest.approx(0.25, abs=1e-15)
    assert variation2([qf([0]), qf([1]), qf([2])]) == pytest.approx(2 / 3, abs=1e-15)
    assert variation2([qf([3, 1])] * 3) == 0.0
    with pytest.raises(DomainError):
        variation2([qf([1.0])])


def test_oracle_examples():
    assert coupling_oracle_min([[0, 2], [1, 3]]) == pytest.approx(0.25, abs=1e-15)
    assert coupling_oracle_min([[0], [1], [2]]) == pytest.approx(2 / 3, abs=1e-15)
    assert coupling_oracle_min([[1, 4, 2]] * 3) == pytest.approx(0.0, abs=1e-15)


def test_oracle_limits():
    with pytest.raises(OracleTooLarge):
        coupling_oracle_min([np.arange(7.0)] * 2)
    with pytest.raises(DomainError):
        coupling_oracle_min([[0, 1], [2]])


@settings(max_examples=60)
@given(small, small)
def test_w2_matches_transport_lp(x, y):
    assert wasserstein2_1d(qf(x), qf(y)) == pytest.approx(lp_w2(x, y), rel=1e-7, abs=1e-7)


@given(st.integers(1, 5), st.integers(2, 3), st.data())
def test_variation_equals_oracle(n, J, data):
    arrays = [data.draw(st.lists(vals, min_size=n, max_size=n)) for _ in range(J)]
    got = variation2([qf(a) for a in arrays])
    assert got == pytest.approx(coupling_oracle_min(arrays), abs=scale_tol(*arrays))


@given(st.integers(1, 8), st.data())
def test_w2_equals_sorted_matching(n, data):
    x = data.draw(st.lists(vals, min_size=n, max_size=n))
    y = data.draw(st.lists(vals, min_size=n, max_size=n))
    assert wasserstein2_1d(qf(x), qf(y)) == pytest.approx(sorted_matching_w2(x, y), abs=scale_tol(x, y))


@given(small, small, small)
def test_w2_metric_properties(x, y, z):
    a, b, c = qf(x), qf(y), qf(z)
    assert wasserstein2_1d(a, b) == wasserstein2_1d(b, a)
    assert wasserstein2_1d(a, a) == 0.0
    d = lambda u, v: np.sqrt(wasserstein2_1d(u, v))  # noqa: E731
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


@given(small, small, vals)
def test_shift_covariance(x, y, c):
    a, b = qf(x), qf(y)
    base = wasserstein2_1d(a, b)
    shifted = wasserstein2_1d(a.shift(c), b.shift(c))
    assert shifted == pytest.approx(base, abs=scale_tol(x, y, [c]))


@given(st.lists(small, min_size=2, max_size=4), vals)
def test_barycenter_translation_equivariant(groups, c):
    qs = [qf(g) for g in groups]
    b0 = barycenter_quantile(qs).quantile
    b1 = barycenter_quantile([q.shift(c) for q in qs]).quantile
    t = np.linspace(0.005, 1.0, 97)
    np.testing.assert_allclose(b1(t), b0(t) + c, atol=1e-12 * max(1.0, abs(c), *(np.abs(g).max() for g in groups)))


def test_barycenter_minimizes_average_w2(rng):
    qs = [qf(rng.normal(size=k)) for k in (3, 5, 4)]
    bary = barycenter_quantile(qs).quantile
    v = np.mean([wasserstein2_1d(q, bary) for q in qs])
    assert v == pytest.approx(variation2(qs), abs=1e-14)
    for _ in range(20):
        other = qf(rng.normal(size=6))
        assert np.mean([wasserstein2_1d(q, other) for q in qs]) >= v
