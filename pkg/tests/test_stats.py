import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from chainsel import stats


def test_summarize_matches_numpy():
    rng = np.random.default_rng(1)
    x = rng.normal(3.0, 2.0, 5000)
    s = stats.summarize(x)
    assert s.reps == 5000
    assert s.mean == pytest.approx(x.mean(), rel=1e-13)
    assert s.variance == pytest.approx(x.var(ddof=1), rel=1e-12)
    assert s.std_error == pytest.approx(math.sqrt(x.var(ddof=1) / 5000), rel=1e-12)


def test_summarize_order_independent():
    x = np.array([1e16, 1.0, -1e16, 3.0, 2.5] * 40)
    a = stats.summarize(x)
    b = stats.summarize(x[::-1])
    assert a.mean == b.mean
    assert a.variance == b.variance


def test_summarize_empty():
    with pytest.raises(ValueError):
        stats.summarize([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60),
       st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60))
def test_merge_equals_pooled(a, b):
    whole = stats.summarize(a + b)
    merged = stats.summarize(a).merge(stats.summarize(b))
    assert merged.reps == whole.reps
    assert merged.mean == pytest.approx(whole.mean, rel=1e-9, abs=1e-6)
    assert merged.variance == pytest.approx(whole.variance, rel=1e-8, abs=1e-3)


def test_variance_std_error_normal():
    rng = np.random.default_rng(2)
    x = rng.normal(size=200_000)
    # for normal data Var(s^2) = 2 sigma^4 / (n - 1)
    assert stats.variance_std_error(x) == pytest.approx(math.sqrt(2 / 199_999), rel=0.03)


def test_fit_recovers_exact_coefficients():
    z = np.linspace(20, 300, 500)
    y = 1.5 * z - 0.25 * np.log(z) + 3.0 + 0.7 / z
    m = stats.fit(z, y, ("z", "log z", "1", "1/z"))
    assert np.allclose(m.coefficients, [1.5, -0.25, 3.0, 0.7], rtol=1e-9, atol=1e-9)
    assert m.residual_max < 1e-10
    assert m(np.array([50.0])) == pytest.approx(1.5 * 50 - 0.25 * math.log(50) + 3 + 0.7 / 50)


def test_fit_window_and_errors():
    z = np.linspace(1, 100, 100)
    with pytest.raises(stats.FitError):
        stats.fit(z, z, ("z",), (1, 5))
    with pytest.raises(stats.FitError):
        stats.fit(z, z, ("z", "z"))
    with pytest.raises(stats.FitError):
        stats.fit(z, z, ("sqrt z",))
    m = stats.fit(z, 2 * z, ("z",), (50, 100))
    assert m.window == (50.0, 100.0)
    assert m.coef("z") == pytest.approx(2.0)


def test_normal_cdf_values():
    assert stats.normal_cdf(0.0) == 0.5
    assert stats.normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-12)


def test_ks_distance_examples():
    rng = np.random.default_rng(3)
    assert stats.ks_distance(rng.normal(size=100_000)) < 0.006
    assert stats.ks_distance(np.zeros(1000)) >= 0.5
    shifted = stats.ks_distance(rng.normal(size=100_000) + 1.0)
    assert shifted == pytest.approx(sps.norm.cdf(0.5) - sps.norm.cdf(-0.5), abs=0.01)
    with pytest.raises(ValueError):
        stats.ks_distance(np.zeros(50))


def test_ks_distance_agrees_with_scipy():
    rng = np.random.default_rng(4)
    x = rng.standard_t(5, size=3000)
    assert stats.ks_distance(x) == pytest.approx(sps.kstest(x, "norm").statistic, abs=1e-12)
    ties = np.round(rng.normal(size=3000), 1)
    assert stats.ks_distance(ties) == pytest.approx(sps.kstest(ties, "norm").statistic, abs=1e-12)
