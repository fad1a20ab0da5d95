import math

import numpy as np
import pytest
from scipy import stats as sps
from scipy.integrate import quad

from chainsel import pdmp, renewal
from chainsel.errors import DomainError

SQRT2 = math.sqrt(2.0)


def test_constants():
    assert renewal.MU == pytest.approx(1 / SQRT2)
    assert renewal.SIGMA2 == pytest.approx(1 / 6)
    assert renewal.CLT_SCALE == pytest.approx(2**0.75 / math.sqrt(6))


def test_hazard_against_quadrature():
    c = pdmp.gamma_control(0.25)
    cd = renewal.CycleDistributions(c, 30.0)
    for y in (0.01, 0.5, 1.234, 7.9, 29.99):
        ref, _ = quad(lambda s: 4 * float(c.lam(np.array([s]))[0]), 30.0 - y, 30.0,
                      epsabs=1e-13, epsrel=1e-13, limit=200)
        assert cd.hazard(y) == pytest.approx(ref, abs=1e-8)
    assert cd.survival(0.0) == 1.0


def test_drift_inversion():
    cd = renewal.CycleDistributions(pdmp.theta0(), 50.0)
    d = cd.sample_drift(2000, np.random.default_rng(0))
    assert np.all((d >= 0) & (d <= 50.0))
    # the integrated hazard of a drift length is Exp(1)
    e = cd.hazard(d)
    assert sps.kstest(e[d < 50.0], "expon").pvalue > 0.001


def test_gap_law_quadrature():
    c = pdmp.theta0()
    cd = renewal.CycleDistributions(c, 40.0)
    right = np.full(20_000, 25.0)
    j = cd.sample_gap(right, np.random.default_rng(1))
    th = 1 / SQRT2
    lam = th - th * th / 50.0
    mean, _ = quad(lambda y: y * (1 - y / 25.0) / lam, 0, th)
    assert j.mean() == pytest.approx(mean, abs=4 * j.std() / math.sqrt(j.size))
    assert np.all((j > 0) & (j <= th))
    # a cycle that drifts all the way down has no gap
    assert cd.sample_gap(np.zeros(3), np.random.default_rng(2)).tolist() == [0.0, 0.0, 0.0]


def test_cycles_converge_to_H():
    cd = renewal.CycleDistributions(pdmp.theta0(), 500.0)
    d, j = renewal.sample_cycles(cd, 20_000, seed=3)
    H = renewal.sample_H(4, 20_000)
    assert sps.ks_2samp(d + j, H).pvalue > 0.01


def test_sample_cycle_matches_batch_stream():
    cd = renewal.CycleDistributions(pdmp.theta0(), 100.0)
    one = renewal.sample_cycle(cd, seed=8)
    d, j = renewal.sample_cycles(cd, 1, seed=8)
    assert one == (float(d[0]), float(j[0]))


def test_sample_H_scalar_and_moments():
    assert isinstance(renewal.sample_H(0), float)
    H = renewal.sample_H(5, 200_000)
    assert H.mean() == pytest.approx(1 / SQRT2, abs=0.005)
    assert H.var() == pytest.approx(1 / 6, abs=0.005)


def test_renewal_count_definition():
    # a direct partial-sum count with the same stream
    from chainsel.rng import stream

    z = 50.0
    n = renewal.renewal_count(z, seed=6, index=2)
    assert n > 0
    counts = renewal.renewal_counts(z, 100, seed=6)
    assert counts[2] == n
    assert renewal.renewal_count(0.0, seed=1) == 0
    with pytest.raises(DomainError):
        renewal.renewal_count(-1.0, seed=1)


def test_renewal_scaling_monotone():
    # shared streams: larger steps can only reduce the count
    a = renewal.renewal_counts(200.0, 500, seed=9, scale=1.0)
    b = renewal.renewal_counts(200.0, 500, seed=9, scale=1.1)
    assert np.all(b <= a)


def test_clt_statistic():
    with pytest.raises(DomainError):
        renewal.clt_statistic([1, 2, 3], 50.0)
    z = 400.0
    stat = renewal.clt_statistic([z * SQRT2], z)
    assert stat[0] == pytest.approx(0.0, abs=1e-12)
    rep = renewal.clt_report(renewal.renewal_counts(z, 2000, seed=2), z)
    assert set(rep) >= {"ks_distance", "mean", "variance", "reps"}
    assert rep["variance"] == pytest.approx(1.0, rel=0.15)


def test_truncation_level():
    assert renewal.truncation_level(400.0) == 100.0


def test_envelope_constant():
    c = renewal.envelope_constant(pdmp.theta0(), 10.0)
    # theta0 is exactly 1/sqrt2 there, lambda = (1 - 1/(2 sqrt2 z)) / sqrt2
    assert c == pytest.approx(1 / (2 * SQRT2), rel=1e-6)
    with pytest.raises(DomainError):
        renewal.envelope_constant(pdmp.gamma_control(5.0), 2.0)


def test_dominance_small():
    rep = renewal.dominance_check(pdmp.theta0(), 20.0, 200.0, reps=20_000, seed=1)
    assert rep.passed
    d = rep.to_dict()
    assert d["n_points"] == 99 and d["passed"]
    with pytest.raises(DomainError):
        renewal.dominance_check(pdmp.theta0(), 50.0, 20.0)


def test_cycle_domain():
    with pytest.raises(DomainError):
        renewal.CycleDistributions(pdmp.theta0(), 0.0)
