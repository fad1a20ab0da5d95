import math

import numpy as np
import pytest
from scipy.integrate import quad

from chainsel import pdmp
from chainsel.errors import ConfigError, DomainError, SequencingError

SQRT2 = math.sqrt(2.0)


def test_control_rates():
    c = pdmp.theta0()
    z = np.array([0.3, 1.0, 50.0])
    th = c.theta(z)
    assert np.allclose(th, np.minimum(z, 1 / SQRT2))
    assert np.allclose(c.lam(z), th - th**2 / (2 * z))
    assert np.all(c.lam(z) <= c.lambda_bar)


def test_phi0_control_matches_mapping():
    c = pdmp.phi0_control()
    z = np.array([1.0, 2.0, 100.0])
    th = c.theta(z)
    a = np.minimum(SQRT2 / z, 1.0)
    assert np.allclose(th, z * a / (1 + np.sqrt(1 - a)))
    assert th[-1] == pytest.approx(0.7096246166694639, rel=1e-12)


def test_parse_control(coarse_grid):
    assert pdmp.parse_control("theta0").name == "theta0"
    assert pdmp.parse_control("gamma:0.25").theta(np.array([100.0]))[0] == pytest.approx(
        1 / SQRT2 + 0.0025)
    opt = pdmp.parse_control("optimal", coarse_grid)
    assert opt.theta(np.array([30.0]))[0] == pytest.approx(coarse_grid.theta_at(30.0))
    for bad in ("optimal", "psi", "gamma:?"):
        with pytest.raises(ConfigError):
            pdmp.parse_control(bad)


def test_jump_density_normalized():
    # (1 - y/z)/lambda(z) integrates to one over [0, theta(z)]
    c = pdmp.gamma_control(1 / 12)
    for z in (0.4, 3.0, 80.0):
        th = float(c.theta(np.array([z]))[0])
        lam = float(c.lam(np.array([z]))[0])
        mass, _ = quad(lambda y: (1 - y / z) / lam, 0, th)
        assert mass == pytest.approx(1.0, abs=1e-12)


def test_path_structure():
    p = pdmp.simulate_Z(pdmp.theta0(), 60.0, seed=3)
    assert p.n_jumps == p.jump_points.size == p.gap_sizes.size
    assert np.all(np.diff(p.jump_points) < 0)
    assert np.all(p.gap_sizes > 0)
    assert np.all(p.gap_sizes <= np.minimum(p.jump_points, 1 / SQRT2) + 1e-12)
    # gaps are disjoint: each jump lands above the next jump point
    landing = p.jump_points - p.gap_sizes
    assert np.all(landing[:-1] >= p.jump_points[1:])
    assert p.drift_length() == pytest.approx(60.0 - p.gap_sizes.sum())


def test_jump_counts_reproducible():
    c = pdmp.theta0()
    a = pdmp.jump_counts(c, 40.0, 300, seed=5, threads=1)
    b = pdmp.jump_counts(c, 40.0, 300, seed=5, threads=4)
    assert np.array_equal(a, b)
    assert a[7] == pdmp.simulate_Z(c, 40.0, seed=5, index=7).n_jumps


def test_python_control_path():
    f = pdmp.from_function(lambda z: min(z, 1 / SQRT2), 1 / SQRT2, name="copy")
    a = pdmp.monte_carlo_jumps(f, 20.0, 2000, seed=1)
    b = pdmp.monte_carlo_jumps(pdmp.theta0(), 20.0, 2000, seed=2)
    assert abs(a.mean - b.mean) < 4 * math.hypot(a.std_error, b.std_error)


def test_small_z_start():
    # from z0 below the first possible jump the path can still jump (theta = z)
    p = pdmp.simulate_Z(pdmp.theta0(), 0.0, seed=0)
    assert p.n_jumps == 0


def test_reward_matches_value(grid300):
    ctrl = pdmp.optimal_control(grid300)
    u = pdmp.solve_reward(ctrl, 1.0, 300.0, 1e-3)
    assert np.max(np.abs(u.values - grid300.u)) < 1e-9


def test_reward_linearity_and_constant():
    c = pdmp.theta0()
    u1 = pdmp.solve_reward(c, 1.0, 20.0, 1e-3)
    u3 = pdmp.solve_reward(c, 3.0, 20.0, 1e-3)
    assert np.allclose(u3.values, 3 * u1.values, rtol=1e-12, atol=1e-14)
    assert u1(20.0) == pytest.approx(u1.values[-1])
    with pytest.raises(DomainError):
        u1(25.0)


def test_reward_small_z_is_greedy_ein():
    # theta = z below 1/sqrt2 means every arrival is taken: u(z) = Ein(z^2)
    from chainsel.value import ein

    u = pdmp.solve_reward(pdmp.theta0(), 1.0, 10.0, 1e-3)
    assert u(0.7) == pytest.approx(ein(0.49), abs=1e-6)


def test_second_moment_sequencing():
    c = pdmp.theta0()
    with pytest.raises(SequencingError):
        pdmp.solve_second_moment(c, 20.0, 1e-3)
    u = pdmp.solve_reward(c, 1.0, 20.0, 2e-3)
    with pytest.raises(SequencingError):
        pdmp.solve_second_moment(c, 20.0, 1e-3, first=u)
    sm = pdmp.solve_second_moment(c, 20.0, 2e-3, first=u)
    assert np.all(sm.var >= -1e-12)
    assert sm.variance(20.0) == pytest.approx(sm.var[-1])


def test_bad_control_rejected():
    wide = pdmp.from_function(lambda z: 2 * z + 1, 10.0)
    with pytest.raises(DomainError):
        pdmp.solve_reward(wide, 1.0, 10.0, 1e-2)


def test_reward_grid_checks():
    with pytest.raises(DomainError):
        pdmp.solve_reward(pdmp.theta0(), 1.0, 10.0, 0.5)


def test_coverage_basic():
    est = pdmp.estimate_coverage(pdmp.theta0(), 60.0, 2.0, 2000, seed=4)
    assert est.grid[0] == 0.0 and est.grid[-1] == 60.0
    assert np.all((est.p_hat >= 0) & (est.p_hat <= 1))
    # the start point is always in the first drift interval
    assert est.p_hat[-1] == 1.0
    mid = (est.grid >= 12) & (est.grid <= 48)
    assert np.all(np.abs(est.p_hat[mid] - 0.5) < 0.06)
    assert est.p_limit is not None and est.p_limit.size == est.p_hat.size
    with pytest.raises(ConfigError):
        pdmp.estimate_coverage(pdmp.theta0(), 20.0, 1.0, 2000)
    with pytest.raises(ConfigError):
        pdmp.estimate_coverage(pdmp.theta0(), 60.0, 1.0, 500)


def test_same_law_pvalue():
    rng = np.random.default_rng(0)
    a = rng.poisson(20, 5000)
    b = rng.poisson(20, 5000)
    c = rng.poisson(21, 5000)
    assert pdmp.same_law_pvalue(a, b) > 0.01
    assert pdmp.same_law_pvalue(a, c) < 1e-6
    assert pdmp.same_law_pvalue([3] * 200, [3] * 200) == 1.0


def test_compare_requires_horizon():
    with pytest.raises(ConfigError):
        pdmp.compare_planar_pdmp("phi0", 50.0, 1000, seed=0)
