import math

import pytest

from chainsel import pdmp, value


def test_phi0_inverse_z_coefficient():
    # the square-root window mapped to a control: which 1/z coefficient does it carry?
    u = pdmp.solve_reward(pdmp.phi0_control(), 1.0, 300.0, 1e-3)
    fit = value.fit_remainder(u.z, u.values, (100.0, 300.0), drift_tol=1e-3)
    assert fit.d == pytest.approx(5 * math.sqrt(2) / 144, rel=0.02)
