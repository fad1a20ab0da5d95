"""Online selection of an increasing subsequence from a marked Poisson process.

Numerical solution of the optimality equation, planar and size-scale Monte
Carlo, moment equations and renewal diagnostics.
"""

from .value import ValueGrid, ein, solve_value, apply_I, expansion_residuals
from .strategies import AcceptanceWindow, window_width, phi_star, theta_from_phi, phi_from_theta
from .planar import simulate_selection, monte_carlo_length, simulate_fixed_n, stationary_limit_stat
from .pdmp import (ControlFunction, simulate_Z, solve_reward, solve_second_moment,
                   estimate_coverage, compare_planar_pdmp)
from .renewal import (CycleDistributions, sample_cycle, sample_H, renewal_count,
                      clt_statistic, dominance_check)
from .stats import SummaryStats, fit, ks_distance, summarize

__version__ = "0.1.0"
