"""Exact line-search gradient descent and Akaike's rate-of-convergence analysis."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .akaike import (akaike_lower_bound, attracting_interval, jacobian_at_fixed_point,
                     limit_probability, roc_from_s, s_from_theta, sigma, sigma_inv,
                     t_map, theta_from_s, variance)
from .quadratic import (Spectrum, Trajectory, a_norm, constant_step_gd, els_gd_run,
                        gd_step, make_spectrum, optimal_constant_step,
                        reduce_multiplicities, shrink_factor, worst_case_roc, worst_seed)
from .quartic import QuarticPoly, els_gd_generic, line_restriction, minimize_quartic_nonneg
from .roc import (average_roc_monte_carlo, average_roc_quadrature_2d,
                  average_sq_roc_closed_form_2d, estimate_roc, limit_angle_histogram,
                  sample_unit_sphere)
