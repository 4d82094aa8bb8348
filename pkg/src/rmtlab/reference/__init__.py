"""Analytic oracles, computed without any Monte Carlo."""
from .airy import airy_derivative, airy_function, airy_kernel, airy_pair
from .catalan import catalan_moment, count_dyck_paths, semicircle_moment
from .curves import OracleError, QuadratureRule, ReferenceCurve
from .hermite import hermite_density, hermite_functions, hermite_kernel, pair_correlation, scaled_kernel
from .sine import (gap_density_fredholm, gap_distribution, gap_probability, gap_probability_series,
                   sine_det, sine_kernel, wigner_surmise, wigner_surmise_cdf)
from .tracy_widom import (tail_asymptotic, tracy_widom_cdf, tracy_widom_curve, tracy_widom_painleve,
                          tracy_widom_tail)
