"""Strict-saddle escape toolkit: benchmark objectives, the curvature
conditioned gradient method, closed-form rate bounds, and trajectory
diagnostics."""

from .bounds import (BoundSet, GlobalRateInputs, compute_bound_set,
                     epsilon_upper_bound, exit_time_bound, expansion_constants,
                     global_rate_bounds, no_return_thresholds,
                     projection_thresholds, shell_time_bound,
                     trajectory_function_lower_bound)
from .diagnostics import (InvariantReport, PhaseReport, detect_phases,
                          linearization_error, verify_invariants)
from .errors import (DegenerateHessianError, EstimationError, GroupingError,
                     InputError, NotDescentDirectionError, NumericError,
                     RegimeError)
from .optimizer import (OptimizerConfig, TrajectoryRecord, ccrgd_run,
                        curvature_statistics, gd_run, init_near_saddle,
                        second_order_step)
from .problem import (ObjectiveProblem, SmoothnessConstants, estimate_constants,
                      estimate_gamma, evaluate, finite_difference_check,
                      make_matrix_factorization, make_quadratic, make_rastrigin)
from .spectral import (ProjectionCoefficients, SaddleAnalysis, analyze_saddle,
                       directional_hessian_derivative,
                       empirical_expansion_factor, linearized_trajectory,
                       perturbation_projection, projection_coefficients)

__version__ = "0.1.0"
