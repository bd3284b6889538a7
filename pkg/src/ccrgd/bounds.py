"""Closed-form theory: admissible radii, exit/sojourn time bounds, projection
thresholds, the trajectory lower-bound function, no-return thresholds, and
the global rate formulas.

All operations are deterministic pure functions of their numeric inputs.
Every formula is evaluated exactly as displayed; approximate relations are
surfaced as exact evaluations plus an explicit slack where cross-checked.
Conventions used throughout (step size 1/L):

    c_sup = 2 + eps*M/(2L)          largest unstable propagation coefficient
    c_inf = 1 + beta/L - eps*M/(2L) smallest unstable propagation coefficient
    c_s   = 1 - beta/L + eps*M/(2L) largest stable propagation coefficient
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

from .errors import InputError, RegimeError
from .problem import SmoothnessConstants

__all__ = [
    "BoundSet",
    "GlobalRateInputs",
    "epsilon_upper_bound",
    "exit_time_bound",
    "projection_thresholds",
    "expansion_constants",
    "shell_time_bound",
    "no_return_thresholds",
    "trajectory_function_lower_bound",
    "global_rate_bounds",
    "compute_bound_set",
]


def _coeffs(eps: float, c: SmoothnessConstants):
    c_sup = 2 + eps * c.M / (2 * c.L)
    c_inf = 1 + c.beta / c.L - eps * c.M / (2 * c.L)
    c_s = 1 - c.beta / c.L + eps * c.M / (2 * c.L)
    return c_sup, c_inf, c_s


def _require_small_eps(eps: float, c: SmoothnessConstants):
    if c.M <= 0:
        raise RegimeError("bound requires M > 0")
    if not 0 < eps < 2 * c.beta / c.M:
        raise RegimeError(
            f"eps={eps} outside (0, 2*beta/M)=(0, {2 * c.beta / c.M}); "
            "the propagation coefficients lose their sign pattern")


def epsilon_upper_bound(consts: SmoothnessConstants, n: int,
                        analytic_radius: Optional[float] = None,
                        cap: float = 1e6) -> float:
    """Largest admissible saddle-neighborhood radius eps_max.

    min of the caller-supplied analytic radius (if any), 2L*delta /
    (M*(2Ln^2 - delta)) and 2*beta/M. The nonpositive-denominator case drops
    the middle term; the M -> 0 limit is guarded by `cap`.
    """
    if n < 1:
        raise InputError("n must be >= 1")
    terms = []
    if analytic_radius is not None:
        if analytic_radius <= 0:
            raise InputError("analytic_radius must be positive")
        terms.append(analytic_radius)
    if consts.M > 0:
        denom = 2 * consts.L * n * n - consts.delta
        if denom > 0:
            terms.append(2 * consts.L * consts.delta / (consts.M * denom))
        terms.append(2 * consts.beta / consts.M)
    if not terms:
        return cap
    return min(min(terms), cap)


def exit_time_bound(eps: float, consts: SmoothnessConstants, n: int) -> float:
    """Upper bound on the eps-ball exit time of a well-projected trajectory.

    log(c_sup * log(c_sup/c_inf) * 2*delta / (eps*M*n)) /
    (2 * log(c_sup/c_inf)); grows like log(1/eps).
    """
    _require_small_eps(eps, consts)
    c_sup, c_inf, _ = _coeffs(eps, consts)
    arg = c_sup * math.log(c_sup / c_inf) * 2 * consts.delta / (eps * consts.M * n)
    if arg <= 1:
        raise RegimeError(
            f"exit-time bound invalid: log argument {arg} <= 1 (eps too large "
            "for the linear-exit regime)")
    return math.log(arg) / (2 * math.log(c_sup / c_inf))


def projection_thresholds(eps: float, consts: SmoothnessConstants, n: int):
    """Necessary and sufficient unstable-projection thresholds (Delta, P_min, a, mu).

    Delta = eps*M*L*n / (delta*(L+beta)) is necessary for linear exit;
    P_min is the sufficient threshold assembled from the auxiliaries a > 1
    and mu. P_min is returned as evaluated: outside the small-eps asymptotic
    regime it can exceed 1 (vacuous as a projection threshold) or go
    negative once the denominator's log crosses -a.
    """
    _require_small_eps(eps, consts)
    c_sup, c_inf, _ = _coeffs(eps, consts)
    log_sup = math.log(c_sup)
    log_inf = math.log(c_inf)
    log_ratio = log_sup - log_inf
    if log_ratio <= 0 or log_inf <= 0:
        raise RegimeError("propagation coefficients out of order; check constants")
    delta_nec = eps * consts.M * consts.L * n / (consts.delta * (consts.L + consts.beta))
    a = log_sup / log_ratio
    mu_root = consts.M * n * log_sup / (
        2 * consts.delta * c_sup * log_inf * log_ratio)
    mu = mu_root ** a
    inner = 2 * consts.delta * c_sup * log_inf * log_ratio / (
        eps * consts.M * n * log_sup)
    denom = (1 / a) * math.log(inner) + 1
    if denom == 0:
        raise RegimeError("P_min denominator vanished; eps sits on the regime edge")
    p_min = c_sup * (2 * consts.delta * mu * log_inf / (consts.M * n)) / denom
    return delta_nec, p_min, a, mu


def expansion_constants(consts: SmoothnessConstants, varsigma: float = 3.0):
    """Radius and rate of guaranteed expansion: (xi_max, rho_min).

    C(kappa) = (1+kappa)^2 + 1/(4(1+kappa)^2) - 5/4; xi_max = C/(6*varsigma*M)
    and rho_min = 1 + C/12. Requires varsigma > 2 and kappa > 0.
    """
    if varsigma <= 2:
        raise InputError(f"varsigma must exceed 2, got {varsigma}")
    kappa = consts.kappa
    if kappa <= 0:
        raise InputError("kappa must be positive")
    if consts.M <= 0:
        raise RegimeError("xi_max requires M > 0")
    c_k = (1 + kappa) ** 2 + 1 / (4 * (1 + kappa) ** 2) - 5 / 4
    return c_k / (6 * varsigma * consts.M), 1 + c_k / 12


def shell_time_bound(eps: float, xi: float, consts: SmoothnessConstants,
                     rho_inf: float):
    """Sojourn bound in the shell between radii eps and xi: (K_shell, K_c, K_expand).

    K_c bounds the contraction phase, K_expand the expansion phase driven by
    the worst-case expansion factor rho_inf; K_shell is their sum (the +3 of
    the total is split +1 into K_c and +2 into K_expand).
    """
    if not 0 < eps < xi:
        raise InputError(f"need 0 < eps < xi, got eps={eps}, xi={xi}")
    if consts.M <= 0:
        raise RegimeError("shell bound requires M > 0")
    if eps >= 3 * consts.beta ** 2 / (4 * consts.M * consts.L):
        raise RegimeError(
            f"eps={eps} >= 3*beta^2/(4*M*L)="
            f"{3 * consts.beta ** 2 / (4 * consts.M * consts.L)}; contraction "
            "phase loses its function-gap floor")
    floor = consts.beta ** 2 * eps ** 2 / (2 * consts.L) - 2 * consts.M * eps ** 3 / 3
    if floor <= 0:
        raise RegimeError("eps too large: contraction function-gap floor nonpositive")
    rate = rho_inf / (1 + consts.M * xi)
    if rate <= 1:
        raise RegimeError(
            f"expansion rate rho_inf/(1+M*xi) = {rate} <= 1; no geometric escape")
    k_c = ((math.log(consts.L * xi ** 2 / 2) - math.log(floor))
           / math.log(1 / (1 - consts.beta ** 2 / consts.L ** 2))) + 1
    k_expand = (math.log(xi) - math.log(eps)) / math.log(rate) + 2
    return k_c + k_expand, k_c, k_expand


def no_return_thresholds(consts: SmoothnessConstants, xi: float):
    """No-return thresholds (eps_no_return, gamma_no_return).

    A trajectory that left a ball of radius <= eps_no_return = 2^(-2/kappa^2)
    never re-enters it; re-entry into the xi-ball is excluded once the
    outside gradient floor exceeds gamma_no_return = L*xi/sqrt(2).
    """
    if xi <= 0:
        raise InputError("xi must be positive")
    return 2.0 ** (-2 / consts.kappa ** 2), consts.L * xi / math.sqrt(2)


def trajectory_function_lower_bound(K: float, eps: float,
                                    consts: SmoothnessConstants, n: int,
                                    unstable_projection: float) -> float:
    """Lower-bound trajectory function Psi_lb(K) for the squared exit ratio.

    Exceeding 1 certifies (approximate) escape by step K. unstable_projection
    is normally in [0, 1] but larger formal values are accepted so the
    function can be evaluated at the sufficient threshold P_min, which can
    exceed 1 outside the asymptotic regime.
    """
    if K < 0:
        raise InputError("K must be >= 0")
    if unstable_projection < 0:
        raise InputError("unstable_projection must be >= 0")
    _require_small_eps(eps, consts)
    if 2 * consts.beta - eps * consts.M <= 0:
        raise RegimeError("need eps < 2*beta/M")
    c_sup, c_inf, c_s = _coeffs(eps, consts)
    p_us = unstable_projection
    p_s = 1 - p_us
    load = eps * consts.M * n / (2 * consts.delta)
    stable_term = -2 * K * c_s ** (2 * K - 1) * load * p_s
    unstable_term = (c_inf ** (2 * K) - 2 * K * c_sup ** (2 * K - 1) * load) * p_us
    tail = (eps * consts.M * consts.L * n * c_sup ** (2 * K)
            / (consts.delta * (2 * consts.beta - eps * consts.M)))
    return stable_term + unstable_term - tail


@dataclass(frozen=True)
class GlobalRateInputs:
    """Geometry inputs for the global rate formulas.

    diam_u: compact domain diameter; zeta: initialization-to-optimum
    distance; R: critical-point separation; gamma: gradient floor away from
    critical points; upsilon: geometry exponent in [0, 1) (an input only,
    never inferred); R0: re-entry ball radius.
    """

    diam_u: float
    zeta: float
    R: float
    gamma: float
    upsilon: float
    R0: float

    def __post_init__(self):
        if min(self.diam_u, self.zeta, self.R, self.gamma, self.R0) <= 0:
            raise InputError("all global-rate inputs must be positive")
        if not 0 <= self.upsilon < 1:
            raise InputError("upsilon must lie in [0, 1)")


def global_rate_bounds(inputs: GlobalRateInputs, eps: float, xi: float,
                       consts: SmoothnessConstants, k_exit: float,
                       k_shell: float):
    """Global rates (N0, R_omega, T, K_convex, K_max).

    N0 bounds the number of xi-radius saddle neighborhoods a re-entering
    trajectory can cross, R_omega the largest excursion radius, T the saddle
    count on the way to the optimum, K_convex the terminal linear phase and
    K_max the total iteration count.
    """
    if inputs.R < 10 * xi:
        raise RegimeError(
            f"critical-point separation R={inputs.R} < 10*xi={10 * xi}; the "
            "xi << R requirement fails")
    L, beta, gamma = consts.L, consts.beta, inputs.gamma
    coef = 1 / beta + L / (2 * beta ** 2)
    denom = (gamma / 2 - coef * L ** 2 * eps ** 2 / inputs.R
             - gamma * (k_exit + k_shell) * xi / inputs.R)
    if denom <= 0:
        raise RegimeError(
            "saddle-crossing budget denominator nonpositive (xi << R "
            f"violated): gamma/2={gamma / 2}, correction="
            f"{gamma / 2 - denom}")
    n0 = 2 * L * inputs.diam_u * (inputs.R0 / inputs.R) / denom
    r_omega = (inputs.R0 + 2 * L * inputs.diam_u * inputs.R0 / gamma
               + n0 * coef * L ** 2 * eps ** 2 / gamma
               + n0 * (k_exit + k_shell) * xi)
    t = 2 * L * inputs.diam_u * (inputs.zeta / inputs.R) / denom
    k_convex = (math.log(xi / eps)) / math.log(1 / (1 - beta / L))
    k_max = (t * (k_exit + k_shell)
             + 4 * L * inputs.diam_u * inputs.zeta * L / gamma ** 2
             + 2 * t * coef * eps ** 2 / gamma ** 2
             + k_convex)
    return n0, r_omega, t, k_convex, k_max


@dataclass(frozen=True)
class BoundSet:
    """Every evaluated theoretical quantity for one (problem, eps, xi) choice."""

    eps_max: float
    k_exit_bound: float
    delta_necessary: float
    p_min: float
    proj_a: float
    proj_mu: float
    xi_max: float
    rho_min: float
    k_shell_bound: float
    k_c_bound: float
    k_expand_bound: float
    eps_no_return: float
    gamma_no_return: float
    n0: Optional[float] = None
    r_omega: Optional[float] = None
    t_saddles: Optional[float] = None
    k_convex: Optional[float] = None
    k_max: Optional[float] = None

    def to_json(self, indent: Optional[int] = 2) -> str:
        data = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(data, indent=indent, sort_keys=True)


def compute_bound_set(consts: SmoothnessConstants, n: int, eps: float,
                      xi: Optional[float] = None, varsigma: float = 3.0,
                      rho_inf: Optional[float] = None,
                      analytic_radius: Optional[float] = None,
                      global_inputs: Optional[GlobalRateInputs] = None) -> BoundSet:
    """Assemble the full BoundSet; xi defaults to xi_max, rho_inf to rho_min."""
    eps_max = epsilon_upper_bound(consts, n, analytic_radius)
    if eps > eps_max:
        raise RegimeError(
            f"eps={eps} exceeds the admissible saddle-neighborhood radius "
            f"eps_max={eps_max} (eps must satisfy eps <= min(analytic radius, "
            "2L*delta/(M*(2Ln^2-delta)), 2*beta/M))")
    xi_max, rho_min = expansion_constants(consts, varsigma)
    xi_val = xi_max if xi is None else xi
    rho = rho_min if rho_inf is None else rho_inf
    k_exit = exit_time_bound(eps, consts, n)
    delta_nec, p_min, a, mu = projection_thresholds(eps, consts, n)
    k_shell, k_c, k_expand = shell_time_bound(eps, xi_val, consts, rho)
    eps_nr, gamma_nr = no_return_thresholds(consts, xi_val)
    extra = {}
    if global_inputs is not None:
        n0, r_omega, t, k_convex, k_max = global_rate_bounds(
            global_inputs, eps, xi_val, consts, k_exit, k_shell)
        extra = dict(n0=n0, r_omega=r_omega, t_saddles=t, k_convex=k_convex,
                     k_max=k_max)
    return BoundSet(
        eps_max=eps_max, k_exit_bound=k_exit, delta_necessary=delta_nec,
        p_min=p_min, proj_a=a, proj_mu=mu, xi_max=xi_max, rho_min=rho_min,
        k_shell_bound=k_shell, k_c_bound=k_c, k_expand_bound=k_expand,
        eps_no_return=eps_nr, gamma_no_return=gamma_nr, **extra)
