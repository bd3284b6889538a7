import math

import numpy as np
import pytest

import bounds_reference as ref
from ccrgd import (GlobalRateInputs, InputError, RegimeError,
                   epsilon_upper_bound, exit_time_bound, expansion_constants,
                   global_rate_bounds, no_return_thresholds,
                   projection_thresholds, shell_time_bound,
                   trajectory_function_lower_bound)
from ccrgd.bounds import compute_bound_set
from ccrgd.problem import SmoothnessConstants

CANON = SmoothnessConstants(L=1.0, M=1.0, beta=0.5, delta=1.0)


def random_valid_inputs(count, seed=0):
    """Constants + eps samples inside every formula's validity regime."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        L = rng.uniform(0.5, 3.0)
        kappa = rng.uniform(0.1, 0.9)
        beta = kappa * L
        M = rng.uniform(0.1, 2.0)
        delta = rng.uniform(0.2, 1.0) * 2 * beta
        n = int(rng.integers(2, 9))
        c = SmoothnessConstants(L=L, M=M, beta=beta, delta=delta)
        eps_cap = min(2 * beta / M, 3 * beta ** 2 / (4 * M * L))
        eps = rng.uniform(0.001, 0.5) * eps_cap
        xi, rho = expansion_constants(c, 3.0)
        if eps >= xi:
            continue
        try:
            exit_time_bound(eps, c, n)
            shell_time_bound(eps, xi, c, rho)
        except RegimeError:
            continue
        out.append((c, eps, xi, rho, n))
    return out


def test_matches_reference_on_random_inputs():
    rng = np.random.default_rng(42)
    for c, eps, xi, rho, n in random_valid_inputs(50, seed=1):
        L, M, beta, delta = c.L, c.M, c.beta, c.delta
        assert epsilon_upper_bound(c, n) == pytest.approx(
            ref.ref_eps_max(L, M, beta, delta, n), rel=1e-12)
        assert exit_time_bound(eps, c, n) == pytest.approx(
            ref.ref_exit_time_bound(eps, L, M, beta, delta, n), rel=1e-12)
        d_nec, p_min, a, mu = projection_thresholds(eps, c, n)
        assert d_nec == pytest.approx(
            ref.ref_delta_necessary(eps, L, M, beta, delta, n), rel=1e-12)
        assert a == pytest.approx(ref.ref_a(eps, L, M, beta), rel=1e-12)
        assert mu == pytest.approx(ref.ref_mu(eps, L, M, beta, delta, n), rel=1e-12)
        assert p_min == pytest.approx(
            ref.ref_p_min(eps, L, M, beta, delta, n), rel=1e-12)
        xi_max, rho_min = expansion_constants(c, 3.0)
        assert xi_max == pytest.approx(ref.ref_xi_max(L, M, beta, 3.0), rel=1e-12)
        assert rho_min == pytest.approx(ref.ref_rho_min(L, beta), rel=1e-12)
        ks, kc, ke = shell_time_bound(eps, xi, c, rho)
        assert kc == pytest.approx(ref.ref_k_contract(eps, xi, L, M, beta), rel=1e-12)
        assert ke == pytest.approx(ref.ref_k_expand(eps, xi, M, rho), rel=1e-12)
        assert ks == pytest.approx(ref.ref_shell_bound(eps, xi, L, M, beta, rho),
                                   rel=1e-12)
        enr, gnr = no_return_thresholds(c, xi)
        assert enr == pytest.approx(ref.ref_eps_no_return(L, beta), rel=1e-12)
        assert gnr == pytest.approx(ref.ref_gamma_no_return(L, xi), rel=1e-12)
        K = float(rng.uniform(0, 12))
        pus = float(rng.uniform(0, 1))
        assert trajectory_function_lower_bound(K, eps, c, n, pus) == pytest.approx(
            ref.ref_trajectory_lower_bound(K, eps, L, M, beta, delta, n, pus),
            rel=1e-12, abs=1e-300)


def test_global_rates_match_reference():
    c = CANON
    eps, xi = 0.01, 0.15
    # shell/exit budgets small enough for the saddle-crossing denominator
    k_exit, k_shell = 2.0, 4.0
    gi = GlobalRateInputs(diam_u=10.0, zeta=5.0, R=2.0, gamma=0.3, upsilon=0.2,
                          R0=1.0)
    got = global_rate_bounds(gi, eps, xi, c, k_exit, k_shell)
    want = ref.ref_global(eps, xi, c.L, c.M, c.beta, k_exit, k_shell,
                          10.0, 5.0, 2.0, 0.3, 1.0)
    for g, w in zip(got, want):
        assert g == pytest.approx(w, rel=1e-12)
    assert all(np.isfinite(got)) and all(v > 0 for v in got)


def test_global_rates_full_bound_budgets_break_regime():
    # with the theoretical exit/shell budgets at these radii the denominator
    # goes negative: the xi << R hypothesis fails and the op must say so
    k_exit = exit_time_bound(0.01, CANON, 4)
    k_shell, _, _ = shell_time_bound(0.01, 0.15, CANON, 1.23)
    gi = GlobalRateInputs(diam_u=10.0, zeta=5.0, R=2.0, gamma=0.3, upsilon=0.2,
                          R0=1.0)
    with pytest.raises(RegimeError, match="xi << R"):
        global_rate_bounds(gi, 0.01, 0.15, CANON, k_exit, k_shell)


def test_eps_upper_bound_worked_example():
    # min{2*1*1/(1*(2*16-1)), 2*0.5/1} = min{2/31, 1}
    assert epsilon_upper_bound(CANON, 4) == pytest.approx(2 / 31)


def test_eps_upper_bound_min_with_analytic_radius():
    assert epsilon_upper_bound(CANON, 4, analytic_radius=0.01) == pytest.approx(0.01)


def test_eps_upper_bound_m_zero_capped():
    c = SmoothnessConstants(L=1.0, M=0.0, beta=0.5, delta=1.0)
    assert epsilon_upper_bound(c, 4, cap=123.0) == 123.0


def test_eps_upper_bound_nonpositive_denominator_guard():
    # 2Ln^2 <= delta drops the middle term
    c = SmoothnessConstants(L=1.0, M=1.0, beta=1.0, delta=2.0)
    assert epsilon_upper_bound(c, 1) == pytest.approx(2 * c.beta / c.M)


def test_exit_time_bound_decreasing_in_eps():
    assert (exit_time_bound(1e-3, CANON, 4)
            > exit_time_bound(1e-2, CANON, 4))
    grid = np.geomspace(1e-5, 1e-2, 20)
    vals = [exit_time_bound(e, CANON, 4) for e in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_exit_time_bound_numeric_value():
    want = ref.ref_exit_time_bound(0.01, 1.0, 1.0, 0.5, 1.0, 4)
    assert exit_time_bound(0.01, CANON, 4) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(5.7613, abs=5e-4)


def test_exit_time_bound_log_slope_constant():
    # slope of the bound against log(1/eps) is constant to 5 percent
    grid = np.geomspace(1e-5, 1e-2, 12)
    vals = np.array([exit_time_bound(e, CANON, 4) for e in grid])
    x = np.log(1 / grid)
    slopes = np.diff(vals) / np.diff(x)
    assert np.max(slopes) / np.min(slopes) < 1.05


def test_exit_time_bound_regime_errors():
    with pytest.raises(RegimeError):
        exit_time_bound(2.0, CANON, 4)  # eps >= 2*beta/M
    # huge n drives the log argument under 1
    with pytest.raises(RegimeError):
        exit_time_bound(0.9, CANON, 4000)


def test_projection_thresholds_a_exceeds_one():
    for c, eps, _, _, n in random_valid_inputs(20, seed=3):
        _, _, a, _ = projection_thresholds(eps, c, n)
        assert a > 1


def test_projection_thresholds_p_min_increasing_in_eps():
    grid = np.geomspace(1e-5, 1e-2, 20)
    vals = [projection_thresholds(e, CANON, 4)[1] for e in grid]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_delta_necessary_value():
    d, _, _, _ = projection_thresholds(0.01, CANON, 4)
    assert d == pytest.approx(0.01 * 1 * 1 * 4 / (1 * 1.5), rel=1e-12)


def test_expansion_constants_kappa_one():
    c = SmoothnessConstants(L=1.0, M=1.0, beta=1.0, delta=2.0)
    xi_max, rho_min = expansion_constants(c, 3.0)
    assert xi_max == pytest.approx(2.8125 / 18)   # C(1) = 2.8125
    assert rho_min == pytest.approx(1.234375)


def test_expansion_constants_kappa_to_zero():
    cs = [SmoothnessConstants(L=1.0, M=1.0, beta=b, delta=2 * b)
          for b in [0.1, 0.01, 0.001]]
    xs = [expansion_constants(c, 3.0) for c in cs]
    xis = [x[0] for x in xs]
    rhos = [x[1] for x in xs]
    assert all(a > b for a, b in zip(xis, xis[1:]))
    assert xis[-1] < 1e-3 and abs(rhos[-1] - 1) < 1e-3


def test_expansion_constants_validation():
    with pytest.raises(InputError):
        expansion_constants(CANON, 2.0)


def test_expansion_constants_monotone_in_m_and_varsigma():
    for M in [0.5, 1.0, 2.0]:
        pass
    xi1, _ = expansion_constants(SmoothnessConstants(1, 0.5, 0.5, 1.0), 3.0)
    xi2, _ = expansion_constants(SmoothnessConstants(1, 1.0, 0.5, 1.0), 3.0)
    assert xi1 > xi2
    xi3, _ = expansion_constants(CANON, 4.0)
    xi4, _ = expansion_constants(CANON, 3.0)
    assert xi3 < xi4


def test_shell_time_bound_expand_limit():
    # eps -> xi: the expansion phase needs just the +2 slack
    _, _, ke = shell_time_bound(0.149999999, 0.15, CANON, 1.23)
    assert ke == pytest.approx(2.0, abs=1e-6)


def test_shell_time_bound_affine_in_log_ratio():
    xs, ys = [], []
    for eps in np.geomspace(1e-4, 1e-2, 10):
        ks, _, _ = shell_time_bound(eps, 0.15, CANON, 1.23)
        xs.append(math.log(0.15 / eps))
        ys.append(ks)
    coef = np.polyfit(xs, ys, 1)
    resid = np.array(ys) - np.polyval(coef, xs)
    # affine up to the eps^3 correction inside the contraction log
    assert np.max(np.abs(resid)) < 5e-3 * (max(ys) - min(ys))
    assert coef[0] > 0


def test_shell_time_bound_numeric_instance():
    ks, kc, ke = shell_time_bound(0.01, 0.15, CANON, 1.23)
    assert kc == pytest.approx(ref.ref_k_contract(0.01, 0.15, 1, 1, 0.5), rel=1e-12)
    assert ke == pytest.approx(ref.ref_k_expand(0.01, 0.15, 1, 1.23), rel=1e-12)
    assert kc == pytest.approx(24.836046, abs=2e-5)
    assert ke == pytest.approx(42.267071, abs=2e-5)


def test_shell_time_bound_regime_errors():
    with pytest.raises(RegimeError):
        shell_time_bound(0.19, 0.2, CANON, 1.23)  # eps >= 3 beta^2 / (4 M L)
    with pytest.raises(RegimeError):
        shell_time_bound(0.01, 0.15, CANON, 1.10)  # rho/(1+M xi) <= 1


def test_no_return_thresholds_values():
    c1 = SmoothnessConstants(L=1.0, M=1.0, beta=1.0, delta=2.0)
    assert no_return_thresholds(c1, 0.15)[0] == pytest.approx(0.25)
    c2 = CANON  # kappa = 0.5
    assert no_return_thresholds(c2, 0.15)[0] == pytest.approx(2.0 ** -8)
    assert no_return_thresholds(c2, 0.15)[1] == pytest.approx(0.15 / math.sqrt(2))
    assert no_return_thresholds(c2, 0.15)[1] == pytest.approx(0.10607, abs=1e-5)


def test_eps_no_return_increasing_in_kappa():
    vals = [no_return_thresholds(SmoothnessConstants(1.0, 1.0, b, 2 * b), 0.1)[0]
            for b in np.linspace(0.1, 1.0, 20)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_trajectory_lower_bound_at_zero():
    eps, n, pus = 0.01, 4, 0.3
    got = trajectory_function_lower_bound(0, eps, CANON, n, pus)
    want = pus - eps * 1 * 1 * n / (1 * (2 * 0.5 - eps * 1))
    assert got == pytest.approx(want, rel=1e-12)


def test_trajectory_lower_bound_stable_only_negative_for_large_k():
    val = trajectory_function_lower_bound(60, 0.01, CANON, 4, 0.0)
    assert val < 0


def test_trajectory_lower_bound_sufficiency_at_p_min():
    # at the sufficient projection threshold some K under the exit bound
    # certifies escape (value >= 1 up to the 5 percent slack)
    _, p_min, _, _ = projection_thresholds(0.01, CANON, 4)
    kb = exit_time_bound(0.01, CANON, 4)
    best = max(trajectory_function_lower_bound(k, 0.01, CANON, 4, p_min)
               for k in range(int(kb) + 1))
    assert best >= 1 - 0.05


def test_trajectory_lower_bound_regime():
    with pytest.raises(RegimeError):
        trajectory_function_lower_bound(1, 1.5, CANON, 4, 0.5)
    with pytest.raises(InputError):
        trajectory_function_lower_bound(-1, 0.01, CANON, 4, 0.5)
    with pytest.raises(InputError):
        trajectory_function_lower_bound(1, 0.01, CANON, 4, -0.5)


def test_global_rates_xi_to_zero_limit():
    gi = GlobalRateInputs(diam_u=10.0, zeta=5.0, R=2.0, gamma=0.3, upsilon=0.2,
                          R0=1.0)
    limit = 4 * 1.0 * 10.0 * 1.0 / (0.3 * 2.0)
    vals = []
    for scale in [1e-3, 1e-5, 1e-7]:
        xi = 0.15 * scale
        eps = xi / 15
        k_exit = exit_time_bound(eps, CANON, 4)
        k_shell, _, _ = shell_time_bound(eps, xi, CANON, 1.23)
        n0 = global_rate_bounds(gi, eps, xi, CANON, k_exit, k_shell)[0]
        vals.append(n0)
    errs = [abs(v - limit) / limit for v in vals]
    assert errs[-1] < 1e-3 and errs[0] > errs[-1]


def test_global_rates_k_convex_zero_when_eps_equals_xi():
    gi = GlobalRateInputs(diam_u=10.0, zeta=5.0, R=2.0, gamma=0.3, upsilon=0.2,
                          R0=1.0)
    out = global_rate_bounds(gi, 0.15, 0.15, CANON, 1.0, 2.0)
    assert out[3] == 0.0


def test_global_rates_regime_error_names_condition():
    gi = GlobalRateInputs(diam_u=10.0, zeta=5.0, R=2.0, gamma=1e-6, upsilon=0.0,
                          R0=1.0)
    with pytest.raises(RegimeError, match="xi << R"):
        global_rate_bounds(gi, 0.01, 0.15, CANON, 5.0, 60.0)
    with pytest.raises(RegimeError, match="R"):
        global_rate_bounds(
            GlobalRateInputs(diam_u=10.0, zeta=5.0, R=0.5, gamma=0.3,
                             upsilon=0.0, R0=1.0),
            0.01, 0.15, CANON, 5.0, 60.0)


def test_bounds_deterministic():
    a = compute_bound_set(CANON, 4, eps=0.01, xi=0.15, rho_inf=1.23)
    b = compute_bound_set(CANON, 4, eps=0.01, xi=0.15, rho_inf=1.23)
    assert a == b
    assert a.to_json() == b.to_json()


def test_bound_set_rejects_eps_above_eps_max():
    with pytest.raises(RegimeError, match="eps_max"):
        compute_bound_set(CANON, 4, eps=0.5)


def test_monotonicity_k_shell_in_log_ratio():
    grid = np.geomspace(1e-4, 0.05, 20)
    vals = [shell_time_bound(e, 0.15, CANON, 1.23)[0] for e in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))
