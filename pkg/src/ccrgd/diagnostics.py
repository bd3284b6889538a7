"""Post-hoc trajectory analysis: phase detection against a known stationary
point, empirical verification of the contraction/expansion/no-return
properties, and relative-error measurement of the linearized predictions.

Conventions: radial distances r_k = ||x_k - x*||; the shell is the closed
set {eps <= r <= xi}. Ball-exit times are first upward crossings: the first
k >= 1 with r_k >= radius and r_{k-1} <= radius, so a boundary start that
expands immediately exits at k = 1 and a trajectory that dips inside exits
when it comes back out.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import bounds as _bounds
from .errors import InputError
from .optimizer import GD_STEP, TrajectoryRecord
from .problem import ObjectiveProblem, SmoothnessConstants
from .spectral import SaddleAnalysis, linearized_trajectory, projection_coefficients

__all__ = [
    "PhaseReport",
    "CheckResult",
    "InvariantReport",
    "detect_phases",
    "verify_invariants",
    "linearization_error",
]


@dataclass(frozen=True)
class PhaseReport:
    """Contraction/expansion indices of a trajectory around x_star.

    k_tau is the first non-contraction index; k_c / k_e bracket the last
    contraction and first expansion inside the shell; k_exit / k_hat_exit
    are the upward crossings of the eps- and xi-spheres.
    """

    radial: np.ndarray
    k_tau: Optional[int]
    k_c: Optional[int]
    k_e: Optional[int]
    k_exit: Optional[int]
    k_hat_exit: Optional[int]
    entered_eps_ball: bool

    def sojourn(self) -> Optional[int]:
        """Measured shell time K_c + (K_hat_exit - K_e).

        A step can hop clean over a thin shell (k_e undefined although the
        xi-exit happened); the expansion phase then spends zero iterations
        in the shell and only the contraction part counts.
        """
        if self.k_c is None or self.k_hat_exit is None:
            return None
        if self.k_e is None:
            return self.k_c
        return self.k_c + (self.k_hat_exit - self.k_e)


def _first_upward_crossing(r: np.ndarray, radius: float) -> Optional[int]:
    # the <= side carries an ulp-scale slack so sphere starts (r_0 == radius
    # up to rounding) count as inside
    inside = r[:-1] <= radius * (1 + 1e-12)
    hits = np.nonzero((r[1:] >= radius) & inside)[0]
    return int(hits[0]) + 1 if hits.size else None


def detect_phases(traj: TrajectoryRecord, x_star, eps: float,
                  xi: float) -> PhaseReport:
    """Locate the contraction/expansion phases of a dense trace."""
    if traj.thin_stride != 1:
        raise InputError("detect_phases needs dense iterates (thin_stride == 1)")
    x_star = np.asarray(x_star, dtype=float)
    if x_star.shape != traj.iterates.shape[1:]:
        raise InputError(
            f"x_star shape {x_star.shape} does not match iterates "
            f"{traj.iterates.shape[1:]}")
    if not eps < xi:
        raise InputError("need eps < xi")
    with np.errstate(over="ignore"):
        # pre-divergence iterates can be huge; an inf radius is fine here
        r = np.linalg.norm(traj.iterates - x_star, axis=1)
    inc = np.nonzero(r[1:] >= r[:-1])[0]
    k_tau = int(inc[0]) if inc.size else None
    # closed-shell membership with ulp-scale slack so sphere starts count
    shell = (r >= eps * (1 - 1e-12)) & (r <= xi * (1 + 1e-12))
    k_c = k_e = None
    if k_tau is not None:
        before = np.nonzero(shell[:k_tau + 1])[0]
        k_c = int(before[-1]) if before.size else None
        after = np.nonzero(shell[k_tau:])[0]
        k_e = int(after[0]) + k_tau if after.size else None
    return PhaseReport(
        radial=r, k_tau=k_tau, k_c=k_c, k_e=k_e,
        k_exit=_first_upward_crossing(r, eps),
        k_hat_exit=_first_upward_crossing(r, xi),
        entered_eps_ball=bool(np.any(r < eps)))


@dataclass
class CheckResult:
    """Outcome of one trajectory check; passed None means skipped."""

    name: str
    passed: Optional[bool]
    margin: float = math.nan
    first_violation_index: Optional[int] = None
    note: str = ""


@dataclass
class InvariantReport:
    checks: List[CheckResult] = field(default_factory=list)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if c.passed is False]

    def to_json(self, indent: Optional[int] = 2) -> str:
        data = {
            c.name: {
                "pass": c.passed,
                "margin": None if math.isnan(c.margin) else c.margin,
                "violation_index": c.first_violation_index,
                "note": c.note,
            }
            for c in self.checks
        }
        return json.dumps(data, indent=indent, sort_keys=True)


def _min_margin(values) -> tuple[float, Optional[int]]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.inf, None
    i = int(np.argmin(values))
    return float(values[i]), i


def verify_invariants(traj: TrajectoryRecord, problem: ObjectiveProblem,
                      x_star, eps: float, xi: float,
                      consts: Optional[SmoothnessConstants] = None,
                      bound_set: Optional[_bounds.BoundSet] = None,
                      checks="all") -> InvariantReport:
    """Run the per-trajectory checks; conditional checks skip (not pass)
    when their enabling hypotheses fail.

    Checks: (a) strict expansion after the first non-contraction inside the
    xi-ball, (b) the gradient-domination inequality during deep contraction,
    (c) monotone f, (d) f at the eps-exit below f(x*), (e)/(f) no re-entry
    into the eps-/xi-balls, (g) orthant confinement of the pre-exit arc,
    (h) measured shell sojourn under its bound, (i) measured eps-exit time
    under its bound for sufficiently projected inits. An informational
    "hyperbolic" entry reports whether the radial minimum is interior to
    the contraction-expansion window (never pass/fail).
    """
    if traj.thin_stride != 1:
        raise InputError("verify_invariants needs dense iterates")
    consts = consts or problem.constants
    x_star = np.asarray(x_star, dtype=float)
    phases = detect_phases(traj, x_star, eps, xi)
    r = phases.radial
    f_star = problem.value(x_star)
    fs = traj.values
    enabled = None if checks == "all" else set(checks)
    report = InvariantReport()

    def want(name: str) -> bool:
        return enabled is None or name in enabled

    def add(name, passed, margin=math.nan, idx=None, note=""):
        report.checks.append(CheckResult(name, passed, margin, idx, note))

    # (a) sequential monotonicity: strictly increasing radii from K_e to the
    # xi-exit; needs a pure-gradient window.
    if want("a"):
        if phases.k_e is None or phases.k_hat_exit is None:
            add("a", None, note="no expansion window inside the shell")
        else:
            ke, kx = phases.k_e, phases.k_hat_exit
            window = traj.step_types[ke:kx]
            if any(s != GD_STEP for s in window):
                add("a", None, note="window contains non-gradient steps")
            else:
                diffs = r[ke + 1:kx + 1] - r[ke:kx]
                margin, i = _min_margin(diffs)
                add("a", bool(np.all(diffs > 0)), margin,
                    None if margin > 0 else ke + int(i))

    # (b) gradient domination (PL-style) during deep contraction; when the
    # trajectory never enters the eps-ball (k_c == k_e) the floor argument
    # only covers indices up to k_c - 1
    if want("b"):
        limit = (3 * consts.beta ** 2 / (4 * consts.M * consts.L)
                 if consts.M > 0 else math.inf)
        last = phases.k_c
        if last is not None and phases.k_e == phases.k_c:
            last = last - 1
        if last is None or last < 0 or not r[phases.k_c] < limit:
            add("b", None, note="contraction endpoint not inside the PL radius")
        else:
            ks = np.arange(last + 1)
            gaps = fs[ks] - f_star
            caps = (consts.L / (2 * consts.beta ** 2)) * traj.grad_norms[ks] ** 2
            ok = (gaps > 0) & (gaps <= caps)
            margin = float(np.min(np.minimum(gaps, caps - gaps)))
            bad = np.nonzero(~ok)[0]
            add("b", bool(ok.all()), margin,
                int(bad[0]) if bad.size else None)

    # (c) monotone f along the whole trace
    if want("c"):
        tol = 1e-12 * (1 + np.abs(fs[:-1]))
        diffs = fs[:-1] + tol - fs[1:]
        margin, i = _min_margin(diffs)
        add("c", bool(np.all(diffs >= 0)), margin,
            None if margin >= 0 else int(i))

    # (d) exit value below the stationary value
    if want("d"):
        if phases.k_exit is None:
            add("d", None, note="trajectory never exits the eps-ball")
        else:
            margin = float(f_star - fs[phases.k_exit])
            add("d", margin > 0, margin,
                None if margin > 0 else phases.k_exit)

    # (e) no return into the eps-ball, enabled for eps under the threshold
    if want("e"):
        eps_nr, _ = _bounds.no_return_thresholds(consts, xi)
        if phases.k_exit is None:
            add("e", None, note="no eps-exit")
        elif eps > eps_nr:
            add("e", None, note=f"eps={eps} above no-return threshold {eps_nr:.3e}")
        else:
            tail = r[phases.k_exit:]
            margin, i = _min_margin(tail - eps)
            add("e", bool(np.all(tail >= eps)), margin,
                None if margin >= 0 else phases.k_exit + int(i))

    # (f) no return into the xi-ball, enabled when the measured outside
    # gradient floor clears L*xi/sqrt(2)
    if want("f"):
        _, gamma_nr = _bounds.no_return_thresholds(consts, xi)
        if phases.k_hat_exit is None:
            add("f", None, note="no xi-exit")
        else:
            tail = slice(phases.k_hat_exit, len(r))
            outside = r[tail] >= xi
            floor = (float(np.min(traj.grad_norms[tail][outside]))
                     if outside.any() else math.inf)
            if floor <= gamma_nr:
                add("f", None,
                    note=f"measured gradient floor {floor:.3e} <= L*xi/sqrt(2)")
            else:
                margin, i = _min_margin(r[tail] - xi)
                add("f", bool(np.all(r[tail] >= xi)), margin,
                    None if margin >= 0 else phases.k_hat_exit + int(i))

    # (g) orthant confinement of the arc up to the eps-exit
    if want("g"):
        u0 = traj.iterates[0] - x_star
        p0 = float(np.linalg.norm(u0))
        threshold = math.sqrt(eps) * math.log(1 / eps)  # error-margin scale
        proj = math.nan
        if p0 > 0:
            H = problem.hessian(x_star)
            lam, V = np.linalg.eigh(0.5 * (H + np.asarray(H).T))
            coeff = V.T @ (u0 / p0)
            proj = float(np.sum(coeff[lam < 0] ** 2))
        if phases.k_exit is None or not (proj == proj and math.sqrt(proj) > threshold):
            add("g", None, note="projection below the error-margin threshold"
                if phases.k_exit is not None else "no eps-exit")
        else:
            tol = 10 * consts.M * eps ** 3 / consts.L
            inners = (traj.iterates[1:phases.k_exit + 1] - x_star) @ u0
            margin, i = _min_margin(inners + tol)
            add("g", bool(np.all(inners >= -tol)), margin,
                None if margin >= 0 else 1 + int(i))

    # (h) measured shell sojourn under its bound
    if want("h"):
        sojourn = phases.sojourn()
        if sojourn is None:
            add("h", None, note="phase indices incomplete")
        else:
            try:
                if bound_set is not None:
                    k_shell = bound_set.k_shell_bound
                else:
                    _, rho_min = _bounds.expansion_constants(consts)
                    k_shell, _, _ = _bounds.shell_time_bound(eps, xi, consts, rho_min)
            except Exception as exc:  # regime errors disable the check
                add("h", None, note=f"bound unavailable: {exc}")
            else:
                add("h", sojourn <= k_shell, float(k_shell - sojourn))

    # hyperbolicity surrogate, informational only: for a trajectory that
    # both contracts and expands, the radial minimum should be interior to
    # the [k_c, k_e] window rather than at its endpoints
    if want("hyperbolic"):
        if phases.k_c is None or phases.k_e is None or phases.k_c >= phases.k_e:
            add("hyperbolic", None, note="no contraction-expansion window")
        else:
            seg = r[phases.k_c:phases.k_e + 1]
            j = int(np.argmin(seg))
            interior = 0 < j < len(seg) - 1
            add("hyperbolic", None, margin=float(j) / max(len(seg) - 1, 1),
                note="radial minimum interior to the window" if interior
                else "radial minimum at a window endpoint")

    # (i) measured exit time under its bound, for sufficiently projected inits
    if want("i"):
        u0 = traj.iterates[0] - x_star
        try:
            if bound_set is not None:
                p_min, k_exit_bound = bound_set.p_min, bound_set.k_exit_bound
            else:
                _, p_min, _, _ = _bounds.projection_thresholds(eps, consts, problem.n)
                k_exit_bound = _bounds.exit_time_bound(eps, consts, problem.n)
        except Exception as exc:
            add("i", None, note=f"bound unavailable: {exc}")
        else:
            if np.linalg.norm(u0) == 0:
                add("i", None, note="trajectory starts at x_star")
            elif p_min <= 0:
                add("i", None, note="P_min formula out of regime (nonpositive)")
            else:
                H = problem.hessian(x_star)
                lam, V = np.linalg.eigh(0.5 * (H + np.asarray(H).T))
                coeff = V.T @ (u0 / np.linalg.norm(u0))
                proj = float(np.sum(coeff[lam < 0] ** 2))
                if proj < min(p_min, 1.0) - 1e-12:
                    add("i", None,
                        note=f"unstable projection {proj:.3e} below threshold")
                elif phases.k_exit is None:
                    add("i", False, -math.inf, None,
                        note="sufficiently projected trajectory never exited")
                else:
                    add("i", phases.k_exit <= k_exit_bound,
                        float(k_exit_bound - phases.k_exit))

    return report


def linearization_error(problem: ObjectiveProblem, analysis: SaddleAnalysis,
                        traj: TrajectoryRecord, order: int = 0) -> np.ndarray:
    """Relative errors of the linearized prediction up to the eps-exit.

    The trace must start on a sphere around the saddle; eps is taken as
    ||x_0 - x*||. Entries where the true radial vector vanishes are nan
    (the trajectory hit the stationary point).
    """
    if traj.thin_stride != 1:
        raise InputError("linearization_error needs dense iterates")
    u0 = traj.iterates[0] - analysis.x_star
    eps = float(np.linalg.norm(u0))
    if eps == 0:
        raise InputError("trajectory must start away from the saddle")
    with np.errstate(over="ignore"):
        r = np.linalg.norm(traj.iterates - analysis.x_star, axis=1)
    k_exit = _first_upward_crossing(r, eps)
    if k_exit is None:
        k_exit = len(r) - 1
    if k_exit < 1:
        return np.empty(0)
    pred = linearized_trajectory(problem, analysis, u0, K=k_exit, order=order)
    errs = np.empty(k_exit)
    for k in range(1, k_exit + 1):
        u_true = traj.iterates[k] - analysis.x_star
        denom = float(np.linalg.norm(u_true))
        if denom == 0:
            errs[k - 1] = math.nan
        else:
            errs[k - 1] = float(np.linalg.norm(u_true - pred.points[k - 1])) / denom
    return errs
