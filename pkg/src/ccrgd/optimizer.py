"""Gradient descent and the curvature-conditioned variant (CCRGD).

CCRGD runs plain gradient descent while the gradient is large. Inside a
small-gradient region it estimates, from two gradient evaluations, whether
the iterate still carries enough unstable-subspace energy to escape on its
own; if not it takes a single eigenvector step of length ||grad|| / beta
along the most negative curvature direction, or certifies second-order
stationarity when there is none. A condition flag suppresses repeated
checks until the iterate leaves the small-gradient region.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InputError, NotDescentDirectionError
from .problem import ObjectiveProblem, SmoothnessConstants
from .spectral import SaddleAnalysis, _fix_signs

__all__ = [
    "OptimizerConfig",
    "TrajectoryRecord",
    "gd_run",
    "curvature_statistics",
    "second_order_step",
    "ccrgd_run",
    "init_near_saddle",
    "GD_STEP",
    "SECOND_ORDER_STEP",
    "BREAK_STEP",
]

GD_STEP = "gd"
SECOND_ORDER_STEP = "second_order"
BREAK_STEP = "break"

TERM_BUDGET = "budget_exhausted"
TERM_SOSP = "second_order_stationary"
TERM_DIVERGED = "diverged"
TERM_FOSP = "first_order_stationary"


@dataclass(frozen=True)
class OptimizerConfig:
    """Run parameters; alpha is pinned to 1/L.

    eps is the saddle-detection radius, p_min the minimum unstable projection
    threshold feeding the curvature window (clamped into [0, 1]; the raw
    theoretical value can fall outside the unit interval, where it is vacuous
    as a projection threshold). second_order_radius selects the eigenstep
    length ||grad||/beta ("1/beta", the default) or ||grad||/L ("1/L").
    """

    constants: SmoothnessConstants
    eps: float
    max_iters: int
    p_min: float = 0.0
    stop_tol_scale: float = 1e-10
    second_order_radius: str = "1/beta"
    alpha: float = field(init=False)
    kappa: float = field(init=False)

    def __post_init__(self):
        if self.eps < 0:
            raise InputError("eps must be >= 0")
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        if self.second_order_radius not in ("1/beta", "1/L"):
            raise InputError("second_order_radius must be '1/beta' or '1/L'")
        object.__setattr__(self, "alpha", 1.0 / self.constants.L)
        object.__setattr__(self, "kappa", self.constants.kappa)
        assert abs(self.alpha * self.constants.L - 1.0) <= 1e-12


@dataclass
class TrajectoryRecord:
    """Dense per-iteration trace of a run.

    iterates has one more row than steps were taken (x_0 included); values
    and grad_norms align with iterates. step_types[k] describes the move
    from iterate k, xi_flags[k] the condition flag while at iterate k.
    """

    iterates: np.ndarray
    values: np.ndarray
    grad_norms: np.ndarray
    step_types: List[str]
    xi_flags: np.ndarray
    termination: str
    second_order_count: int
    thin_stride: int = 1

    @property
    def num_steps(self) -> int:
        return len(self.step_types)

    def final_iterate(self) -> np.ndarray:
        return self.iterates[-1]

    def thinned(self, stride: int) -> "TrajectoryRecord":
        """Copy with iterates kept every `stride` steps plus the final one
        (scalars stay dense); row j of the thinned iterates corresponds to
        original index j*stride, except the last row which is the final
        iterate. Phase diagnostics require dense records."""
        if stride < 1:
            raise InputError("stride must be >= 1")
        if stride == 1:
            return self
        keep = list(range(0, len(self.iterates) - 1, stride)) + [len(self.iterates) - 1]
        return TrajectoryRecord(
            iterates=self.iterates[keep], values=self.values,
            grad_norms=self.grad_norms, step_types=self.step_types,
            xi_flags=self.xi_flags, termination=self.termination,
            second_order_count=self.second_order_count, thin_stride=stride)


def _stop_tol(consts: SmoothnessConstants, x: np.ndarray, scale: float) -> float:
    return scale * consts.L * (1 + float(np.linalg.norm(x)))


def gd_run(problem: ObjectiveProblem, x0, config: OptimizerConfig) -> TrajectoryRecord:
    """Plain gradient descent with alpha = 1/L, full trace recorded."""
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise InputError("x0 must be finite")
    consts = config.constants
    iterates = [x.copy()]
    values, gnorms, steps, flags = [], [], [], []
    termination = TERM_BUDGET
    # divergence is detected, not prevented: silence the overflow chatter
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.max_iters):
            g = problem.gradient(x)
            f = problem.value(x)
            if not (np.all(np.isfinite(g)) and np.isfinite(f)):
                termination = TERM_DIVERGED
                break
            gn = float(np.linalg.norm(g))
            values.append(f)
            gnorms.append(gn)
            flags.append(0)
            if gn < _stop_tol(consts, x, config.stop_tol_scale):
                termination = TERM_FOSP
                break
            x = x - config.alpha * g
            steps.append(GD_STEP)
            iterates.append(x.copy())
        else:
            g = problem.gradient(x)
            f = problem.value(x)
            values.append(f)
            gnorms.append(float(np.linalg.norm(g)))
            flags.append(0)
        _pad_tail(problem, x, values, gnorms, flags, steps, iterates, termination)
    return TrajectoryRecord(
        iterates=np.asarray(iterates), values=np.asarray(values),
        grad_norms=np.asarray(gnorms), step_types=steps,
        xi_flags=np.asarray(flags, dtype=int), termination=termination,
        second_order_count=0)


def _pad_tail(problem, x, values, gnorms, flags, steps, iterates, termination):
    # terminal iterate must carry value/grad entries exactly once
    while len(values) < len(iterates):
        f = problem.value(x)
        g = problem.gradient(x)
        values.append(f if np.isfinite(f) else np.nan)
        gn = float(np.linalg.norm(g)) if np.all(np.isfinite(g)) else np.nan
        gnorms.append(gn)
        flags.append(flags[-1] if flags else 0)


def curvature_statistics(problem: ObjectiveProblem, x, alpha: float):
    """Two-gradient curvature probe (V1, V2) at x.

    y1 = x - alpha * grad(x); V1 = <y1-x, y1-x>;
    V2 = alpha * <y1-x, grad(y1)-grad(x)>. Exactly two gradient evaluations.
    """
    x = np.asarray(x, dtype=float)
    g0 = problem.gradient(x)
    y1 = x - alpha * g0
    g1 = problem.gradient(y1)
    d = y1 - x
    return float(d @ d), float(alpha * (d @ (g1 - g0)))


def _bottom_eigenpair(problem: ObjectiveProblem, x, alpha: float):
    H = np.asarray(problem.hessian(x), dtype=float)
    H = 0.5 * (H + H.T)
    lam, V = np.linalg.eigh(alpha * H)
    V = _fix_signs(V)
    return float(lam[0]), V[:, 0]


def second_order_step(problem: ObjectiveProblem, x, beta: float,
                      radius: Optional[float] = None) -> np.ndarray:
    """Minimum-curvature eigenvector step of length ||grad(x)|| / beta.

    Solves min over the sphere ||x'-x|| = r of the quadratic form
    1/2 (x'-x)^T H (x'-x) with H the (scaled) Hessian at x; the minimizer is
    +-r e_min, sign chosen so <grad(x), step> <= 0. Raises when the smallest
    eigenvalue is nonnegative (no descent curvature; the caller's guard in
    the main loop must prevent this).
    """
    x = np.asarray(x, dtype=float)
    if beta <= 0:
        raise InputError("beta must be positive")
    alpha = 1.0 / problem.constants.L
    lam_min, e = _bottom_eigenpair(problem, x, alpha)
    if lam_min >= 0:
        raise NotDescentDirectionError(
            f"smallest scaled-Hessian eigenvalue {lam_min} is nonnegative")
    g = problem.gradient(x)
    if radius is None:
        radius = float(np.linalg.norm(g)) / beta
    s = 1.0 if float(g @ e) <= 0 else -1.0
    return x + s * radius * e


def ccrgd_run(problem: ObjectiveProblem, x0, config: OptimizerConfig) -> TrajectoryRecord:
    """Curvature-conditioned gradient descent, recording every branch.

    Per iteration: gradient step while ||grad|| > L*eps (resetting the
    condition flag); otherwise, if the flag is clear, probe (V1, V2). A
    mid-window value triggers the eigenvector step directly; a low positive
    value triggers it only if the smallest scaled-Hessian eigenvalue is
    negative, else the run terminates second-order stationary. Any other
    probe outcome falls back to the already-computed gradient step. Every
    probe sets the flag.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _ccrgd_loop(problem, x0, config)


def _ccrgd_loop(problem, x0, config) -> TrajectoryRecord:
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise InputError("x0 must be finite")
    consts = config.constants
    eps = config.eps
    kappa = config.kappa
    p_min = min(max(config.p_min, 0.0), 1.0)
    lo = 4 * eps ** 2 / (27 * kappa ** 2) if eps > 0 else 0.0
    hi = (50 * p_min + 4) / 27 * eps ** 2 / kappa ** 2 if eps > 0 else 0.0

    iterates = [x.copy()]
    values, gnorms, steps, flags = [], [], [], []
    xi = 0
    so_count = 0
    termination = TERM_BUDGET
    for _ in range(config.max_iters):
        g = problem.gradient(x)
        f = problem.value(x)
        if not (np.all(np.isfinite(g)) and np.isfinite(f)):
            termination = TERM_DIVERGED
            break
        gn = float(np.linalg.norm(g))
        values.append(f)
        gnorms.append(gn)
        flags.append(xi)
        if gn < _stop_tol(consts, x, config.stop_tol_scale):
            termination = TERM_FOSP
            break
        if gn > consts.L * eps:
            x = x - config.alpha * g
            steps.append(GD_STEP)
            if xi == 1:
                xi = 0
        elif xi == 1:
            x = x - config.alpha * g
            steps.append(GD_STEP)
        else:
            y1 = x - config.alpha * g
            g1 = problem.gradient(y1)
            d = y1 - x
            v1 = float(d @ d)
            v2 = float(config.alpha * (d @ (g1 - g)))
            dv = v1 - v2
            if lo < dv < hi:
                try:
                    x = second_order_step(problem, x, consts.beta,
                                          radius=_so_radius(config, gn))
                except NotDescentDirectionError:
                    # only reachable with all-positive curvature at x: the
                    # probe overshot its window; certify stationarity
                    steps.append(BREAK_STEP)
                    termination = TERM_SOSP
                    break
                steps.append(SECOND_ORDER_STEP)
                so_count += 1
            elif 0 < dv <= lo:
                lam_min, e = _bottom_eigenpair(problem, x, config.alpha)
                if lam_min < 0:
                    s = 1.0 if float(g @ e) <= 0 else -1.0
                    x = x + s * _so_radius(config, gn) * e
                    steps.append(SECOND_ORDER_STEP)
                    so_count += 1
                else:
                    steps.append(BREAK_STEP)
                    termination = TERM_SOSP
                    xi = 1
                    break
            else:
                x = y1
                steps.append(GD_STEP)
            xi = 1
        iterates.append(x.copy())
        if not np.all(np.isfinite(x)):
            termination = TERM_DIVERGED
            break
    _pad_tail(problem, x, values, gnorms, flags, steps, iterates, termination)
    return TrajectoryRecord(
        iterates=np.asarray(iterates), values=np.asarray(values),
        grad_norms=np.asarray(gnorms), step_types=steps,
        xi_flags=np.asarray(flags, dtype=int), termination=termination,
        second_order_count=so_count)


def _so_radius(config: OptimizerConfig, grad_norm: float) -> float:
    if config.second_order_radius == "1/beta":
        return grad_norm / config.constants.beta
    return grad_norm / config.constants.L


def init_near_saddle(analysis: SaddleAnalysis, eps: float, p: float,
                     seed: int = 0) -> np.ndarray:
    """Point on the eps-sphere around the saddle with unstable projection p.

    Draws unit directions in the stable and unstable eigenspaces from the
    seed and mixes them as sqrt(1-p), sqrt(p). p = 0 lies exactly on the
    stable eigenspace sphere (to the eigendecomposition's accuracy).
    """
    if not 0 <= p <= 1:
        raise InputError("p must lie in [0, 1]")
    if eps <= 0:
        raise InputError("eps must be positive")
    if p > 0 and len(analysis.unstable_set) == 0:
        raise InputError("p > 0 requires a nonempty unstable set")
    if p < 1 and len(analysis.stable_set) == 0:
        raise InputError("p < 1 requires a nonempty stable set")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(_INIT_STREAM,)))
    u = np.zeros(analysis.eigenvalues.size)
    if p < 1:
        cs = rng.standard_normal(len(analysis.stable_set))
        cs *= np.sqrt(1 - p) / np.linalg.norm(cs)
        u += analysis.eigenvectors[:, analysis.stable_set] @ cs
    if p > 0:
        cu = rng.standard_normal(len(analysis.unstable_set))
        cu *= np.sqrt(p) / np.linalg.norm(cu)
        u += analysis.eigenvectors[:, analysis.unstable_set] @ cu
    return analysis.x_star + eps * u


_INIT_STREAM = 404
