"""Smooth objectives with exact derivatives, benchmark constructors, and
estimators for the smoothness constants.

A problem bundles f, its gradient and Hessian with the constants (L, M, beta,
delta) that the bound calculators and the optimizer consume. Benchmarks:

* a modified Rastrigin-type cosine sum with a known strict saddle at the
  origin,
* a regularized low-rank matrix factorization over the stacked variable
  X = [X1; X2], vectorized column-major so the Hessian is an ordinary
  matrix assembled from Kronecker products,
* diagonal quadratics (test oracle workhorse).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import EstimationError, InputError, NumericError

__all__ = [
    "SmoothnessConstants",
    "ObjectiveProblem",
    "evaluate",
    "make_rastrigin",
    "make_matrix_factorization",
    "make_quadratic",
    "finite_difference_check",
    "estimate_constants",
    "estimate_gamma",
    "default_fd_step",
    "gap_scan_delta",
]


@dataclass(frozen=True)
class SmoothnessConstants:
    """Gradient/Hessian Lipschitz constants and the saddle spectrum floor.

    L and M are (upper bounds on) the gradient and Hessian Lipschitz
    constants, beta lower-bounds the absolute Hessian eigenvalues at
    stationary points, delta is the spectral gap between degeneracy groups.
    kappa = beta / L is derived. M = 0 is allowed (exact quadratics); the
    bound calculators that need M > 0 raise on their own.
    """

    L: float
    M: float
    beta: float
    delta: float
    kappa: float = field(init=False)

    def __post_init__(self):
        if not (0 < self.beta <= self.L):
            raise InputError(f"need 0 < beta <= L, got beta={self.beta}, L={self.L}")
        if self.M < 0:
            raise InputError(f"M must be >= 0, got {self.M}")
        if not (0 < self.delta <= 2 * self.beta):
            raise InputError(
                f"need 0 < delta <= 2*beta (beta >= delta/2), got delta={self.delta}, "
                f"beta={self.beta}")
        object.__setattr__(self, "kappa", self.beta / self.L)


@dataclass(frozen=True)
class ObjectiveProblem:
    """A smooth objective with exact value/gradient/Hessian callables."""

    n: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    constants: SmoothnessConstants
    label: str
    known_saddle: Optional[np.ndarray] = None

    def with_constants(self, constants: SmoothnessConstants) -> "ObjectiveProblem":
        """Copy of the problem with user-supplied constants."""
        return replace(self, constants=constants)


def _check_point(problem: ObjectiveProblem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise InputError(f"point has shape {x.shape}, expected ({problem.n},)")
    return x


def evaluate(problem: ObjectiveProblem, x, order: int = 2):
    """Evaluate (value, gradient, hessian) up to the requested order.

    Returns a tuple whose gradient entry is present iff order >= 1 and whose
    hessian entry is present iff order == 2 (absent entries are None). The
    Hessian is symmetrized; non-finite outputs raise NumericError naming the
    offending coordinate.
    """
    if order not in (0, 1, 2):
        raise InputError(f"order must be 0, 1 or 2, got {order}")
    x = _check_point(problem, x)
    val = float(problem.value(x))
    if not np.isfinite(val):
        raise NumericError(f"objective value is {val} at x={x}")
    grad = hess = None
    if order >= 1:
        grad = np.asarray(problem.gradient(x), dtype=float)
        bad = np.nonzero(~np.isfinite(grad))[0]
        if bad.size:
            raise NumericError(f"gradient non-finite at coordinate {bad[0]}")
    if order == 2:
        hess = np.asarray(problem.hessian(x), dtype=float)
        bad = np.argwhere(~np.isfinite(hess))
        if bad.size:
            raise NumericError(f"hessian non-finite at entry {tuple(bad[0])}")
        hess = 0.5 * (hess + hess.T)
    return val, grad, hess


def gap_scan_delta(eigenvalues, gap_tol: float) -> float:
    """Spectral gap from a sign-first recursive gap scan, capped at 2*min|λ|.

    Eigenvalues are sorted, split at the sign change, then split wherever a
    consecutive gap within a sign block exceeds gap_tol; the returned delta
    is the smallest inter-group distance, capped at 2*beta so the constants
    stay consistent with beta >= delta/2. Callers tracking a detection
    radius eps conventionally pass gap_tol = sqrt(eps).
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    beta = float(np.min(np.abs(lam)))
    boundaries = []
    for i in range(len(lam) - 1):
        if (lam[i] < 0 <= lam[i + 1]) or (lam[i + 1] - lam[i] > gap_tol):
            boundaries.append(lam[i + 1] - lam[i])
    if not boundaries:
        return 2 * beta
    return min(min(boundaries), 2 * beta)


# ---------------------------------------------------------------------------
# benchmarks


def make_rastrigin(n: int, gap_tol: float = 1e-6) -> ObjectiveProblem:
    """Modified Rastrigin-type benchmark f(x) = sum_i a_i cos(b_i x_i).

    a_1 = 1 and a_i = -1 otherwise; b_i = 1 for the first floor(n/2)
    coordinates and 0.4 for the rest. The origin is a strict saddle with
    Hessian diag(-a_i b_i^2). Constants: L and M are the analytic bounds
    sum|a_i b_i| and sum|a_i b_i^2|; beta and delta come from the exact
    spectrum at the origin (delta by gap scan). Override with
    estimate_constants or with_constants to mimic estimated-L step sizes.
    """
    if n < 2:
        raise InputError("need n >= 2 (no stable direction otherwise)")
    a = np.where(np.arange(n) == 0, 1.0, -1.0)
    b = np.where(np.arange(n) < n // 2, 1.0, 0.4)

    def value(x):
        return float(np.sum(a * np.cos(b * x)))

    def gradient(x):
        return -a * b * np.sin(b * x)

    def hessian(x):
        return np.diag(-a * b * b * np.cos(b * x))

    spectrum = -a * b * b
    constants = SmoothnessConstants(
        L=float(np.sum(np.abs(a * b))),
        M=float(np.sum(np.abs(a * b * b))),
        beta=float(np.min(np.abs(spectrum))),
        delta=gap_scan_delta(spectrum, gap_tol),
    )
    return ObjectiveProblem(
        n=n, value=value, gradient=gradient, hessian=hessian,
        constants=constants, label=f"rastrigin(n={n})",
        known_saddle=np.zeros(n))


def _commutation_matrix(m: int, n: int) -> np.ndarray:
    """K with K @ vec(A) = vec(A.T) for A of shape (m, n), column-major vec."""
    K = np.zeros((m * n, m * n))
    for i in range(m):
        for j in range(n):
            K[i * n + j, j * m + i] = 1.0
    return K


def make_matrix_factorization(n1: int, n2: int, r: int, w1: float = 0.5,
                              w2: float = 0.5, rho: float = 0.5,
                              seed: int = 0) -> ObjectiveProblem:
    """Low-rank factorization benchmark on the stacked variable X = [X1; X2].

    f(X) = 1/4 ||Mdata - X1 X2^T||_F^2 + w1 ||X1||_F^2 + w2 ||X2||_F^2 with
    X1 = B1 X, X2 = B2 X, flattened column-major to a vector of length
    (n1+n2)*r. Mdata = U1 U2^T + rho^2 * N with standard-normal entries drawn
    deterministically from the seed. The all-zero X is a strict saddle
    whenever the origin Hessian is indefinite; if the drawn data is not
    indefinite, the label is flagged and known_saddle is left unset.
    """
    if r > min(n1, n2):
        raise InputError(f"rank r={r} exceeds min(n1, n2)={min(n1, n2)}")
    if w1 < 0 or w2 < 0:
        raise InputError("regularization weights must be nonnegative")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(_MF_DATA_STREAM,)))
    U1 = rng.standard_normal((n1, r))
    U2 = rng.standard_normal((n2, r))
    N = rng.standard_normal((n1, n2))
    Mdata = U1 @ U2.T + rho * rho * N
    return _matrix_factorization_from_data(Mdata, n1, n2, r, w1, w2,
                                           label_extra=f"seed={seed}")


_MF_DATA_STREAM = 101


def _matrix_factorization_from_data(Mdata, n1, n2, r, w1, w2, label_extra=""):
    Mdata = np.asarray(Mdata, dtype=float)
    nrow = n1 + n2
    dim = nrow * r
    B1 = np.hstack([np.eye(n1), np.zeros((n1, n2))])
    B2 = np.hstack([np.zeros((n2, n1)), np.eye(n2)])
    P1 = B1.T @ B1
    P2 = B2.T @ B2
    C = B1.T @ Mdata @ B2
    Csym = C + C.T
    Ir = np.eye(r)
    In = np.eye(nrow)
    Knr = _commutation_matrix(nrow, r)
    reg = 2 * np.kron(Ir, w1 * P1 + w2 * P2)

    def unstack(xv):
        return xv.reshape((nrow, r), order="F")

    def value(xv):
        X = unstack(xv)
        R = Mdata - B1 @ X @ X.T @ B2.T
        return float(0.25 * np.sum(R * R) + w1 * np.sum((B1 @ X) ** 2)
                     + w2 * np.sum((B2 @ X) ** 2))

    def gradient(xv):
        X = unstack(xv)
        G = (0.5 * (P1 @ X @ X.T @ P2 + P2 @ X @ X.T @ P1) @ X
             - 0.5 * Csym @ X + 2 * w1 * P1 @ X + 2 * w2 * P2 @ X)
        return G.reshape(-1, order="F")

    def hessian(xv):
        # Kronecker assembly of the vectorized Jacobian of the gradient; the
        # dX^T product terms carry the commutation matrix K_{n,r}.
        X = unstack(xv)
        J1 = (np.kron(X.T @ P2 @ X, P1)
              + np.kron(X.T @ P2, P1 @ X) @ Knr
              + np.kron(Ir, P1 @ X @ X.T @ P2))
        J2 = (np.kron(X.T @ P1 @ X, P2)
              + np.kron(X.T @ P1, P2 @ X) @ Knr
              + np.kron(Ir, P2 @ X @ X.T @ P1))
        return 0.5 * (J1 + J2) - 0.5 * np.kron(Ir, Csym) + reg

    h0 = hessian(np.zeros(dim))
    eig0 = np.linalg.eigvalsh(h0)
    indefinite = eig0[0] < 0 < eig0[-1]
    L = float(np.max(np.abs(eig0)))
    beta = float(np.min(np.abs(eig0)))
    # Hessian Lipschitz constant is local; seed a usable value from the
    # curvature variation on the unit ball around the origin.
    M_est = _mf_hessian_lipschitz(hessian, dim)
    label = f"matrix_factorization(n1={n1},n2={n2},r={r},{label_extra})"
    if not indefinite:
        label += "[origin-not-indefinite: saddle diagnostics disabled]"
    constants = SmoothnessConstants(
        L=L, M=M_est, beta=beta, delta=gap_scan_delta(eig0, gap_tol=1e-6))
    return ObjectiveProblem(
        n=dim, value=value, gradient=gradient, hessian=hessian,
        constants=constants, label=label,
        known_saddle=np.zeros(dim) if indefinite else None)


def _mf_hessian_lipschitz(hessian, dim, samples=8):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=0, spawn_key=(7,)))
    h0 = hessian(np.zeros(dim))
    worst = 0.0
    for _ in range(samples):
        d = rng.standard_normal(dim)
        d /= np.linalg.norm(d)
        worst = max(worst, float(np.linalg.norm(hessian(d) - h0, 2)))
    return worst


def make_quadratic(eigenvalues, constants: Optional[SmoothnessConstants] = None,
                   rotate_seed: Optional[int] = None) -> ObjectiveProblem:
    """Quadratic 1/2 x^T A x with the given spectrum; exact test oracle.

    With rotate_seed the spectrum is conjugated by a random orthogonal matrix,
    otherwise A is diagonal. Default constants: L = max|λ| (nominal M = 1 so
    the bound formulas stay exercisable; the true Hessian variation is 0).
    """
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    if n < 1 or np.any(lam == 0):
        raise InputError("eigenvalues must be nonzero")
    if rotate_seed is None:
        A = np.diag(lam)
    else:
        rng = np.random.default_rng(rotate_seed)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = Q @ np.diag(lam) @ Q.T
        A = 0.5 * (A + A.T)
    if constants is None:
        constants = SmoothnessConstants(
            L=float(np.max(np.abs(lam))), M=1.0,
            beta=float(np.min(np.abs(lam))),
            delta=gap_scan_delta(lam, gap_tol=1e-6))

    def value(x):
        return float(0.5 * x @ (A @ x))

    def gradient(x):
        return A @ x

    def hessian(x):
        return A.copy()

    saddle = np.zeros(n) if (lam.min() < 0 < lam.max()) else None
    return ObjectiveProblem(
        n=n, value=value, gradient=gradient, hessian=hessian,
        constants=constants, label=f"quadratic(spectrum={lam.tolist()})",
        known_saddle=saddle)


# ---------------------------------------------------------------------------
# derivative checking and constant estimation


def default_fd_step(x) -> float:
    """Central-difference step: eps_machine^(1/3) * (1 + ||x||_inf)."""
    return float(np.finfo(float).eps ** (1 / 3) * (1 + np.max(np.abs(x), initial=0.0)))


def finite_difference_check(problem: ObjectiveProblem, x, h: Optional[float] = None):
    """Compare analytic gradient/Hessian against central differences.

    Report-only: returns a dict with max_grad_rel_err and max_hess_rel_err
    (entrywise errors relative to the largest finite-difference magnitude).
    """
    x = _check_point(problem, x)
    if h is None:
        h = default_fd_step(x)
    if h <= 0:
        raise InputError(f"step h must be positive, got {h}")
    n = problem.n
    grad = np.asarray(problem.gradient(x), dtype=float)
    hess = 0.5 * (np.asarray(problem.hessian(x)) + np.asarray(problem.hessian(x)).T)
    g_fd = np.zeros(n)
    H_fd = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g_fd[i] = (problem.value(x + e) - problem.value(x - e)) / (2 * h)
        H_fd[:, i] = (problem.gradient(x + e) - problem.gradient(x - e)) / (2 * h)
    H_fd = 0.5 * (H_fd + H_fd.T)
    g_scale = max(np.max(np.abs(g_fd)), 1e-12)
    h_scale = max(np.max(np.abs(H_fd)), 1e-12)
    return {
        "max_grad_rel_err": float(np.max(np.abs(grad - g_fd)) / g_scale),
        "max_hess_rel_err": float(np.max(np.abs(hess - H_fd)) / h_scale),
    }


def estimate_constants(problem: ObjectiveProblem, center, radius: float,
                       samples: int, seed: int = 0,
                       gap_tol: float = 1e-6) -> SmoothnessConstants:
    """Sample-based (heuristic) smoothness constants in a ball.

    L is the largest absolute Hessian eigenvalue seen, M the largest
    ||H(x)-H(y)||_2 / ||x-y|| over sampled pairs, beta the smallest absolute
    eigenvalue seen, delta from a gap scan at the center. L and M are lower
    bounds of the true constants and beta an upper bound of the true floor;
    treat them the way the experiments do, not as certified values.
    """
    if samples < 1:
        raise InputError("samples must be >= 1")
    if radius <= 0:
        raise InputError("radius must be positive")
    center = _check_point(problem, center)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(_EST_STREAM,)))
    pts = [center]
    for _ in range(samples):
        d = rng.standard_normal(problem.n)
        d *= radius * rng.random() ** (1 / problem.n) / np.linalg.norm(d)
        pts.append(center + d)
    hessians = [0.5 * (np.asarray(problem.hessian(p)) + np.asarray(problem.hessian(p)).T)
                for p in pts]
    eigs = [np.linalg.eigvalsh(H) for H in hessians]
    L = max(float(np.max(np.abs(e))) for e in eigs)
    beta = min(float(np.min(np.abs(e))) for e in eigs)
    M = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            dist = np.linalg.norm(pts[i] - pts[j])
            if dist > 1e-14:
                M = max(M, float(np.linalg.norm(hessians[i] - hessians[j], 2)) / dist)
    delta = gap_scan_delta(eigs[0], gap_tol)
    delta = min(delta, 2 * beta)
    return SmoothnessConstants(L=L, M=M, beta=beta, delta=delta)


_EST_STREAM = 202


def estimate_gamma(problem: ObjectiveProblem, domain_box, excluded_centers,
                   xi: float, samples: int, seed: int = 0) -> float:
    """Monte Carlo gradient floor outside xi-balls around excluded centers.

    domain_box is a pair (lo, hi) of length-n vectors; samples points are
    drawn uniformly and rejected within xi of any excluded center. Returns
    the minimum sampled gradient norm. Raises EstimationError if every
    sample was rejected.
    """
    if xi <= 0:
        raise InputError("xi must be positive")
    if samples < 1:
        raise InputError("samples must be >= 1")
    lo = np.asarray(domain_box[0], dtype=float)
    hi = np.asarray(domain_box[1], dtype=float)
    if lo.shape != (problem.n,) or hi.shape != (problem.n,):
        raise InputError("domain_box must be a pair of length-n vectors")
    centers = [np.asarray(c, dtype=float) for c in excluded_centers]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(_GAMMA_STREAM,)))
    best = np.inf
    accepted = 0
    for _ in range(samples):
        x = lo + (hi - lo) * rng.random(problem.n)
        if any(np.linalg.norm(x - c) < xi for c in centers):
            continue
        accepted += 1
        best = min(best, float(np.linalg.norm(problem.gradient(x))))
    if accepted == 0:
        raise EstimationError("all samples fell inside excluded xi-balls")
    return best


_GAMMA_STREAM = 303
