"""Eigenstructure at a stationary point and the local linear-dynamics tools.

Covers the stable/unstable splitting of the Hessian at a saddle, grouping of
near-degenerate eigenvalues, projection coefficients of a radial vector, the
directional derivative of the Hessian along a unit ray, its grouped
projection form, short-horizon linearized gradient-descent trajectories
(order 0 and order 1 in the neighborhood radius), and the empirical
expansion factor of the averaged-Hessian map D(x).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DegenerateHessianError, GroupingError, InputError
from .problem import ObjectiveProblem, default_fd_step

__all__ = [
    "SaddleAnalysis",
    "ProjectionCoefficients",
    "LinearizedTrajectory",
    "ExpansionFactor",
    "analyze_saddle",
    "projection_coefficients",
    "directional_hessian_derivative",
    "perturbation_projection",
    "linearized_trajectory",
    "empirical_expansion_factor",
]


@dataclass(frozen=True)
class SaddleAnalysis:
    """Eigendecomposition of the Hessian at x_star with sign split and groups.

    eigenvalues are ascending; eigenvectors[:, i] pairs with eigenvalues[i].
    stable_set / unstable_set index positive / negative eigenvalues. groups
    partitions indices by near-degeneracy; gap_used separates the groups.
    """

    x_star: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    stable_set: np.ndarray
    unstable_set: np.ndarray
    groups: List[np.ndarray]
    gap_used: float


@dataclass(frozen=True)
class ProjectionCoefficients:
    theta_s: np.ndarray
    theta_us: np.ndarray
    unstable_projection: float
    scale: float


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector signs: largest-magnitude component positive."""
    W = V.copy()
    for i in range(W.shape[1]):
        j = int(np.argmax(np.abs(W[:, i])))
        if W[j, i] < 0:
            W[:, i] = -W[:, i]
    return W


def _refine_groups(lam: np.ndarray, gap: float):
    """Sign-first recursive gap scan.

    Split at the sign change and at every consecutive gap exceeding `gap`,
    then keep splitting any group whose diameter is not dominated by the
    separating gap at its own largest internal gap (the recursive step of
    the degeneracy-grouping construction). Terminates because splits only
    shrink diameters; exactly repeated eigenvalues have diameter 0.
    """
    groups: List[np.ndarray] = []
    start = 0
    for i in range(len(lam) - 1):
        if (lam[i] < 0 <= lam[i + 1]) or (lam[i + 1] - lam[i] > gap):
            groups.append(np.arange(start, i + 1))
            start = i + 1
    groups.append(np.arange(start, len(lam)))

    while True:
        diam = max(float(lam[g[-1]] - lam[g[0]]) for g in groups)
        if len(groups) > 1:
            inter = min(float(lam[groups[k + 1][0]] - lam[groups[k][-1]])
                        for k in range(len(groups) - 1))
        else:
            inter = np.inf
        gap_used = min(gap, inter)
        if diam < gap_used:
            return groups, gap_used
        # split the widest group at its largest internal gap
        worst = max(groups, key=lambda g: float(lam[g[-1]] - lam[g[0]]))
        internal = np.diff(lam[worst])
        if internal.size == 0 or float(np.max(internal)) <= 0:
            raise GroupingError(
                f"cannot separate eigenvalue groups: diameter {diam:.3e} with "
                "no internal gap to split at")
        cut = int(np.argmax(internal)) + 1
        idx = next(i for i, g in enumerate(groups) if g is worst)
        groups[idx:idx + 1] = [worst[:cut], worst[cut:]]


def analyze_saddle(problem: ObjectiveProblem, x_star, gap: float) -> SaddleAnalysis:
    """Eigendecompose the Hessian at a stationary point and group its spectrum.

    Grouping first splits by sign, then recursively at consecutive gaps,
    refining until every intra-group diameter sits below the separating
    gap. Raises if x_star is not stationary or if an eigenvalue is
    numerically zero.
    """
    x_star = np.asarray(x_star, dtype=float)
    consts = problem.constants
    gnorm = float(np.linalg.norm(problem.gradient(x_star)))
    if gnorm >= 1e-8 * consts.L:
        raise InputError(
            f"x_star is not stationary: ||grad|| = {gnorm:.3e} >= 1e-8*L")
    H = np.asarray(problem.hessian(x_star), dtype=float)
    H = 0.5 * (H + H.T)
    lam, V = np.linalg.eigh(H)
    V = _fix_signs(V)
    hnorm = float(np.max(np.abs(lam)))
    if np.min(np.abs(lam)) < 1e-10 * hnorm:
        raise DegenerateHessianError(
            "Hessian has a numerically zero eigenvalue at x_star "
            "(well-conditioned stationary point assumption violated)")
    stable = np.nonzero(lam > 0)[0]
    unstable = np.nonzero(lam < 0)[0]
    groups, gap_used = _refine_groups(lam, gap)
    return SaddleAnalysis(
        x_star=x_star, eigenvalues=lam, eigenvectors=V,
        stable_set=stable, unstable_set=unstable, groups=groups,
        gap_used=gap_used)


def projection_coefficients(u0, analysis: SaddleAnalysis) -> ProjectionCoefficients:
    """Coefficients of u0 in the eigenbasis, normalized by ||u0||."""
    u0 = np.asarray(u0, dtype=float)
    norm = float(np.linalg.norm(u0))
    if norm == 0:
        raise InputError("u0 must be nonzero")
    theta = (analysis.eigenvectors.T @ u0) / norm
    theta_us = theta[analysis.unstable_set]
    return ProjectionCoefficients(
        theta_s=theta[analysis.stable_set],
        theta_us=theta_us,
        unstable_projection=float(np.sum(theta_us ** 2)),
        scale=norm)


def directional_hessian_derivative(problem: ObjectiveProblem, x_star, u_hat,
                                   h: Optional[float] = None) -> np.ndarray:
    """Directional derivative of the Hessian at x_star along unit u_hat.

    Central difference (H(x*+h u) - H(x*-h u)) / (2h), symmetrized. This is
    the leading curvature-variation matrix: H(x*+w u) = H(x*) + w * D + O(w^2).
    """
    x_star = np.asarray(x_star, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    if abs(np.linalg.norm(u_hat) - 1.0) > 1e-10:
        raise InputError("u_hat must be a unit vector")
    if h is None:
        h = default_fd_step(x_star)
    if h <= 0:
        raise InputError("h must be positive")
    Hp = np.asarray(problem.hessian(x_star + h * u_hat), dtype=float)
    Hm = np.asarray(problem.hessian(x_star - h * u_hat), dtype=float)
    D = (Hp - Hm) / (2 * h)
    return 0.5 * (D + D.T)


def perturbation_projection(H_u: np.ndarray, analysis: SaddleAnalysis) -> np.ndarray:
    """Grouped projection of a curvature-variation matrix onto the eigenbasis.

    Diagonal terms <v_i, H v_i> v_i v_i^T plus, for every l outside i's
    degeneracy group, the cross term weighted by lambda_i <v_l, H v_i> /
    (lambda_i - lambda_l), symmetrized.
    """
    H_u = np.asarray(H_u, dtype=float)
    lam = analysis.eigenvalues
    V = analysis.eigenvectors
    n = lam.size
    group_of = np.empty(n, dtype=int)
    for gi, g in enumerate(analysis.groups):
        group_of[g] = gi
    HV = H_u @ V
    coeff = V.T @ HV  # coeff[l, i] = <v_l, H v_i>
    out = np.zeros_like(H_u)
    for i in range(n):
        vi = V[:, i]
        out += coeff[i, i] * np.outer(vi, vi)
        for l in range(n):
            if group_of[l] == group_of[i]:
                continue
            if lam[i] == lam[l]:
                raise GroupingError(
                    f"equal eigenvalues {lam[i]} across groups {group_of[i]} "
                    f"and {group_of[l]}")
            w = lam[i] * coeff[l, i] / (lam[i] - lam[l])
            out += w * (np.outer(V[:, l], vi) + np.outer(vi, V[:, l]))
    return out


@dataclass(frozen=True)
class LinearizedTrajectory:
    """Predicted radial vectors u_1..u_K and a validity flag.

    valid is False when K * ||u0|| > 0.5 (the short-horizon expansion is
    used outside its regime); the prediction is still returned.
    """

    points: np.ndarray  # shape (K, n)
    order: int
    valid: bool

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def linearized_trajectory(problem: ObjectiveProblem, analysis: SaddleAnalysis,
                          u0, K: int, order: int = 0) -> LinearizedTrajectory:
    """Short-horizon prediction of gradient descent around the saddle.

    Order 0 iterates u_{k+1} = (I - H*/L) u_k. Order 1 adds the first-order
    correction obtained by replacing one propagation factor with the
    curvature-variation term -(||u_r|| / (2L)) * D(u_r / ||u_r||), where the
    direction is re-derived from the running order-0 iterate.
    """
    if K < 1:
        raise InputError("K must be >= 1")
    if order not in (0, 1):
        raise InputError("order must be 0 or 1")
    u0 = np.asarray(u0, dtype=float)
    L = problem.constants.L
    H = np.asarray(problem.hessian(analysis.x_star), dtype=float)
    A = np.eye(problem.n) - 0.5 * (H + H.T) / L
    valid = K * float(np.linalg.norm(u0)) <= 0.5

    base = np.empty((K + 1, problem.n))
    base[0] = u0
    for k in range(K):
        base[k + 1] = A @ base[k]
    if order == 0:
        return LinearizedTrajectory(points=base[1:], order=0, valid=valid)

    pts = np.empty((K, problem.n))
    corr = np.zeros(problem.n)
    for k in range(K):
        ur = base[k]
        nur = float(np.linalg.norm(ur))
        if nur > 0:
            D = directional_hessian_derivative(problem, analysis.x_star, ur / nur)
            kick = -(nur / (2 * L)) * (D @ ur)
        else:
            kick = np.zeros(problem.n)
        corr = A @ corr + kick
        pts[k] = base[k + 1] + corr
    return LinearizedTrajectory(points=pts, order=1, valid=valid)


@dataclass(frozen=True)
class ExpansionFactor:
    rho_bar: float
    d_spectrum: np.ndarray
    contraction_to_zero: bool


def empirical_expansion_factor(problem: ObjectiveProblem, x_star, x,
                               quadrature_points: int = 8) -> ExpansionFactor:
    """Expansion factor rho_bar(x) of the averaged linearized map.

    D(x) = I - (1/L) * integral_0^1 H(x* + p (x - x*)) dp by composite
    Simpson quadrature with `quadrature_points` panels;
    rho_bar = sqrt(<u, D^4 u>) / sqrt(<u, D^2 u>) for the unit radial
    direction u. When <u, D^2 u> vanishes the factor is undefined and the
    contraction_to_zero flag is set (rho_bar = nan).
    """
    if quadrature_points < 2:
        raise InputError("quadrature_points must be >= 2")
    x_star = np.asarray(x_star, dtype=float)
    x = np.asarray(x, dtype=float)
    u = x - x_star
    norm = float(np.linalg.norm(u))
    if norm == 0:
        raise InputError("x must differ from x_star")
    uh = u / norm
    m = 2 * quadrature_points
    ps = np.linspace(0.0, 1.0, m + 1)
    weights = np.ones(m + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    acc = np.zeros((problem.n, problem.n))
    for w, p in zip(weights, ps):
        acc += w * np.asarray(problem.hessian(x_star + p * u), dtype=float)
    integral = acc / (3 * m)
    D = np.eye(problem.n) - integral / problem.constants.L
    D = 0.5 * (D + D.T)
    d2 = float(uh @ (D @ (D @ uh)))
    d4 = float(np.linalg.norm(D @ (D @ uh)) ** 2)
    spectrum = np.linalg.eigvalsh(D)
    if d2 <= 0 or d2 < 1e-300:
        return ExpansionFactor(rho_bar=float("nan"), d_spectrum=spectrum,
                               contraction_to_zero=True)
    return ExpansionFactor(rho_bar=float(np.sqrt(d4) / np.sqrt(d2)),
                           d_spectrum=spectrum, contraction_to_zero=False)
