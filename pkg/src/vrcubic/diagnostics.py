"""Certification of approximate second-order stationarity.

The quality measure for a point x is

    mu(x) = max( ||grad F(x)||^{3/2}on,  max(0, -lambda_min(hess F(x)))^3 / rho^{3/2} )

so mu(x) <= eps^{3/2} exactly when the gradient is eps-small and the Hessian
has no eigenvalue below -sqrt(rho * eps).  Only negative curvature enters the
second term; a strongly convex Hessian contributes zero regardless of scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .finite_sum import (
    FiniteSumProblem,
    OracleCounter,
    batch_gradient,
    batch_hessian,
    batch_hvp,
    batch_value,
    full_index,
)

__all__ = [
    "EigensolverError",
    "LocalMinCertificate",
    "min_eigenvalue",
    "mu_criterion",
    "certify_local_min",
    "finite_diff_grad_check",
]


class EigensolverError(RuntimeError):
    """Iterative eigenvalue computation failed to converge."""


@dataclass(frozen=True)
class LocalMinCertificate:
    grad_norm: float
    lambda_min: float
    mu: float
    eps_g: float
    eps_H: float


def min_eigenvalue(
    H: np.ndarray,
    tol: float = 1e-10,
    dense_limit: int = 2000,
    max_iters: int = 200_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Dense eigendecomposition up to dense_limit rows; above that, power
    iteration on the positive-definite shift c*I - H (c = max absolute column
    sum, which dominates the spectral radius).  The iterative path stops when
    the eigenpair residual drops below tol * max|H_ij|; that entrywise max is
    a certified lower bound on the spectral norm, so the returned value is
    within tol * ||H||_2 of the true eigenvalue.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = float(np.max(np.abs(H))) if H.size else 0.0
    if not np.allclose(H, H.T, atol=1e-8 * (1.0 + scale)):
        raise ValueError("matrix is not symmetric")
    H = 0.5 * (H + H.T)
    d = H.shape[0]
    if d <= dense_limit:
        return float(np.linalg.eigvalsh(H)[0])
    if scale == 0.0:
        return 0.0
    c = float(np.max(np.abs(H).sum(axis=0)))
    rng = rng if rng is not None else np.random.default_rng(0)
    q = rng.standard_normal(d)
    q /= np.linalg.norm(q)
    for k in range(max_iters):
        z = c * q - H @ q
        theta = float(q @ z)
        resid = float(np.linalg.norm(z - theta * q))
        if resid <= tol * scale:
            return c - theta
        nz = float(np.linalg.norm(z))
        if nz == 0.0:  # q is exactly in the nullspace of the shifted matrix
            return c - theta
        q = z / nz
    raise EigensolverError(f"power iteration did not converge in {max_iters} steps")


def _has_hessian(problem: FiniteSumProblem) -> bool:
    return problem.component_hess is not None or problem.batch_hess_fn is not None


def _lambda_min_via_hvp(
    problem: FiniteSumProblem,
    x: np.ndarray,
    counter: OracleCounter,
    tol: float,
) -> float:
    full = full_index(problem)
    d = problem.dim
    if d == 1:
        e = np.ones(1)
        return float(batch_hvp(problem, x, full, e, counter)[0])
    op = LinearOperator(
        (d, d),
        matvec=lambda v: batch_hvp(problem, x, full, np.asarray(v, dtype=float).ravel(), counter),
        dtype=float,
    )
    try:
        vals = eigsh(op, k=1, which="SA", tol=tol, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise EigensolverError("Lanczos smallest-eigenvalue solve did not converge") from exc
    return float(vals[0])


def _mu_parts(
    problem: FiniteSumProblem,
    x: np.ndarray,
    rho: float,
    counter: OracleCounter,
    dense_limit: int,
    eig_tol: float,
) -> tuple[float, float, float]:
    """(mu, grad_norm, lambda_min) at x, using full-batch oracles."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    x = np.asarray(x, dtype=float)
    full = full_index(problem)
    g = batch_gradient(problem, x, full, counter)
    grad_norm = float(np.linalg.norm(g))
    if _has_hessian(problem) and problem.dim <= dense_limit:
        H = batch_hessian(problem, x, full, counter)
        lam = min_eigenvalue(H, tol=eig_tol, dense_limit=dense_limit)
    else:
        lam = _lambda_min_via_hvp(problem, x, counter, eig_tol)
    mu = max(grad_norm**1.5, max(0.0, -lam) ** 3 / rho**1.5)
    return mu, grad_norm, lam


def mu_criterion(
    problem: FiniteSumProblem,
    x: np.ndarray,
    rho: float,
    counter: OracleCounter | None = None,
    dense_limit: int = 2000,
    eig_tol: float = 1e-10,
) -> float:
    """Stationarity measure at x; zero exactly at second-order stationary points.

    Charges one full gradient pass plus one full Hessian (or a run of
    Hessian-vector products) to counter, which should be a diagnostics
    counter, not the one used for algorithm accounting.
    """
    counter = counter if counter is not None else OracleCounter()
    mu, _, _ = _mu_parts(problem, x, rho, counter, dense_limit, eig_tol)
    return mu


def certify_local_min(
    problem: FiniteSumProblem,
    x: np.ndarray,
    eps: float,
    rho: float,
    c: float = 600.0,
    counter: OracleCounter | None = None,
    dense_limit: int = 2000,
    eig_tol: float = 1e-10,
) -> tuple[bool, LocalMinCertificate]:
    """Check mu(x) <= c * eps^{3/2} and report the measured quantities.

    A True verdict certifies an (eps, sqrt(rho*eps))-approximate local
    minimum up to the constant c.
    """
    if not c > 0:
        raise ValueError("guarantee constant c must be positive")
    if not eps > 0:
        raise ValueError("eps must be positive")
    counter = counter if counter is not None else OracleCounter()
    mu, grad_norm, lam = _mu_parts(problem, x, rho, counter, dense_limit, eig_tol)
    cert = LocalMinCertificate(
        grad_norm=grad_norm,
        lambda_min=lam,
        mu=mu,
        eps_g=eps,
        eps_H=math.sqrt(rho * eps),
    )
    return mu <= c * eps**1.5, cert


def finite_diff_grad_check(problem: FiniteSumProblem, x: np.ndarray, step: float = 1e-6) -> float:
    """Max over coordinates of |central difference - analytic| / (1 + |analytic|).

    Uses full-batch value and gradient oracles; counts are kept local since
    this is a verification utility, not part of any algorithm's budget.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    counter = OracleCounter()
    full = full_index(problem)
    g = batch_gradient(problem, x, full, counter)
    worst = 0.0
    for i in range(problem.dim):
        e = np.zeros(problem.dim)
        e[i] = step
        fp = batch_value(problem, x + e, full, counter)
        fm = batch_value(problem, x - e, full, counter)
        fd = (fp - fm) / (2.0 * step)
        worst = max(worst, abs(fd - g[i]) / (1.0 + abs(g[i])))
    return worst
