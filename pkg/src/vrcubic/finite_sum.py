"""Finite-sum problems F(x) = (1/n) sum_i f_i(x) and their sampled oracles.

A problem bundles per-component value/gradient/Hessian/Hessian-vector
oracles together with smoothness metadata.  Everything downstream (batch
estimators, drivers, diagnostics) goes through the batch_* functions in
this module so that oracle accounting stays in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "FiniteSumProblem",
    "OracleCounter",
    "sample_multiset",
    "batch_value",
    "batch_gradient",
    "batch_hessian",
    "batch_hvp",
    "full_index",
]


@dataclass
class OracleCounter:
    """Running totals of individual component-oracle evaluations.

    Counts are cumulative and only ever increase.  A batch of size B charges
    B calls to the corresponding counter; value evaluations are tracked too
    so diagnostic bookkeeping can stay separate from the stochastic budget.
    """

    grad_calls: int = 0
    hess_calls: int = 0
    hvp_calls: int = 0
    value_calls: int = 0

    def snapshot(self) -> "OracleCounter":
        return OracleCounter(
            self.grad_calls, self.hess_calls, self.hvp_calls, self.value_calls
        )


@dataclass
class FiniteSumProblem:
    """F(x) = (1/n) sum_{i<n} f_i(x) with component oracles.

    Parameters
    ----------
    n, dim : number of components and ambient dimension.
    component_value / component_grad : required oracles, called as (i, x).
    component_hess : optional explicit d x d Hessian oracle.
    component_hvp : optional Hessian-vector oracle, called as (i, x, v).
    lipschitz_grad : L, gradient Lipschitz constant of every f_i.
    lipschitz_hess : rho > 0, Hessian Lipschitz constant of every f_i.
    grad_bound : bound on ||grad f_i(x) - grad F(x)||_2, np.inf if none holds.
    batch_*_fn : optional vectorized kernels computing the multiset mean in
        one shot; must agree with the per-component oracles.  Signature is
        (idx, x) resp. (idx, x, v) with idx an integer array.

    Component indices are 0-based.  When only ``component_hess`` is given,
    Hessian-vector products fall back to a dense multiply.
    """

    n: int
    dim: int
    component_value: Callable[[int, np.ndarray], float]
    component_grad: Callable[[int, np.ndarray], np.ndarray]
    component_hess: Callable[[int, np.ndarray], np.ndarray] | None = None
    component_hvp: Callable[[int, np.ndarray, np.ndarray], np.ndarray] | None = None
    lipschitz_grad: float = 1.0
    lipschitz_hess: float = 1.0
    grad_bound: float = np.inf
    batch_value_fn: Callable[[np.ndarray, np.ndarray], float] | None = None
    batch_grad_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    batch_hess_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    batch_hvp_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = "finite-sum"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError(f"need at least one component, got n={self.n}")
        if self.dim <= 0:
            raise ValueError(f"need positive dimension, got dim={self.dim}")
        if not self.lipschitz_hess > 0:
            raise ValueError("lipschitz_hess must be positive")
        if not self.lipschitz_grad > 0:
            raise ValueError("lipschitz_grad must be positive")


def full_index(problem: FiniteSumProblem) -> np.ndarray:
    """Index array selecting every component once."""
    return np.arange(problem.n)


def sample_multiset(rng: np.random.Generator, n: int, B: int) -> np.ndarray:
    """Draw B component indices uniformly with replacement, sorted ascending.

    B >= n short-circuits to the full index set 0..n-1 and consumes no
    randomness, so full-batch requests stay deterministic and are charged n
    calls, never more.
    """
    if n <= 0:
        raise ValueError(f"cannot sample from n={n} components")
    if B <= 0:
        raise ValueError(f"batch size must be positive, got B={B}")
    if B >= n:
        return np.arange(n)
    idx = rng.integers(0, n, size=B)
    idx.sort()  # fixed reduction order keeps seeded runs bit-reproducible
    return idx


def _check_idx(problem: FiniteSumProblem, idx: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx)
    if idx.size == 0:
        raise ValueError("empty index multiset")
    if idx.min() < 0 or idx.max() >= problem.n:
        raise IndexError(
            f"component index out of range [0, {problem.n}): "
            f"got {int(idx.min())}..{int(idx.max())}"
        )
    return idx


def batch_value(
    problem: FiniteSumProblem,
    x: np.ndarray,
    idx: np.ndarray,
    counter: OracleCounter | None = None,
) -> float:
    """Multiset mean of f_i(x) over idx; charges |idx| value calls."""
    idx = _check_idx(problem, idx)
    if counter is not None:
        counter.value_calls += idx.size
    if problem.batch_value_fn is not None:
        return float(problem.batch_value_fn(idx, x))
    total = 0.0
    for i in idx:
        total += problem.component_value(int(i), x)
    return total / idx.size


def batch_gradient(
    problem: FiniteSumProblem,
    x: np.ndarray,
    idx: np.ndarray,
    counter: OracleCounter | None = None,
) -> np.ndarray:
    """Multiset mean of grad f_i(x) over idx; charges |idx| gradient calls."""
    idx = _check_idx(problem, idx)
    if counter is not None:
        counter.grad_calls += idx.size
    if problem.batch_grad_fn is not None:
        return np.asarray(problem.batch_grad_fn(idx, x), dtype=float)
    acc = np.zeros(problem.dim)
    for i in idx:
        acc += problem.component_grad(int(i), x)
    return acc / idx.size


def batch_hessian(
    problem: FiniteSumProblem,
    x: np.ndarray,
    idx: np.ndarray,
    counter: OracleCounter | None = None,
) -> np.ndarray:
    """Multiset mean of the component Hessians; charges |idx| Hessian calls."""
    idx = _check_idx(problem, idx)
    if problem.batch_hess_fn is None and problem.component_hess is None:
        raise ValueError(f"problem {problem.name!r} has no Hessian oracle")
    if counter is not None:
        counter.hess_calls += idx.size
    if problem.batch_hess_fn is not None:
        return np.asarray(problem.batch_hess_fn(idx, x), dtype=float)
    acc = np.zeros((problem.dim, problem.dim))
    for i in idx:
        acc += problem.component_hess(int(i), x)
    return acc / idx.size


def batch_hvp(
    problem: FiniteSumProblem,
    x: np.ndarray,
    idx: np.ndarray,
    v: np.ndarray,
    counter: OracleCounter | None = None,
) -> np.ndarray:
    """Multiset mean of grad^2 f_i(x) @ v; charges |idx| product calls."""
    idx = _check_idx(problem, idx)
    if counter is not None:
        counter.hvp_calls += idx.size
    if problem.batch_hvp_fn is not None:
        return np.asarray(problem.batch_hvp_fn(idx, x, v), dtype=float)
    if problem.component_hvp is not None:
        acc = np.zeros(problem.dim)
        for i in idx:
            acc += problem.component_hvp(int(i), x, v)
        return acc / idx.size
    if problem.component_hess is not None:
        acc = np.zeros(problem.dim)
        for i in idx:
            acc += problem.component_hess(int(i), x) @ v
        return acc / idx.size
    raise ValueError(f"problem {problem.name!r} has no Hessian-vector oracle")
