"""Alternating estimation of (B, Omega): residual covariance, Omega update,
B update, repeated until the joint objective stops changing.

The joint objective is

    -n sum_j log w_jj + 1/2 tr((Y - XB)^T (Y - XB) W^2)
        + lambda1 ||B||_1 + n lambda2 sum_{j<k} |w_jk|   (+ inf if W not in C)

which divided by n (with lambda1 = 0) is the per-sample Omega subproblem,
so both updates are descent steps on it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cconcord import cconcord_fit
from .concord import concord_fit
from .constraints import as_constraint
from .core import DomainError, SolverOptions, off_diag, symmetrize, upper_l1
from .regression import b_update


@dataclass
class FitResult:
    B: np.ndarray
    omega: np.ndarray
    objective_trace: list = field(default_factory=list)
    outer_iters: int = 0
    converged: bool = False
    lambda1: float = 0.0
    lambda2: float = 0.0
    constraint_id: str = "unconstrained"
    min_diag: float = np.inf

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.B


def residual_cov(data, B):
    """``(Y - XB)^T (Y - XB) / n``, exactly symmetric."""
    B = np.asarray(B, dtype=float)
    if B.shape != (data.p, data.q):
        raise ValueError(f"B has shape {B.shape}, expected {(data.p, data.q)}")
    R = data.Y - data.X @ B
    return symmetrize(R.T @ R / data.n)


def full_objective(data, B, omega, lam1, lam2, C=None):
    omega = np.asarray(omega, dtype=float)
    B = np.asarray(B, dtype=float)
    d = np.diag(omega)
    if np.any(d <= 0):
        raise DomainError("diagonal of omega must be strictly positive")
    if not as_constraint(C).contains(off_diag(omega)):
        return np.inf
    R = data.Y - data.X @ B
    RW = R @ omega
    n = data.n
    return float(
        -n * np.log(d).sum()
        + 0.5 * np.sum(RW * RW)
        + lam1 * np.abs(B).sum()
        + n * lam2 * upper_l1(omega)
    )


def _alternate(data, lam1, lam2, C, opts, omega_step):
    if lam1 < 0 or lam2 < 0:
        raise ValueError("penalties must be nonnegative")
    if data.n < 2:
        raise ValueError("need at least two samples")
    opts = opts or SolverOptions()

    B = np.zeros((data.p, data.q))
    omega = None
    dual = None
    trace = []
    min_diag = np.inf
    converged = False
    it = 0
    for it in range(1, opts.max_outer_iter + 1):
        S = residual_cov(data, B)
        sub = omega_step(S, omega, dual)
        omega, dual = sub.omega, sub.dual
        min_diag = min(min_diag, sub.min_diag)
        B = b_update(data, omega, lam1, B_init=B, opts=opts).B
        F = full_objective(data, B, omega, lam1, lam2, C)
        trace.append(F)
        if it > 1 and abs(trace[-2] - F) <= opts.tol_rel * max(abs(trace[-2]), 1.0):
            converged = True
            break

    return FitResult(
        B=B,
        omega=omega,
        objective_trace=trace,
        outer_iters=it,
        converged=converged,
        lambda1=float(lam1),
        lambda2=float(lam2),
        constraint_id=C.id,
        min_diag=min_diag,
    )


def fit_concord_mrce(data, lam1, lam2, opts=None):
    """Alternating fit with the unconstrained CONCORD Omega update."""

    def step(S, omega, dual):
        return concord_fit(S, lam2, opts, omega0=omega)

    return _alternate(data, lam1, lam2, as_constraint(None), opts, step)


def fit_cc_mrce(data, lam1, lam2, C=None, opts=None):
    """Alternating fit with the constrained Omega update.

    ``C`` may be a mask array, a ``ConvexConstraint`` or ``None``. The
    returned precision matrix satisfies the constraint exactly.
    """
    C = as_constraint(C)
    C.check_dim(data.q)

    def step(S, omega, dual):
        return cconcord_fit(S, lam2, C, opts, omega0=omega, dual0=dual)

    return _alternate(data, lam1, lam2, C, opts, step)


def fit_model(data, lam1, lam2, C=None, opts=None):
    """Unconstrained path when ``C`` is ``None``, constrained path otherwise."""
    if C is None:
        return fit_concord_mrce(data, lam1, lam2, opts)
    return fit_cc_mrce(data, lam1, lam2, C, opts)
