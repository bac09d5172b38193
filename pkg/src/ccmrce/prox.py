"""Proximal operator of ``lambda2 * ||W_X||_1 + indicator(W in C)``.

For a point ``A`` and scale ``gamma`` the off-diagonal part solves

    min_{W_X in C}  1/(2 gamma) ||W_X - A_X||_F^2 + lambda2 ||W_X||_1

(the L1 norm counts both triangles). It is evaluated through the dual over
``H_X`` with ``||H_X||_inf <= 1``:

    g1(H_X) = ||A_X - c H_X||_F^2 - ||P_perp(A_X - c H_X)||_F^2,  c = gamma * lambda2

minimized by an inner FISTA whose proximal step clamps to the box, then
mapped back via ``W_X = P_C(A_X - c H_X)``. The diagonal of ``A`` passes
through unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fista import fista
from .constraints import ConvexConstraint, as_constraint, linf_ball_project
from .core import SolverOptions, frob_norm_sq, split_diag


@dataclass
class ProxProblem:
    A: np.ndarray
    gamma: float
    lam2: float
    C: ConvexConstraint

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("A must be square")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.lam2 < 0:
            raise ValueError("lambda2 must be nonnegative")
        self.C = as_constraint(self.C)
        self.C.check_dim(self.A.shape[0])
        self.A_D, self.A_X = split_diag(self.A)

    @property
    def c(self):
        return self.gamma * self.lam2


@dataclass
class DualResult:
    H: np.ndarray
    value: float
    n_iter: int
    converged: bool


@dataclass
class ProxResult:
    omega: np.ndarray
    dual: np.ndarray
    n_iter: int
    converged: bool


def dual_objective(H, prob):
    V = prob.A_X - prob.c * H
    return frob_norm_sq(V) - frob_norm_sq(prob.C.project_complement(V))


def dual_gradient(H, prob):
    """``-2 c P_C(A_X - c H)`` with ``c = gamma * lambda2``."""
    c = prob.c
    return -2.0 * c * prob.C.project(prob.A_X - c * H)


def dual_lipschitz(prob):
    """Upper bound ``2 (gamma lambda2)^2`` on the Lipschitz constant of the
    dual gradient."""
    return 2.0 * prob.c ** 2


def _box(H, step=None):
    H = linf_ball_project(H)
    np.fill_diagonal(H, 0.0)
    return H


def solve_dual(prob, opts=None, H0=None):
    """Minimize the dual objective over the unit L-infinity box.

    ``H0`` warm-starts the iteration (clamped into the box first). With
    ``lambda2 == 0`` the dual is degenerate and ``H = 0`` is returned.
    """
    opts = opts or SolverOptions()
    q = prob.A.shape[0]
    if prob.c == 0:
        return DualResult(np.zeros((q, q)), dual_objective(np.zeros((q, q)), prob), 0, True)

    H0 = np.zeros((q, q)) if H0 is None else _box(np.array(H0, dtype=float))
    # trial steps are measured in units of 1 / L, L the Lipschitz bound
    unit = 1.0 / dual_lipschitz(prob)
    if opts.inner_step == "constant":
        step, backtrack = unit, False
    else:
        step, backtrack = opts.inner_initial_step * unit, True

    res = fista(
        lambda H: dual_objective(H, prob),
        lambda H: dual_gradient(H, prob),
        _box,
        H0,
        step=step,
        shrink=opts.inner_backtrack_factor,
        backtrack=backtrack,
        tol=opts.inner_tol,
        scale=max(frob_norm_sq(prob.C.project(prob.A_X)), np.finfo(float).tiny),
        max_iter=opts.max_inner_iter,
    )
    return DualResult(res.x, res.trace[-1], res.n_iter, res.converged)


def primal_from_dual(H, prob):
    cH = prob.c * H
    V = prob.A_X - cH
    # entries thresholded to zero come out as cancellation residue; make them exact
    V[np.abs(V) <= 8.0 * np.finfo(float).eps * (np.abs(prob.A_X) + np.abs(cH))] = 0.0
    return prob.C.project(V) + prob.A_D


def constrained_prox(prob, opts=None, H0=None):
    """Evaluate the constrained proximal map at ``prob.A``.

    Returns a ``ProxResult`` whose ``omega`` has the off-diagonal part in
    ``C`` and the diagonal of ``A``; ``dual`` is the dual solution, useful
    as a warm start for the next call.
    """
    q = prob.A.shape[0]
    if prob.c == 0:
        return ProxResult(prob.C.project(prob.A_X) + prob.A_D, np.zeros((q, q)), 0, True)
    dual = solve_dual(prob, opts, H0)
    return ProxResult(primal_from_dual(dual.H, prob), dual.H, dual.n_iter, dual.converged)


def prox_primal_objective(omega, prob):
    """``1/(2 gamma) ||W_X - A_X||^2 + lambda2 ||W_X||_1``; ``inf`` off ``C``."""
    _, W_X = split_diag(omega)
    if not prob.C.contains(W_X):
        return np.inf
    return frob_norm_sq(W_X - prob.A_X) / (2.0 * prob.gamma) + prob.lam2 * float(np.abs(W_X).sum())


def prox_dual_value(H, prob):
    """Dual function value; never exceeds the primal optimum."""
    return (frob_norm_sq(prob.A_X) - dual_objective(H, prob)) / (2.0 * prob.gamma)
