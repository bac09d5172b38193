"""CONCORD pseudolikelihood estimation of a sparse precision matrix.

The objective, on a per-sample scale, is

    -sum_j log(w_jj) + 1/2 tr(S W^2) + lambda2 * sum_{j<k} |w_jk|

and is minimized by FISTA with backtracking. The proximal step
soft-thresholds the off-diagonal entries only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._fista import fista
from .core import DomainError, SolverOptions, as_symmetric, soft_threshold, upper_l1

# trial points with a diagonal entry at or below this fail the line search
DIAG_FLOOR = 1e-12


@dataclass
class ConcordResult:
    omega: np.ndarray
    trace: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    min_diag: float = np.inf
    dual: np.ndarray | None = None
    inner_failures: int = 0


def _smooth(omega, S):
    d = np.diag(omega)
    if np.any(d <= DIAG_FLOOR):
        return np.inf
    return float(-np.log(d).sum() + 0.5 * np.sum((omega @ omega) * S))


def concord_objective(omega, S, lam2):
    """Penalized CONCORD objective at ``omega``.

    Raises ``DomainError`` when a diagonal entry of ``omega`` is not positive.
    """
    omega = np.asarray(omega, dtype=float)
    S = np.asarray(S, dtype=float)
    d = np.diag(omega)
    if np.any(d <= 0):
        raise DomainError("diagonal of omega must be strictly positive")
    # tr(S W^2) = <S, W W> for symmetric S
    return float(-np.log(d).sum() + 0.5 * np.sum((omega @ omega) * S) + lam2 * upper_l1(omega))


def concord_gradient(omega, S):
    """Gradient of the smooth part: ``-diag(1/w_jj) + (W S + S W) / 2``."""
    omega = np.asarray(omega, dtype=float)
    S = np.asarray(S, dtype=float)
    d = np.diag(omega)
    if np.any(d <= 0):
        raise DomainError("diagonal of omega must be strictly positive")
    WS = omega @ S
    G = 0.5 * (WS + WS.T)
    G[np.diag_indices_from(G)] -= 1.0 / d
    return G


def initial_omega(S, eps=1e-8):
    return np.diag(1.0 / np.maximum(np.diag(S), eps))


def _l1_prox(lam2):
    def prox(V, step):
        # prox of step * lam2 * sum_{j<k}|w_jk| over symmetric matrices: each
        # off-diagonal pair appears twice in the Frobenius norm
        out = soft_threshold(V, 0.5 * step * lam2)
        np.fill_diagonal(out, np.diag(V))
        return out

    return prox


def _run(S, lam2, prox, penalty, opts, omega0, tol):
    p = S.shape[0]
    omega0 = initial_omega(S) if omega0 is None else np.array(omega0, dtype=float)
    if omega0.shape != (p, p):
        raise ValueError(f"initial omega has shape {omega0.shape}, expected {(p, p)}")
    if np.any(np.diag(omega0) <= DIAG_FLOOR):
        raise DomainError("initial omega must have a positive diagonal")

    min_diag = [float(np.diag(omega0).min())]

    def track(x):
        min_diag[0] = min(min_diag[0], float(np.diag(x).min()))

    res = fista(
        lambda W: _smooth(W, S),
        lambda W: concord_gradient(W, S),
        prox,
        omega0,
        penalty=penalty,
        step=opts.initial_step,
        shrink=opts.backtrack_factor,
        tol=opts.sub_tol if tol is None else tol,
        max_iter=opts.max_iter,
        on_accept=track,
    )
    return res, min_diag[0]


def concord_fit(S, lam2, opts=None, omega0=None, tol=None):
    """Fit the unconstrained CONCORD precision estimate for covariance ``S``.

    Parameters
    ----------
    S : ndarray, shape (q, q)
        Symmetric positive semidefinite covariance estimate.
    lam2 : float
        Off-diagonal L1 penalty, ``>= 0``.
    opts : SolverOptions, optional
    omega0 : ndarray, optional
        Warm start; defaults to ``diag(1 / max(s_jj, 1e-8))``.
    tol : float, optional
        Relative objective-change tolerance; defaults to ``opts.sub_tol``.

    Returns
    -------
    ConcordResult
        Non-convergence is reported through ``converged``, never raised.
    """
    S = as_symmetric(S, "S")
    if lam2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    opts = opts or SolverOptions()
    res, min_diag = _run(S, lam2, _l1_prox(lam2), lambda W: lam2 * upper_l1(W), opts, omega0, tol)
    return ConcordResult(res.x, res.trace, res.n_iter, res.converged, min_diag)
