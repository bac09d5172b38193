"""CONCORD under a hard convex constraint on the precision matrix.

Same FISTA outer loop as ``concord_fit``; the proximal step is the
constrained proximal operator, evaluated by an inner dual FISTA. The inner
dual is re-solved for every backtracking trial and warm-started from the
previous solve.
"""
from __future__ import annotations

import numpy as np

from .concord import ConcordResult, _run, concord_objective, initial_omega
from .constraints import as_constraint
from .core import SolverOptions, as_symmetric, off_diag, upper_l1
from .prox import ProxProblem, constrained_prox


def cconcord_objective(omega, S, lam2, C):
    """CONCORD objective plus the indicator of ``C`` (``inf`` when infeasible)."""
    C = as_constraint(C)
    value = concord_objective(omega, S, lam2)
    if not C.contains(off_diag(omega)):
        return np.inf
    return value


def cconcord_fit(S, lam2, C, opts=None, omega0=None, dual0=None, tol=None):
    """Constrained CONCORD fit.

    Every accepted iterate, and therefore the returned ``omega``, has its
    off-diagonal part exactly in ``C``. ``omega0`` is projected onto ``C``
    before use (the diagonal is never constrained). The returned result
    carries the final dual variable in ``dual`` for warm starts.
    """
    S = as_symmetric(S, "S")
    if lam2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    C = as_constraint(C)
    C.check_dim(S.shape[0])
    opts = opts or SolverOptions()

    start = initial_omega(S) if omega0 is None else np.array(omega0, dtype=float)
    start = C.project(off_diag(start)) + np.diag(np.diag(start))

    q = S.shape[0]
    state = {"H": np.zeros((q, q)) if dual0 is None else np.array(dual0, dtype=float), "failed": 0}

    def prox(V, step):
        # gradient steps are taken on the per-sample objective, whose prox
        # scale is half the step
        res = constrained_prox(ProxProblem(V, 0.5 * step, lam2, C), opts, H0=state["H"])
        state["H"] = res.dual
        state["failed"] += not res.converged
        return res.omega

    res, min_diag = _run(S, lam2, prox, lambda W: lam2 * upper_l1(W), opts, start, tol)
    return ConcordResult(
        res.x, res.trace, res.n_iter, res.converged, min_diag, state["H"], state["failed"]
    )
