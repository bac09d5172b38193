"""Lasso-penalized multi-output regression with residuals weighted by W^2.

    f(B) = 1/2 tr((Y - XB)^T (Y - XB) W^2) + lambda1 * sum_{j,k} |b_jk|

solved by cyclic coordinate descent in row-major order. Each coordinate
update is an exact one-dimensional minimization, so sweeps never increase f.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import Dataset, SolverOptions, frob_norm_sq


@dataclass
class RegressionResult:
    B: np.ndarray
    sweeps: int
    converged: bool
    ill_posed: bool = False


def b_objective(data, B, omega, lam1):
    X, Y = data.X, data.Y
    B = np.asarray(B, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if B.shape != (data.p, data.q) or omega.shape != (data.q, data.q):
        raise ValueError(
            f"dimension mismatch: X {X.shape}, Y {Y.shape}, B {B.shape}, omega {omega.shape}"
        )
    R = Y - X @ B
    # tr(R^T R W^2) = ||R W||_F^2 for symmetric W
    return 0.5 * frob_norm_sq(R @ omega) + lam1 * float(np.abs(B).sum())


def b_gradient(data, B, omega):
    """Gradient of the smooth part: ``-X^T (Y - XB) W^2``."""
    R = data.Y - data.X @ B
    return -(data.X.T @ R) @ (omega @ omega)


@numba.njit(cache=True, nogil=True)
def _cd(XtX, XtYQ, Q, B, lam1, tol, max_sweeps):
    p, q = B.shape
    # G is the smooth gradient XtX B Q - XtY Q, kept current across updates
    G = XtX @ B @ Q - XtYQ
    ill_posed = False
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        max_abs = 0.0
        for j in range(p):
            for k in range(q):
                a = XtX[j, j] * Q[k, k]
                b_old = B[j, k]
                if a <= 0.0:
                    if lam1 == 0.0:
                        ill_posed = True
                        continue
                    b_new = 0.0
                else:
                    z = a * b_old - G[j, k]
                    if z > lam1:
                        b_new = (z - lam1) / a
                    elif z < -lam1:
                        b_new = (z + lam1) / a
                    else:
                        b_new = 0.0
                delta = b_new - b_old
                if delta != 0.0:
                    B[j, k] = b_new
                    for r in range(p):
                        xr = XtX[r, j] * delta
                        if xr != 0.0:
                            for s in range(q):
                                G[r, s] += xr * Q[k, s]
                    if abs(delta) > max_change:
                        max_change = abs(delta)
                if abs(b_new) > max_abs:
                    max_abs = abs(b_new)
        if max_change <= tol * (1.0 + max_abs):
            return sweep, True, ill_posed
    return max_sweeps, False, ill_posed


def b_update(data, omega, lam1, B_init=None, opts=None, tol=None):
    """Minimize the weighted lasso objective over B by coordinate descent.

    Parameters
    ----------
    data : Dataset
    omega : ndarray, shape (q, q)
        Symmetric weight matrix; the residual weighting is ``omega @ omega``.
    lam1 : float
    B_init : ndarray, shape (p, q), optional
        Warm start (zeros by default).
    tol : float, optional
        Sweeping stops when no coordinate moved by more than
        ``tol * (1 + max|b|)``; defaults to ``opts.sub_tol``.

    Coordinates whose curvature is zero (an all-zero column of X) are left
    at their initial value when ``lam1 == 0`` and ``ill_posed`` is set.
    """
    if lam1 < 0:
        raise ValueError("lambda1 must be nonnegative")
    opts = opts or SolverOptions()
    tol = opts.sub_tol if tol is None else tol
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (data.q, data.q):
        raise ValueError(f"omega has shape {omega.shape}, expected {(data.q, data.q)}")
    if B_init is None:
        B = np.zeros((data.p, data.q))
    else:
        B = np.array(B_init, dtype=float)
        if B.shape != (data.p, data.q):
            raise ValueError(f"B_init has shape {B.shape}, expected {(data.p, data.q)}")
    B = np.ascontiguousarray(B)

    Q = omega @ omega
    XtX = data.X.T @ data.X
    XtYQ = (data.X.T @ data.Y) @ Q
    sweeps, converged, ill_posed = _cd(
        np.ascontiguousarray(XtX), np.ascontiguousarray(XtYQ), np.ascontiguousarray(Q),
        B, float(lam1), float(tol), int(opts.max_sweeps),
    )
    return RegressionResult(B, int(sweeps), bool(converged), bool(ill_posed))
