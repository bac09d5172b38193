"""Matrix helpers and solver options shared by every solver in the package.

Matrices are plain dense ``numpy.ndarray`` objects. Symmetric inputs are
checked for exact symmetry on entry; nothing here wraps arrays in custom
classes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an objective."""


def as_symmetric(M, name="matrix"):
    """Return ``M`` as a float array after checking it is square, finite and
    exactly symmetric."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    if not np.array_equal(M, M.T):
        raise ValueError(f"{name} is not exactly symmetric")
    return M


def symmetrize(M):
    """Average ``M`` with its transpose; the result is exactly symmetric."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def split_diag(M):
    """Split a square matrix into its diagonal and off-diagonal parts.

    Returns ``(M_D, M_X)`` with ``M_D + M_X == M`` exactly.
    """
    M = np.asarray(M, dtype=float)
    D = np.diag(np.diag(M))
    X = M.copy()
    np.fill_diagonal(X, 0.0)
    return D, X


def off_diag(M):
    M = np.array(M, dtype=float)
    np.fill_diagonal(M, 0.0)
    return M


def soft_threshold(M, t):
    """Entrywise ``sign(m) * max(|m| - t, 0)``."""
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - t, 0.0)


def frob_norm_sq(M):
    M = np.asarray(M, dtype=float)
    return float(np.sum(M * M))


def upper_l1(M):
    """Sum of ``|m_jk|`` over the strict upper triangle."""
    M = np.asarray(M, dtype=float)
    return float(np.abs(M[np.triu_indices_from(M, 1)]).sum())


@dataclass(frozen=True)
class Dataset:
    """Paired predictor matrix ``X`` (n x p) and response matrix ``Y`` (n x q)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if X.shape[0] != Y.shape[0]:
            raise ValueError(
                f"X and Y must have the same number of rows, got {X.shape[0]} and {Y.shape[0]}"
            )
        if X.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("X and Y must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]

    def subset(self, rows):
        return Dataset(self.X[rows], self.Y[rows])


@dataclass(frozen=True)
class SolverOptions:
    """Iteration limits, tolerances and step-size controls.

    ``tol_rel`` governs the outer alternating loop. The Omega and B
    subproblems use ``subproblem_tol`` (10x tighter by default) and the dual
    solve inside the constrained proximal step uses ``inner_tol``.

    Outer steps start at ``initial_step`` and shrink by ``backtrack_factor``
    until the sufficient-decrease test passes; after an accepted step the
    next trial is ``step / backtrack_factor``. The inner dual solve does the
    same with ``inner_backtrack_factor``, starting from
    ``inner_initial_step / (2 * (gamma * lambda2)**2)``, i.e. the initial step
    is a fraction of the reciprocal Lipschitz bound of the dual gradient.
    ``inner_step == "constant"`` uses that reciprocal bound as a fixed step.
    """

    max_outer_iter: int = 100
    max_iter: int = 10000
    max_inner_iter: int = 1000
    max_sweeps: int = 10000
    tol_rel: float = 1e-6
    subproblem_tol: float | None = None
    inner_tol: float = 1e-8
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    inner_initial_step: float = 1.0
    inner_backtrack_factor: float = 0.5
    inner_step: str = "backtracking"

    def __post_init__(self):
        for name in ("max_outer_iter", "max_iter", "max_inner_iter", "max_sweeps"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("tol_rel", "inner_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.subproblem_tol is not None and not self.subproblem_tol > 0:
            raise ValueError("subproblem_tol must be positive")
        if not 0 < self.initial_step <= 1 or not 0 < self.inner_initial_step <= 1:
            raise ValueError("initial steps must lie in (0, 1]")
        if not 0 < self.backtrack_factor < 1 or not 0 < self.inner_backtrack_factor < 1:
            raise ValueError("backtracking factors must lie in (0, 1)")
        if self.inner_step not in ("backtracking", "constant"):
            raise ValueError("inner_step must be 'backtracking' or 'constant'")

    @property
    def sub_tol(self):
        if self.subproblem_tol is not None:
            return self.subproblem_tol
        return self.tol_rel / 10.0

    def with_(self, **changes):
        return replace(self, **changes)
