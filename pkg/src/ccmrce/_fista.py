"""Accelerated proximal gradient (FISTA) with backtracking and monotone restart.

One engine drives the Omega subproblems (plain and constrained) and the dual
solve inside the constrained proximal step; callers differ only in the
functions they pass in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def next_momentum(alpha):
    return (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0


def momentum_sequence(k):
    """First ``k`` terms of the FISTA momentum sequence starting at 1."""
    out = [1.0]
    while len(out) < k:
        out.append(next_momentum(out[-1]))
    return out[:k]


@dataclass
class FistaResult:
    x: np.ndarray
    trace: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    step: float = 1.0
    restarts: int = 0


def fista(
    smooth: Callable,
    grad: Callable,
    prox: Callable,
    x0: np.ndarray,
    *,
    penalty: Callable | None = None,
    step: float = 1.0,
    shrink: float = 0.5,
    backtrack: bool = True,
    tol: float = 1e-8,
    scale: float = 1.0,
    max_iter: int = 1000,
    min_step: float = 1e-20,
    on_accept: Callable | None = None,
) -> FistaResult:
    """Minimize ``smooth(x) + penalty(x)`` by FISTA.

    ``smooth`` may return ``inf`` outside its domain; such trial points fail
    the line search. ``prox(v, step)`` evaluates the proximal map of
    ``step * penalty`` at ``v``.

    The reported iterates never increase the objective: when a momentum step
    would, it is discarded and the momentum is reset (alpha = 1), so the next
    step is a plain proximal gradient step from the current iterate.
    Iteration stops once an accepted step changes the objective by at most
    ``tol * max(|F|, scale)``.
    """
    if penalty is None:
        penalty = lambda x: 0.0  # noqa: E731

    x = x0
    F = smooth(x) + penalty(x)
    if not np.isfinite(F):
        raise ValueError("starting point lies outside the objective's domain")
    trace = [float(F)]
    theta = x
    alpha = 1.0
    restarts = 0
    converged = False

    it = 0
    while it < max_iter:
        it += 1
        f_theta = smooth(theta)
        if not np.isfinite(f_theta):
            theta, alpha = x, 1.0
            f_theta = smooth(x)
        g = grad(theta)

        while True:
            z = prox(theta - step * g, step)
            f_z = smooth(z)
            if not backtrack and np.isfinite(f_z):
                break
            if np.isfinite(f_z):
                d = z - theta
                model = f_theta + float(np.vdot(g, d)) + float(np.vdot(d, d)) / (2.0 * step)
                if f_z <= model + 1e-12 * max(1.0, abs(f_theta)):
                    break
            step *= shrink
            if step < min_step:
                return FistaResult(x, trace, it, False, step, restarts)

        F_z = f_z + penalty(z)
        if F_z > F:
            if theta is x:
                # a proximal gradient step from x itself failed to descend:
                # only rounding error remains
                converged = True
                break
            theta, alpha = x, 1.0
            restarts += 1
            continue

        alpha_next = next_momentum(alpha)
        theta = z + ((alpha - 1.0) / alpha_next) * (z - x)
        change = F - F_z
        x, F, alpha = z, F_z, alpha_next
        trace.append(float(F))
        if on_accept is not None:
            on_accept(x)
        if backtrack:
            step /= shrink
        if change <= tol * max(abs(F), scale):
            converged = True
            break

    return FistaResult(x, trace, it, converged, step, restarts)
