"""Sparse multi-output regression with a structurally constrained precision matrix.

Jointly estimates a sparse coefficient matrix ``B`` and a sparse residual
precision matrix ``Omega`` whose off-diagonal support is restricted to a user
supplied mask, using a pseudolikelihood loss solved by alternating
minimization.
"""

__version__ = "0.1.0"

from .alternating import FitResult, fit_cc_mrce, fit_concord_mrce, fit_model, full_objective
from .cconcord import cconcord_fit, cconcord_objective
from .concord import concord_fit, concord_gradient, concord_objective
from .constraints import (
    MaskConstraint,
    Unconstrained,
    as_constraint,
    build_incidence_mask,
    make_mask,
)
from .core import Dataset, DomainError, SolverOptions
from .prox import ProxProblem, constrained_prox
from .regression import b_update
from .simulate import SimConfig, gen_dataset, perturb_mask, simulate

__all__ = [
    "Dataset",
    "DomainError",
    "FitResult",
    "MaskConstraint",
    "ProxProblem",
    "SimConfig",
    "SolverOptions",
    "Unconstrained",
    "as_constraint",
    "b_update",
    "build_incidence_mask",
    "cconcord_fit",
    "cconcord_objective",
    "concord_fit",
    "concord_gradient",
    "concord_objective",
    "constrained_prox",
    "fit_cc_mrce",
    "fit_concord_mrce",
    "fit_model",
    "full_objective",
    "gen_dataset",
    "make_mask",
    "perturb_mask",
    "simulate",
]
