"""Convex constraint sets on the precision matrix and their projections."""
from __future__ import annotations

import hashlib
import warnings

import numpy as np


def make_mask(M, name="mask"):
    """Validate a sparsity pattern and return it as a boolean array.

    The pattern must be square and symmetric. Diagonal entries are always
    allowed; a pattern that forbids some of them is corrected with a warning.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if M.dtype != bool:
        if not np.all(np.isin(M, (0, 1))):
            raise ValueError(f"{name} entries must be 0 or 1")
        M = M.astype(bool)
    if not np.array_equal(M, M.T):
        raise ValueError(f"{name} is not symmetric")
    M = M.copy()
    if not np.all(np.diag(M)):
        warnings.warn(f"{name} forbids diagonal entries; allowing them", stacklevel=2)
        np.fill_diagonal(M, True)
    return M


def _check_dims(G, mask):
    G = np.asarray(G, dtype=float)
    if G.shape != mask.shape:
        raise ValueError(f"dimension mismatch: matrix {G.shape} vs mask {mask.shape}")
    return G


def project_mask(G, mask):
    """Zero every entry of ``G`` that the mask disallows."""
    mask = np.asarray(mask, dtype=bool)
    G = _check_dims(G, mask)
    return np.where(mask, G, 0.0)


def project_complement(G, mask):
    """``G - project_mask(G, mask)``: the disallowed entries of ``G``."""
    mask = np.asarray(mask, dtype=bool)
    G = _check_dims(G, mask)
    return np.where(mask, 0.0, G)


def linf_ball_project(H):
    """Clamp every entry of ``H`` to ``[-1, 1]``."""
    return np.clip(np.asarray(H, dtype=float), -1.0, 1.0)


def build_incidence_mask(num_nodes, edges):
    """Line-graph adjacency of ``edges`` as a sparsity mask.

    Entry ``(j, k)`` is allowed when edges ``j`` and ``k`` share an endpoint.
    """
    if num_nodes < 1:
        raise ValueError("num_nodes must be positive")
    seen = set()
    norm = []
    for e in edges:
        a, b = (int(v) for v in e)
        if not (0 <= a < num_nodes and 0 <= b < num_nodes):
            raise ValueError(f"edge {e} has an endpoint outside [0, {num_nodes})")
        if a == b:
            raise ValueError(f"edge {e} is a self-loop")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ValueError(f"duplicate edge {e}")
        seen.add(key)
        norm.append(key)

    m = len(norm)
    incidence = np.zeros((m, num_nodes), dtype=np.int64)
    rows = np.arange(m)
    if m:
        ends = np.array(norm)
        incidence[rows, ends[:, 0]] = 1
        incidence[rows, ends[:, 1]] = 1
    mask = (incidence @ incidence.T) > 0
    np.fill_diagonal(mask, True)
    return mask


class ConvexConstraint:
    """A closed convex set of symmetric matrices, described by its
    Euclidean projection."""

    id = "convex"

    def project(self, G):
        raise NotImplementedError

    def project_complement(self, G):
        return np.asarray(G, dtype=float) - self.project(G)

    def contains(self, G):
        G = np.asarray(G, dtype=float)
        return bool(np.array_equal(self.project(G), G))

    def check_dim(self, q):
        pass

    def digest(self):
        return hashlib.sha256(self.id.encode()).hexdigest()


class Unconstrained(ConvexConstraint):
    """Every symmetric matrix is allowed."""

    id = "unconstrained"

    def project(self, G):
        return np.array(G, dtype=float)

    def project_complement(self, G):
        return np.zeros_like(np.asarray(G, dtype=float))

    def contains(self, G):
        return True


class MaskConstraint(ConvexConstraint):
    """Matrices whose off-diagonal zeros include those of a sparsity mask."""

    def __init__(self, mask, name="mask"):
        self.mask = make_mask(mask)
        self.name = name

    @property
    def id(self):
        allowed = int(self.mask.sum() - self.mask.shape[0]) // 2
        return f"{self.name}(q={self.mask.shape[0]}, allowed_pairs={allowed})"

    def project(self, G):
        return project_mask(G, self.mask)

    def project_complement(self, G):
        return project_complement(G, self.mask)

    def contains(self, G):
        G = _check_dims(G, self.mask)
        return not np.any(G[~self.mask])

    def check_dim(self, q):
        if self.mask.shape[0] != q:
            raise ValueError(f"constraint has dimension {self.mask.shape[0]}, expected {q}")

    def digest(self):
        packed = np.packbits(self.mask.astype(np.uint8), axis=None).tobytes()
        h = hashlib.sha256()
        h.update(str(self.mask.shape).encode())
        h.update(packed)
        return h.hexdigest()

    @property
    def is_full(self):
        return bool(self.mask.all())


def as_constraint(C):
    """Accept ``None``, a mask array or a ``ConvexConstraint``."""
    if C is None:
        return Unconstrained()
    if isinstance(C, ConvexConstraint):
        return C
    return MaskConstraint(C)

