import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ccmrce.constraints import (
    MaskConstraint,
    Unconstrained,
    as_constraint,
    build_incidence_mask,
    linf_ball_project,
    make_mask,
    project_complement,
    project_mask,
)

from conftest import random_mask

finite = st.floats(-1e3, 1e3, allow_nan=False)


def _brute_incidence(edges):
    m = len(edges)
    out = np.eye(m, dtype=bool)
    for a, b in itertools.combinations(range(m), 2):
        if set(edges[a]) & set(edges[b]):
            out[a, b] = out[b, a] = True
    return out


def test_full_mask_is_identity(rng):
    G = rng.standard_normal((5, 5))
    assert np.array_equal(project_mask(G, np.ones((5, 5), bool)), G)
    assert np.array_equal(project_complement(G, np.ones((5, 5), bool)), np.zeros((5, 5)))


def test_diagonal_only_mask():
    G = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert np.array_equal(project_mask(G, np.eye(2, dtype=bool)), np.eye(2))


def test_projection_beats_feasible_points(rng):
    G = rng.standard_normal((5, 5))
    G = G + G.T
    M = random_mask(5, rng)
    P = project_mask(G, M)
    best = np.sum((P - G) ** 2)
    for _ in range(200):
        R = np.where(M, rng.standard_normal((5, 5)) * 3, 0.0)
        assert np.sum((R - G) ** 2) >= best


@given(arrays(float, (4, 4), elements=finite), st.integers(0, 2**32 - 1))
def test_decomposition_and_orthogonality(G, seed):
    M = random_mask(4, np.random.default_rng(seed))
    P, Q = project_mask(G, M), project_complement(G, M)
    assert np.array_equal(P + Q, G)
    assert np.sum(P * Q) == 0.0
    C = MaskConstraint(M)
    assert C.contains(off_diag_of(P))
    assert np.array_equal(C.project(P), P)


def off_diag_of(M):
    return M - np.diag(np.diag(M))


@given(arrays(float, (4, 4), elements=finite), arrays(float, (4, 4), elements=finite),
       st.integers(0, 2**32 - 1))
def test_projections_nonexpansive(A, B, seed):
    M = random_mask(4, np.random.default_rng(seed))
    d = np.linalg.norm(A - B)
    assert np.linalg.norm(project_mask(A, M) - project_mask(B, M)) <= d + 1e-9
    assert np.linalg.norm(linf_ball_project(A) - linf_ball_project(B)) <= d + 1e-9


def test_linf_ball():
    assert np.array_equal(linf_ball_project(np.array([1.5, -2.0, 0.3])), [1.0, -1.0, 0.3])
    H = np.random.default_rng(1).standard_normal((6, 6)) * 3
    P = linf_ball_project(H)
    assert np.array_equal(linf_ball_project(P), P)


def test_incidence_examples():
    assert build_incidence_mask(3, [(0, 1), (1, 2), (0, 2)]).all()
    assert np.array_equal(build_incidence_mask(4, [(0, 1), (2, 3)]), np.eye(2, dtype=bool))
    edges = [(0, 1), (0, 2), (0, 3), (4, 5)]
    M = build_incidence_mask(6, edges)
    assert np.array_equal(M, _brute_incidence(edges))
    assert M[:3, :3].all() and not M[3, :3].any()


def test_incidence_random_and_permutation(rng):
    pairs = list(itertools.combinations(range(8), 2))
    idx = rng.choice(len(pairs), 12, replace=False)
    edges = [pairs[i] for i in idx]
    M = build_incidence_mask(8, edges)
    assert np.array_equal(M, _brute_incidence(edges))
    perm = rng.permutation(len(edges))
    Mp = build_incidence_mask(8, [edges[i] for i in perm])
    assert np.array_equal(Mp, M[np.ix_(perm, perm)])


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)]])
def test_incidence_rejects_bad_edges(edges):
    with pytest.raises(ValueError):
        build_incidence_mask(3, edges)


def test_make_mask_rules():
    with pytest.warns(UserWarning):
        M = make_mask(np.zeros((3, 3), int))
    assert np.array_equal(M, np.eye(3, dtype=bool))
    with pytest.raises(ValueError):
        make_mask(np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        make_mask(np.array([[1, 2], [2, 1]]))
    with pytest.raises(ValueError):
        project_mask(np.zeros((2, 2)), np.ones((3, 3), bool))


def test_constraint_objects(rng):
    M = random_mask(6, rng)
    C = MaskConstraint(M)
    assert as_constraint(M).digest() == C.digest()
    assert as_constraint(C) is C
    assert isinstance(as_constraint(None), Unconstrained)
    M2 = M.copy()
    M2[0, 1] = M2[1, 0] = not M[0, 1]
    assert MaskConstraint(M2).digest() != C.digest()
    assert MaskConstraint(np.ones((3, 3), bool)).is_full
    with pytest.raises(ValueError):
        C.check_dim(5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert Unconstrained().contains(rng.standard_normal((3, 3)))
