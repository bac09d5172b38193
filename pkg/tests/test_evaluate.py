import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ccmrce.alternating import FitResult
from ccmrce.core import Dataset
from ccmrce.evaluate import (
    CellFailure,
    RocPoint,
    UndefinedMetric,
    cross_validate,
    default_grid,
    fold_assignment,
    grid_sweep,
    log_grid,
    mse_percentage,
    pearson_r,
    relative_auc,
    resolve_threads,
    roc_envelope,
    roc_from_sweep,
    support_confusion,
    support_overlap,
    t_two_sided_pvalue,
)
from ccmrce.alternating import fit_model
from ccmrce.simulate import SimConfig, perturb_mask, simulate

# two-tailed critical values of Pearson r: (sample size, r, p)
R_TABLE = [(10, 0.632, 0.05), (20, 0.444, 0.05), (30, 0.361, 0.05), (50, 0.279, 0.05),
           (12, 0.708, 0.01), (20, 0.561, 0.01)]


def _pair_with_r(m, r, seed=0):
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(np.column_stack([np.ones(m), rng.standard_normal((m, 2))]))[0]
    a, e = basis[:, 1], basis[:, 2]
    return a, r * a + math.sqrt(1 - r * r) * e


def test_mse_anchors(rng):
    Y = rng.standard_normal((6, 3))
    assert mse_percentage(Y, Y) == 0.0
    assert mse_percentage(Y, np.broadcast_to(Y.mean(axis=0), Y.shape)) == pytest.approx(100.0, abs=1e-12)
    Yt = np.array([[1.0, 2.0], [3.0, 6.0]])
    Yp = np.array([[1.5, 2.0], [2.0, 5.0]])
    # errors 0.25 + 0 + 1 + 1; variance around column means 1 + 1 + 4 + 4
    assert mse_percentage(Yt, Yp) == pytest.approx(100 * 2.25 / 10)
    with pytest.raises(UndefinedMetric):
        mse_percentage(np.ones((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        mse_percentage(Y, Y[:, :2])


@given(st.integers(0, 2**32 - 1))
def test_mse_mean_prediction_is_100(seed):
    Y = np.random.default_rng(seed).standard_normal((7, 4)) * 10
    assert mse_percentage(Y, np.tile(Y.mean(axis=0), (7, 1))) == pytest.approx(100.0)


@pytest.mark.parametrize("m,r,p", R_TABLE)
def test_pvalue_against_tables(m, r, p):
    a, b = _pair_with_r(m, r)
    r_hat, p_hat = pearson_r(a, b)
    assert r_hat == pytest.approx(r, abs=1e-12)
    assert abs(p_hat - p) <= 1e-3


def test_pvalue_twenty_pairs():
    a, b = _pair_with_r(20, 0.5)
    assert pearson_r(a, b)[1] == pytest.approx(0.0248, abs=1e-3)
    # df=10, t=2.228 is the 5% two-tailed critical value
    assert t_two_sided_pvalue(2.228, 10) == pytest.approx(0.05, abs=1e-3)
    assert t_two_sided_pvalue(0.0, 5) == pytest.approx(1.0)


def test_pearson_anchors(rng):
    Y = rng.standard_normal((5, 3))
    r, p = pearson_r(Y, 2 * Y + 1)
    assert r == pytest.approx(1.0, abs=1e-12) and p <= 1e-12
    assert pearson_r(Y, -Y)[0] == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(UndefinedMetric):
        pearson_r(np.ones(5), rng.standard_normal(5))
    with pytest.raises(ValueError):
        pearson_r([1.0, 2.0], [1.0, 3.0])


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(30), rng.standard_normal(30)
    r = pearson_r(x, y)[0]
    assert pearson_r(x, a * y + b)[0] == pytest.approx(r, abs=1e-9)
    assert pearson_r(x, -a * y + b)[0] == pytest.approx(-r, abs=1e-9)


def test_support_confusion(rng):
    T = rng.standard_normal((4, 4)) * (rng.random((4, 4)) < 0.5)
    T = T + T.T
    assert support_confusion(T, T, 0, "omega")[1::2] == (0, 0)
    tp, fp, tn, fn = support_confusion(np.zeros((4, 4)), T, 0, "omega")
    assert tp == fp == 0
    E = rng.standard_normal((4, 4)) * (rng.random((4, 4)) < 0.5)
    E = E + E.T
    counts = [0, 0, 0, 0]
    for i, j in itertools.combinations(range(4), 2):
        s, t = E[i, j] != 0, T[i, j] != 0
        counts[[s and t, s and not t, not s and not t, not s and t].index(True)] += 1
    assert support_confusion(E, T, 0, "omega") == tuple(counts)
    B = rng.standard_normal((3, 5))
    assert support_confusion(B, B, 0, "b") == (15, 0, 0, 0)
    assert support_confusion(np.full((2, 2), 1e-9), np.ones((2, 2)), 1e-8, "b") == (0, 0, 0, 4)


def test_relative_auc_anchors():
    assert relative_auc([RocPoint(0.0, 1.0)]) == 1.0
    diag = [RocPoint(f, f) for f in np.linspace(0, 1, 101)]
    assert abs(relative_auc(diag) - 0.1) <= 1e-12
    assert relative_auc([RocPoint(0.0, 0.0), RocPoint(0.5, 0.0)]) == 0.0
    # a single point below the cap is held flat to the cap
    assert relative_auc([RocPoint(0.1, 0.6)]) == pytest.approx((0.5 * 0.1 * 0.6 + 0.1 * 0.6) / 0.2)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=12),
       st.floats(0, 1), st.floats(0, 1))
def test_auc_bounded_and_monotone(pts, f, t):
    curve = [RocPoint(a, b) for a, b in pts]
    base = relative_auc(curve)
    assert 0 <= base <= 1
    # adding a point can only raise the upper envelope
    assert relative_auc(curve + [RocPoint(f, t)]) >= base - 1e-12
    better = [RocPoint(p.fpr, min(1.0, p.tpr + 0.1)) for p in curve]
    assert relative_auc(better) >= base - 1e-12


def test_envelope_is_upper_hull():
    pts = [RocPoint(0.1, 0.5), RocPoint(0.2, 0.3), RocPoint(0.3, 0.9), RocPoint(0.1, 0.2)]
    assert roc_envelope(pts) == [(0.0, 0.0), (0.1, 0.5), (0.3, 0.9)]
    # (0.1, 0.2) lies under the chord from the origin to (0.3, 0.9)
    assert roc_envelope([RocPoint(0.1, 0.2), RocPoint(0.3, 0.9)]) == [(0.0, 0.0), (0.3, 0.9)]
    assert roc_envelope([RocPoint(0.0, 0.7)], 0.2) == [(0.0, 0.7)]


def test_auc_tie_at_same_fpr():
    one = relative_auc([RocPoint(0.125, 1.0)])
    assert relative_auc([RocPoint(0.125, 1.0), RocPoint(0.125, 0.0)]) == one


def _fit(B, W, l1=0.0, l2=0.0):
    return FitResult(B=np.asarray(B, float), omega=np.asarray(W, float), lambda1=l1, lambda2=l2)


def test_roc_from_sweep():
    W0 = np.array([[1, 0.3, 0], [0.3, 1, 0], [0, 0, 1.0]])
    B0 = np.array([[1.0, 0], [0, 0]])
    zero = _fit(np.zeros((2, 2)), np.eye(3))
    co, cb = roc_from_sweep([zero, zero], W0, B0)
    assert [(p.fpr, p.tpr) for p in co] == [(0.0, 0.0)]
    fits = [_fit(B0, W0, 1, 1), _fit(np.ones((2, 2)), np.ones((3, 3)), 2, 2), CellFailure(3, 3, "x")]
    co, cb = roc_from_sweep(fits, W0, B0)
    assert [(p.fpr, p.tpr) for p in co] == [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    assert co[1].lambda1 == 1
    assert [p.fpr for p in cb] == sorted(p.fpr for p in cb)


def test_grids():
    g = log_grid()
    assert g[0] == pytest.approx(0.0251188643) and g[-1] == pytest.approx(0.3981071706)
    assert len(g) == 5 and np.allclose(np.diff(np.log10(g)), 0.3)
    grid = default_grid()
    assert len(grid) == 25 and grid[1] == (g[0], g[1])


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("CCMRCE_THREADS", raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv("CCMRCE_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2


@pytest.fixture(scope="module")
def small():
    return simulate(SimConfig(p=6, q=5, n=30, density=0.3, seed=1))


def test_grid_sweep_order_and_threads(small):
    grid = [(1.0, 0.1), (0.5, 0.05), (1.0, 0.1)]
    a = grid_sweep(small.train, grid, threads=1)
    b = grid_sweep(small.train, grid, threads=3)
    for x, y in zip(a, b):
        assert np.array_equal(x.B, y.B) and np.array_equal(x.omega, y.omega)
    assert [(f.lambda1, f.lambda2) for f in a] == grid
    assert np.array_equal(a[0].B, a[2].B)
    single = fit_model(small.train, 0.5, 0.05)
    assert np.array_equal(single.omega, a[1].omega)
    with pytest.raises(ValueError):
        grid_sweep(small.train, [])


def test_grid_sweep_records_failures(small):
    res = grid_sweep(small.train, [(-1.0, 0.1), (1.0, 0.1)])
    assert isinstance(res[0], CellFailure) and "nonnegative" in res[0].error
    assert isinstance(res[1], FitResult)


def test_support_overlap():
    B = np.arange(1.0, 7.0).reshape(2, 3)
    common, ratio = support_overlap([B] * 10, 5)
    assert ratio == 1.0 and common.all()
    disjoint = [np.eye(1, 10, k).reshape(2, 5) for k in range(10)]
    assert support_overlap(disjoint, 5)[1] == 0.0
    with pytest.warns(UserWarning):
        assert support_overlap([np.zeros((2, 2))] * 3, 1)[1] == 0.0


def test_support_overlap_enumeration(rng):
    Bs = [rng.standard_normal((4, 5)) * (rng.random((4, 5)) < 0.5) for _ in range(10)]
    counts = {}
    for B in Bs:
        for idx in zip(*np.nonzero(B)):
            counts[idx] = counts.get(idx, 0) + 1
    expect = sum(c > 5 for c in counts.values()) / len(counts)
    common, ratio = support_overlap(Bs, 5)
    assert ratio == pytest.approx(expect)
    assert {tuple(i) for i in np.argwhere(common)} == {k for k, c in counts.items() if c > 5}


def test_fold_assignment():
    parts = fold_assignment(51, 10, 0)
    assert sorted(len(p) for p in parts) == [5] * 9 + [6]
    assert np.array_equal(np.sort(np.concatenate(parts)), np.arange(51))
    assert all(np.array_equal(a, b) for a, b in zip(parts, fold_assignment(51, 10, 0)))
    with pytest.raises(ValueError):
        fold_assignment(3, 5, 0)


@given(st.integers(2, 60), st.integers(2, 10), st.integers(0, 100))
def test_fold_partition_property(n, k, seed):
    if n < k:
        return
    parts = fold_assignment(n, k, seed)
    sizes = [len(p) for p in parts]
    assert len(parts) == k and max(sizes) - min(sizes) <= 1
    assert np.array_equal(np.sort(np.concatenate(parts)), np.arange(n))


def test_cross_validate_report(small):
    grid = [(0.5, 0.05), (2.0, 0.2)]
    rep = cross_validate(small.train, folds=5, grid=grid, seed=3)
    assert rep.folds == 5 and len(rep.per_fold) == 5
    assert rep.chosen in grid
    best = min(range(2), key=lambda i: rep.grid_scores[i])
    assert rep.chosen == grid[best]
    vals = [f["validation_mse_percentage"] for f in rep.per_fold]
    assert rep.summary["validation_mse_percentage"]["mean"] == pytest.approx(np.mean(vals))
    assert rep.summary["validation_mse_percentage"]["sd"] == pytest.approx(np.std(vals, ddof=1))
    assert rep.grid_scores[best] == pytest.approx(np.mean(vals))
    assert 0 <= rep.overlap_ratio <= 1
    d = rep.to_dict()
    assert d["chosen"] == {"lambda1": rep.chosen[0], "lambda2": rep.chosen[1]}
    again = cross_validate(small.train, folds=5, grid=grid, seed=3, threads=2)
    assert again.to_dict() == d


def test_leave_one_out():
    sim = simulate(SimConfig(p=3, q=3, n=8, density=1 / 3, seed=0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = cross_validate(sim.train, folds=8, grid=[(0.5, 0.1)])
    assert len(rep.per_fold) == 8


def test_interpolation_on_duplicated_rows():
    sim = simulate(SimConfig(p=3, q=3, n=20, density=1 / 3, seed=0, noiseless=True))
    X = np.vstack([sim.train.X, sim.train.X])
    Y = np.vstack([sim.train.Y, sim.train.Y])
    rep = cross_validate(Dataset(X, Y), folds=4, grid=[(1e-6, 1e-6)], seed=1)
    assert rep.summary["validation_mse_percentage"]["mean"] <= 1e-3
