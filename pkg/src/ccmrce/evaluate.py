"""Reconstruction and model-selection metrics, hyperparameter sweeps and
k-fold cross-validation."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .alternating import fit_model

SUPPORT_TOL = 1e-8


class UndefinedMetric(ValueError):
    """The metric is undefined for the given input (e.g. zero variance)."""


def mse_percentage(Y_true, Y_pred):
    """Squared error as a percentage of the variance of ``Y_true`` around its
    column means. 100 means no better than predicting the column means."""
    Y_true = np.atleast_2d(np.asarray(Y_true, dtype=float))
    Y_pred = np.atleast_2d(np.asarray(Y_pred, dtype=float))
    if Y_true.shape != Y_pred.shape:
        raise ValueError(f"shape mismatch: {Y_true.shape} vs {Y_pred.shape}")
    denom = float(np.sum((Y_true - Y_true.mean(axis=0)) ** 2))
    if denom == 0:
        raise UndefinedMetric("Y_true has zero variance")
    return 100.0 * float(np.sum((Y_true - Y_pred) ** 2)) / denom


def t_two_sided_pvalue(t, df):
    """Two-sided Student-t tail probability ``P(|T| >= |t|)``."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return float(special.betainc(0.5 * df, 0.5, df / (df + t * t)))


def pearson_r(Y_true, Y_pred):
    """Pearson correlation over all entries pooled, with a two-sided p-value
    from the t statistic on ``m - 2`` degrees of freedom."""
    a = np.asarray(Y_true, dtype=float).ravel()
    b = np.asarray(Y_pred, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("inputs must have the same number of entries")
    m = a.size
    if m < 3:
        raise ValueError("need at least 3 paired values")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na == 0 or nb == 0:
        raise UndefinedMetric("constant input has no correlation")
    r = float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((m - 2) / (1.0 - r * r))
    return r, t_two_sided_pvalue(t, m - 2)


def support_confusion(estimate, truth, threshold=0.0, mode="b"):
    """Counts ``(tp, fp, tn, fn)`` of the estimated support against the true one.

    ``mode="omega"`` counts unordered off-diagonal pairs of square matrices;
    ``mode="b"`` counts every entry. An estimate entry is selected when its
    magnitude exceeds ``threshold``; a true entry when it is nonzero.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {tru.shape}")
    if mode == "omega":
        if est.ndim != 2 or est.shape[0] != est.shape[1]:
            raise ValueError("omega mode requires square matrices")
        iu = np.triu_indices(est.shape[0], 1)
        est, tru = est[iu], tru[iu]
    elif mode != "b":
        raise ValueError("mode must be 'b' or 'omega'")
    sel = np.abs(est) > threshold
    pos = tru != 0
    tp = int(np.sum(sel & pos))
    fp = int(np.sum(sel & ~pos))
    tn = int(np.sum(~sel & ~pos))
    fn = int(np.sum(~sel & pos))
    return tp, fp, tn, fn


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    lambda1: float | None = None
    lambda2: float | None = None


def _rates(tp, fp, tn, fn):
    fpr = fp / (fp + tn) if fp + tn else 0.0
    tpr = tp / (tp + fn) if tp + fn else 0.0
    return fpr, tpr


def _curve(points):
    # one point per distinct (fpr, tpr), sorted, starting at the origin
    seen = {}
    for pt in points:
        seen.setdefault((pt.fpr, pt.tpr), pt)
    seen.setdefault((0.0, 0.0), RocPoint(0.0, 0.0))
    return [seen[k] for k in sorted(seen)]


def roc_from_sweep(fits, truth_omega, truth_B, threshold=SUPPORT_TOL):
    """One ROC point per successful fit, for the Omega and B supports.

    Entries of ``fits`` that are not fit results (failed cells) are skipped.
    """
    om, bb = [], []
    for fit in fits:
        if not hasattr(fit, "omega"):
            continue
        fo = _rates(*support_confusion(fit.omega, truth_omega, threshold, "omega"))
        fb = _rates(*support_confusion(fit.B, truth_B, threshold, "b"))
        om.append(RocPoint(*fo, fit.lambda1, fit.lambda2))
        bb.append(RocPoint(*fb, fit.lambda1, fit.lambda2))
    return _curve(om), _curve(bb)


def roc_envelope(curve, fpr_cap=None):
    """Upper-left envelope of the ROC points as a list of vertices.

    This is the concave hull of the points and the origin, ending flat at
    the best tpr: every operating point between two vertices is reachable
    by mixing them, and adding a point can never lower it. Points beyond
    ``fpr_cap`` are dropped first.
    """
    best = {0.0: 0.0}
    for p in curve:
        f, t = float(p.fpr), float(p.tpr)
        if fpr_cap is None or f <= fpr_cap:
            best[f] = max(best.get(f, 0.0), t)
    pts = sorted(best.items())
    top = max(t for _, t in pts)
    right = pts[-1][0] if fpr_cap is None else max(pts[-1][0], fpr_cap)
    pts.append((right, top))
    hull = []
    for pt in pts:
        # pop while the last vertex lies on or below the chord to pt
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (pt[1] - y1) - (y2 - y1) * (pt[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(pt)
    if hull[-1][0] == right and len(hull) > 1 and hull[-2][1] == top:
        hull.pop()
    return hull


def relative_auc(curve, fpr_cap=0.2):
    """Area under the ROC envelope for ``fpr <= fpr_cap``, divided by the cap.

    Points beyond the cap are dropped and the envelope is extended
    horizontally from the best point inside it.
    """
    if not curve:
        raise ValueError("curve is empty")
    if not 0 < fpr_cap <= 1:
        raise ValueError("fpr_cap must lie in (0, 1]")
    env = roc_envelope(curve, fpr_cap)
    f = np.array([pt[0] for pt in env] + [fpr_cap])
    t = np.array([pt[1] for pt in env] + [env[-1][1]])
    area = float(np.sum(np.diff(f) * (t[1:] + t[:-1]) / 2.0))
    return min(max(area / fpr_cap, 0.0), 1.0)


def log_grid(lo=-1.6, hi=-0.4, num=5):
    """Log-spaced values ``10**lo .. 10**hi``."""
    return [float(v) for v in np.logspace(lo, hi, num)]


def default_grid(lo=-1.6, hi=-0.4, num=5):
    """All ``(lambda1, lambda2)`` pairs on a square log grid, lambda1 major."""
    vals = log_grid(lo, hi, num)
    return [(a, b) for a in vals for b in vals]


@dataclass
class CellFailure:
    lambda1: float
    lambda2: float
    error: str


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get("CCMRCE_THREADS", "1") or 1)
    return max(1, int(threads))


def _map(fn, items, threads):
    threads = resolve_threads(threads)
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fit_cell(data, cell, C, opts):
    lam1, lam2 = cell
    try:
        return fit_model(data, lam1, lam2, C, opts)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return CellFailure(lam1, lam2, f"{type(exc).__name__}: {exc}")


def grid_sweep(data, grid, C=None, opts=None, threads=None):
    """Fit every ``(lambda1, lambda2)`` cell independently.

    Results follow grid order. A cell whose fit raises becomes a
    ``CellFailure`` instead of aborting the sweep.
    """
    grid = [(float(a), float(b)) for a, b in grid]
    if not grid:
        raise ValueError("grid is empty")
    return _map(lambda cell: _fit_cell(data, cell, C, opts), grid, threads)


def support_overlap(B_list, min_count, threshold=0.0):
    """Common support of several coefficient matrices and its overlap ratio.

    An entry is in the common support when it is nonzero in more than
    ``min_count`` matrices. The ratio is ``|common| / |union|``; an empty
    union gives 0 with a warning.
    """
    if not B_list:
        raise ValueError("B_list is empty")
    if min_count > len(B_list):
        raise ValueError("min_count exceeds the number of matrices")
    counts = sum((np.abs(np.asarray(B, dtype=float)) > threshold).astype(int) for B in B_list)
    common = counts > min_count
    union = int(np.count_nonzero(counts))
    if union == 0:
        warnings.warn("all supports are empty; overlap ratio set to 0", stacklevel=2)
        return common, 0.0
    return common, int(common.sum()) / union


def fold_assignment(n, k, seed):
    """Seeded partition of ``range(n)`` into ``k`` folds whose sizes differ by
    at most one."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def _safe(metric, *args):
    try:
        return metric(*args)
    except UndefinedMetric:
        return None


@dataclass
class CvReport:
    folds: int
    grid: list
    grid_scores: list
    chosen: tuple
    per_fold: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    supports: list = field(default_factory=list)
    common_support: np.ndarray | None = None
    overlap_ratio: float = 0.0
    flagged_folds: list = field(default_factory=list)

    def to_dict(self):
        return {
            "folds": self.folds,
            "grid": [list(c) for c in self.grid],
            "grid_mean_validation_mse_percentage": self.grid_scores,
            "chosen": {"lambda1": self.chosen[0], "lambda2": self.chosen[1]},
            "per_fold": self.per_fold,
            "summary": self.summary,
            "supports": self.supports,
            "common_support": (
                None if self.common_support is None
                else np.argwhere(self.common_support).tolist()
            ),
            "overlap_ratio": self.overlap_ratio,
            "flagged_folds": self.flagged_folds,
        }


def _fold_metrics(data, train_idx, val_idx, cell, C, opts):
    train = data.subset(train_idx)
    val = data.subset(val_idx)
    if train.n < 2:
        return {"error": f"training fold has {train.n} sample(s)"}
    fit = _fit_cell(train, cell, C, opts)
    if isinstance(fit, CellFailure):
        return {"error": fit.error}
    out = {"fit": fit}
    out["train_mse_percentage"] = _safe(mse_percentage, train.Y, fit.predict(train.X))
    out["validation_mse_percentage"] = _safe(mse_percentage, val.Y, fit.predict(val.X))
    for tag, part in (("train", train), ("validation", val)):
        res = None
        if part.Y.size >= 3:
            res = _safe(pearson_r, part.Y, fit.predict(part.X))
        out[f"{tag}_r"] = None if res is None else res[0]
        out[f"{tag}_p_value"] = None if res is None else res[1]
    out["validation_mse"] = float(np.mean((val.Y - fit.predict(val.X)) ** 2))
    return out


def _mean_sd(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    arr = np.array(vals, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def cross_validate(data, folds=10, grid=None, C=None, opts=None, seed=0, threads=None,
                   min_count=None, threshold=SUPPORT_TOL):
    """k-fold cross-validation over a hyperparameter grid.

    The chosen cell minimizes the validation MSE percentage averaged over
    folds. Folds where that metric is undefined (zero-variance held-out
    responses, e.g. single-sample folds) or whose fit failed are flagged
    and left out of the averages; if every fold of every cell is flagged,
    the plain mean squared validation error is used instead.

    ``min_count`` (default ``folds // 2``) sets how many folds must select
    an entry of B before it enters the common support.
    """
    grid = default_grid() if grid is None else [(float(a), float(b)) for a, b in grid]
    if not grid:
        raise ValueError("grid is empty")
    if data.n < folds:
        raise ValueError(f"cannot split {data.n} samples into {folds} folds")
    parts = fold_assignment(data.n, folds, seed)
    everything = np.arange(data.n)
    tasks = [
        (ci, fi, np.setdiff1d(everything, parts[fi]), parts[fi])
        for ci in range(len(grid))
        for fi in range(folds)
    ]
    results = _map(
        lambda t: _fold_metrics(data, t[2], t[3], grid[t[0]], C, opts), tasks, threads
    )
    by_cell = [results[ci * folds:(ci + 1) * folds] for ci in range(len(grid))]

    def score(rows, key):
        vals = [r.get(key) for r in rows if "error" not in r and r.get(key) is not None]
        return float(np.mean(vals)) if vals else None

    scores = [score(rows, "validation_mse_percentage") for rows in by_cell]
    key = "validation_mse_percentage"
    if all(s is None for s in scores):
        warnings.warn("validation MSE percentage undefined on every fold; "
                      "selecting by mean squared validation error", stacklevel=2)
        scores = [score(rows, "validation_mse") for rows in by_cell]
        key = "validation_mse"
    finite = [(s, i) for i, s in enumerate(scores) if s is not None]
    if not finite:
        raise RuntimeError("every cross-validation fit failed")
    best = min(finite)[1]

    rows = by_cell[best]
    per_fold, flagged, supports, Bs = [], [], [], []
    for fi, row in enumerate(rows):
        entry = {"fold": fi, "train_size": int(data.n - len(parts[fi])),
                 "validation_size": int(len(parts[fi]))}
        if "error" in row:
            entry["error"] = row["error"]
            flagged.append(fi)
        else:
            for k in ("train_mse_percentage", "validation_mse_percentage", "train_r",
                      "train_p_value", "validation_r", "validation_p_value"):
                entry[k] = row[k]
            fit = row["fit"]
            entry["converged"] = fit.converged
            entry["outer_iters"] = fit.outer_iters
            if row.get(key) is None:
                flagged.append(fi)
            sup = np.abs(fit.B) > threshold
            supports.append(np.argwhere(sup).tolist())
            Bs.append(np.where(sup, fit.B, 0.0))
        per_fold.append(entry)
    if flagged:
        warnings.warn(f"folds {flagged} flagged and excluded from averages", stacklevel=2)

    summary = {}
    for k in ("train_mse_percentage", "validation_mse_percentage", "train_r", "validation_r"):
        vals = [e.get(k) for e in per_fold if e["fold"] not in flagged]
        mean, sd = _mean_sd(vals)
        summary[k] = {"mean": mean, "sd": sd}

    common, ratio = (None, 0.0)
    if Bs:
        mc = len(Bs) // 2 if min_count is None else min(min_count, len(Bs))
        common, ratio = support_overlap(Bs, mc)

    return CvReport(
        folds=folds,
        grid=grid,
        grid_scores=scores,
        chosen=grid[best],
        per_fold=per_fold,
        summary=summary,
        supports=supports,
        common_support=common,
        overlap_ratio=ratio,
        flagged_folds=flagged,
    )
