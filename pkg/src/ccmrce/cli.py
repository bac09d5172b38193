"""Command-line interface: simulate, fit, predict, eval, sweep, cv.

Exit codes: 0 success, 64 usage error, 65 data error, 2 I/O error.
Matrices are headerless comma-separated files, one row per line; masks use
0/1 integers. Floats are written with 17 significant digits so that a
write/read round trip is exact.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .alternating import fit_model
from .constraints import MaskConstraint
from .core import Dataset, SolverOptions
from .evaluate import (
    CellFailure,
    UndefinedMetric,
    cross_validate,
    grid_sweep,
    log_grid,
    mse_percentage,
    pearson_r,
    relative_auc,
    resolve_threads,
    roc_from_sweep,
)
from .simulate import DensityError, SimConfig, off_diag_density, perturb_mask, simulate

EXIT_OK = 0
EXIT_IO = 2
EXIT_USAGE = 64
EXIT_DATA = 65

MODEL_FORMAT = 1


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- file formats -----------------------------------------------------------

def write_matrix(path, M, integer=False):
    M = np.atleast_2d(np.asarray(M))
    fmt = "%d" if integer else "%.17g"
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, M, fmt=fmt, delimiter=",")


def read_matrix(path, name=None):
    name = name or os.path.basename(path)
    with open(path) as fh:
        text = fh.read()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            M = np.loadtxt(text.splitlines(), delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise DataError(f"{name}: cannot parse matrix ({exc})") from exc
    if M.size == 0:
        raise DataError(f"{name}: empty matrix")
    if not np.all(np.isfinite(M)):
        raise DataError(f"{name}: non-finite entries")
    return M


def read_mask(path):
    M = read_matrix(path, os.path.basename(path))
    if not np.all(np.isin(M, (0.0, 1.0))):
        raise DataError(f"{path}: mask entries must be 0 or 1")
    try:
        return MaskConstraint(M.astype(bool), name=os.path.basename(path))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False))
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from exc


def model_to_dict(fit, constraint, center=None):
    return {
        "format": MODEL_FORMAT,
        "B": fit.B,
        "Omega": fit.omega,
        "objective_trace": fit.objective_trace,
        "converged": fit.converged,
        "iterations": fit.outer_iters,
        "lambda1": fit.lambda1,
        "lambda2": fit.lambda2,
        "min_diag": fit.min_diag,
        "constraint": {
            "id": fit.constraint_id,
            "digest": None if constraint is None else constraint.digest(),
        },
        "center": center,
    }


def load_model(path):
    m = read_json(path)
    if not isinstance(m, dict) or m.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: unsupported model format")
    try:
        B = np.array(m["B"], dtype=float, ndmin=2)
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"{path}: malformed model ({exc})") from exc
    return m, B


def predict_from_model(model, B, X):
    if X.shape[1] != B.shape[0]:
        raise DataError(f"X has {X.shape[1]} columns but the model expects {B.shape[0]}")
    center = model.get("center")
    if center:
        return (X - np.array(center["x_mean"])) @ B + np.array(center["y_mean"])
    return X @ B


# -- argument helpers -------------------------------------------------------

def _grid_axis(spec):
    try:
        lo, hi, num = spec.split(":")
        lo, hi, num = float(lo), float(hi), int(num)
    except ValueError as exc:
        raise UsageError(f"grid spec must be lo:hi:num (log10 scale), got {spec!r}") from exc
    if num < 1:
        raise UsageError("grid size must be positive")
    return log_grid(lo, hi, num)


def _grid(args):
    l1 = _grid_axis(args.lambda1_log or args.grid_log)
    l2 = _grid_axis(args.lambda2_log or args.grid_log)
    return [(a, b) for a in l1 for b in l2]


def _options(args):
    kw = {}
    for attr, key in (("tol", "tol_rel"), ("max_outer_iter", "max_outer_iter"),
                      ("inner_tol", "inner_tol"), ("inner_step", "inner_step")):
        val = getattr(args, attr, None)
        if val is not None:
            kw[key] = val
    try:
        return SolverOptions(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_xy(args):
    X = read_matrix(args.X, "X")
    Y = read_matrix(args.Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    return Dataset(X, Y)


def _load_mask(args, q):
    if not args.mask:
        return None
    C = read_mask(args.mask)
    if C.mask.shape[0] != q:
        raise DataError(f"mask is {C.mask.shape[0]}x{C.mask.shape[0]} but Y has {q} columns")
    return C


def _metrics(Y, P):
    out = {}
    try:
        out["mse_percentage"] = mse_percentage(Y, P)
    except UndefinedMetric:
        out["mse_percentage"] = None
    try:
        out["r"], out["p_value"] = pearson_r(Y, P)
    except (UndefinedMetric, ValueError):
        out["r"], out["p_value"] = None, None
    return out


# -- commands ---------------------------------------------------------------

def cmd_simulate(args):
    try:
        cfg = SimConfig(
            p=args.p, q=args.q, n=args.n, density=args.density, s1=args.s1, s2=args.s2,
            t_dof=math.inf if args.gaussian else args.t_dof, ar_coef=args.ar_coef,
            seed=args.seed, diag_shift=args.diag_shift, noiseless=args.noiseless,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        sim = simulate(cfg)
    except DensityError as exc:
        raise DataError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    files = {
        "X.csv": sim.train.X, "Y.csv": sim.train.Y,
        "X_val.csv": sim.validation.X, "Y_val.csv": sim.validation.Y,
        "B0.csv": sim.B0, "Omega0.csv": sim.omega0,
    }
    for name, M in files.items():
        write_matrix(os.path.join(args.out, name), M)
    masks = {"perfect": 0.0, "snr2": 0.5, "snr1": 1.0}
    for name, ratio in masks.items():
        mask = perturb_mask(sim.omega0, ratio, cfg.seed)
        write_matrix(os.path.join(args.out, f"mask_{name}.csv"), mask.astype(int), integer=True)
    meta = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "density_achieved": sim.info["density"],
        "condition_number": sim.info["condition_number"],
        "omega_draws": sim.info["draws"],
        "B0_density": float(np.count_nonzero(sim.B0) / sim.B0.size),
        "masks": {name: {"extra_ratio": r, "density": off_diag_density(
            perturb_mask(sim.omega0, r, cfg.seed).astype(float))} for name, r in masks.items()},
        "version": __version__,
    }
    write_json(os.path.join(args.out, "meta.json"), meta)
    return EXIT_OK


def _center(data, enabled):
    if not enabled:
        return data, None
    xm, ym = data.X.mean(axis=0), data.Y.mean(axis=0)
    return Dataset(data.X - xm, data.Y - ym), {"x_mean": xm, "y_mean": ym}


def cmd_fit(args):
    data = _load_xy(args)
    C = _load_mask(args, data.q)
    opts = _options(args)
    if args.lambda1 < 0 or args.lambda2 < 0:
        raise UsageError("penalties must be nonnegative")
    if data.n < 2:
        raise DataError("need at least two samples")
    data, center = _center(data, args.center)
    fit = fit_model(data, args.lambda1, args.lambda2, C, opts)
    write_json(args.out, model_to_dict(fit, C, center))
    return EXIT_OK


def cmd_predict(args):
    model, B = load_model(args.model)
    X = read_matrix(args.X, "X")
    write_matrix(args.out, predict_from_model(model, B, X))
    return EXIT_OK


def cmd_eval(args):
    Y = read_matrix(args.Y_true, "Y_true")
    if args.Y_pred:
        P = read_matrix(args.Y_pred, "Y_pred")
    elif args.model and args.X:
        model, B = load_model(args.model)
        P = predict_from_model(model, B, read_matrix(args.X, "X"))
    else:
        raise UsageError("eval needs --Y-pred, or --model together with --X")
    if P.shape != Y.shape:
        raise DataError(f"prediction shape {P.shape} does not match {Y.shape}")
    write_json(args.out, _metrics(Y, P))
    return EXIT_OK


def _cell_summary(fit, data, val):
    if isinstance(fit, CellFailure):
        return {"lambda1": fit.lambda1, "lambda2": fit.lambda2, "error": fit.error}
    q = fit.omega.shape[0]
    out = {
        "lambda1": fit.lambda1,
        "lambda2": fit.lambda2,
        "converged": fit.converged,
        "outer_iters": fit.outer_iters,
        "objective": fit.objective_trace[-1],
        "nonzero_B": int(np.count_nonzero(fit.B)),
        "nonzero_omega_pairs": int(np.count_nonzero(fit.omega[np.triu_indices(q, 1)])),
        "train": _metrics(data.Y, fit.predict(data.X)),
    }
    if val is not None:
        out["validation"] = _metrics(val.Y, fit.predict(val.X))
    return out


def cmd_sweep(args):
    data = _load_xy(args)
    C = _load_mask(args, data.q)
    opts = _options(args)
    grid = _grid(args)
    if bool(args.B0) != bool(args.Omega0):
        raise DataError("ROC evaluation needs both --B0 and --Omega0")
    val = None
    if args.X_val or args.Y_val:
        if not (args.X_val and args.Y_val):
            raise UsageError("--X-val and --Y-val go together")
        val = Dataset(read_matrix(args.X_val, "X_val"), read_matrix(args.Y_val, "Y_val"))
        if val.p != data.p or val.q != data.q:
            raise DataError("validation data dimensions differ from training data")
    fits = grid_sweep(data, grid, C, opts, threads=args.threads)
    report = {
        "constraint": None if C is None else {"id": C.id, "digest": C.digest()},
        "cells": [_cell_summary(f, data, val) for f in fits],
    }
    if val is not None:
        scored = [(c["validation"]["mse_percentage"], i) for i, c in enumerate(report["cells"])
                  if "validation" in c and c["validation"]["mse_percentage"] is not None]
        if scored:
            best = report["cells"][min(scored)[1]]
            report["best"] = {"lambda1": best["lambda1"], "lambda2": best["lambda2"],
                              "validation": best["validation"]}
    if args.B0:
        B0 = read_matrix(args.B0, "B0")
        O0 = read_matrix(args.Omega0, "Omega0")
        if B0.shape != (data.p, data.q) or O0.shape != (data.q, data.q):
            raise DataError("ground truth dimensions do not match the data")
        roc_o, roc_b = roc_from_sweep(fits, O0, B0)
        report["fpr_cap"] = args.fpr_cap
        report["roc_omega"] = [[p.fpr, p.tpr, p.lambda1, p.lambda2] for p in roc_o]
        report["roc_B"] = [[p.fpr, p.tpr, p.lambda1, p.lambda2] for p in roc_b]
        report["relative_auc_omega"] = relative_auc(roc_o, args.fpr_cap)
        report["relative_auc_B"] = relative_auc(roc_b, args.fpr_cap)
    write_json(args.out, report)
    return EXIT_OK


def cmd_cv(args):
    data = _load_xy(args)
    C = _load_mask(args, data.q)
    opts = _options(args)
    grid = _grid(args)
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    if data.n < args.folds:
        raise DataError(f"cannot split {data.n} samples into {args.folds} folds")
    if args.min_count is not None and not 0 <= args.min_count <= args.folds:
        raise UsageError("--min-count must lie in [0, folds]")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = cross_validate(data, args.folds, grid, C, opts, seed=args.seed,
                                threads=args.threads, min_count=args.min_count)
    write_json(args.out, report.to_dict())
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, help="outer relative tolerance (default 1e-6)")
    g.add_argument("--max-outer-iter", type=int)
    g.add_argument("--inner-tol", type=float)
    g.add_argument("--inner-step", choices=["backtracking", "constant"])


def _add_data_flags(p):
    p.add_argument("--X", required=True, help="predictor CSV (n x p)")
    p.add_argument("--Y", required=True, help="response CSV (n x q)")
    p.add_argument("--mask", help="0/1 CSV constraining the precision matrix (q x q)")


def _add_grid_flags(p):
    p.add_argument("--grid-log", default="-1.6:-0.4:5",
                   help="log10 grid lo:hi:num used for both penalties")
    p.add_argument("--lambda1-log", help="separate lo:hi:num grid for lambda1")
    p.add_argument("--lambda2-log", help="separate lo:hi:num grid for lambda2")
    p.add_argument("--threads", type=int, default=None,
                   help="parallel fits (default: $CCMRCE_THREADS or 1)")


def build_parser():
    parser = _Parser(prog="ccmrce", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic dataset and masks")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--q", type=int, default=20)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--density", type=float, default=0.10)
    p.add_argument("--s1", type=float, default=0.15)
    p.add_argument("--s2", type=float, default=0.8)
    p.add_argument("--t-dof", type=float, default=5.0)
    p.add_argument("--gaussian", action="store_true", help="Gaussian instead of t residuals")
    p.add_argument("--ar-coef", type=float, default=0.5)
    p.add_argument("--diag-shift", type=float, default=0.0)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit B and Omega for one penalty pair")
    _add_data_flags(p)
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--lambda2", type=float, required=True)
    p.add_argument("--center", action="store_true", help="subtract column means first")
    p.add_argument("--out", required=True, help="model JSON path")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict Y from a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--X", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="MSE percentage and Pearson r of predictions")
    p.add_argument("--Y-true", dest="Y_true", required=True)
    p.add_argument("--Y-pred", dest="Y_pred")
    p.add_argument("--model")
    p.add_argument("--X")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="fit a penalty grid; ROC and relative AUC with ground truth")
    _add_data_flags(p)
    _add_grid_flags(p)
    p.add_argument("--X-val", dest="X_val")
    p.add_argument("--Y-val", dest="Y_val")
    p.add_argument("--B0")
    p.add_argument("--Omega0")
    p.add_argument("--fpr-cap", type=float, default=0.2)
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cv", help="k-fold cross-validated grid search")
    _add_data_flags(p)
    _add_grid_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-count", type=int, default=None,
                   help="folds an entry must exceed to enter the common support")
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_cv)
    return parser


_GRID_FLAGS = ("--grid-log", "--lambda1-log", "--lambda2-log")


def _fuse_grid_args(argv):
    # "-1.6:-0.4:5" looks like an option to argparse; bind it to its flag
    out, it = [], iter(argv)
    for tok in it:
        if tok in _GRID_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_fuse_grid_args(argv))
    if getattr(args, "threads", None) is not None:
        args.threads = resolve_threads(args.threads)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ccmrce: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"ccmrce: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"ccmrce: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"ccmrce: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
