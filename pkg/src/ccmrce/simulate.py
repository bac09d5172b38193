"""Synthetic data: sparse ground truth (Omega0, B0), AR(rho) Gaussian
predictors, multivariate-t residuals with covariance inv(Omega0), and
constraint masks that loosen the true support by spurious positions.

All randomness flows from one integer seed through ``numpy.random.SeedSequence``
children, so identical configurations give bit-identical outputs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import Dataset, as_symmetric, symmetrize

# child stream indices of the master seed
_OMEGA, _B, _TRAIN, _VALID, _MASK = range(5)


@dataclass(frozen=True)
class SimConfig:
    p: int = 20
    q: int = 20
    n: int = 50
    density: float = 0.10
    s1: float = 0.15
    s2: float = 0.8
    t_dof: float = 5.0
    ar_coef: float = 0.5
    seed: int = 0
    diag_shift: float = 0.0
    noiseless: bool = False

    def __post_init__(self):
        for name in ("p", "q", "n"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0 < self.density <= 1:
            raise ValueError("density must lie in (0, 1]")
        for name in ("s1", "s2"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.t_dof > 2:
            raise ValueError("t_dof must exceed 2 for a finite covariance")
        if not -1 < self.ar_coef < 1:
            raise ValueError("ar_coef must lie in (-1, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.diag_shift < 0:
            raise ValueError("diag_shift must be nonnegative")

    def to_dict(self):
        return asdict(self)


def _rng(seed, stream):
    return np.random.default_rng(np.random.SeedSequence(int(seed)).spawn(stream + 1)[stream])


def off_diag_density(M):
    p = M.shape[0]
    if p < 2:
        return 0.0
    nz = np.count_nonzero(M) - np.count_nonzero(np.diag(M))
    return nz / (p * (p - 1))


class DensityError(RuntimeError):
    pass


def gen_omega0(p, density, seed, *, rng=None, band=0.02, max_tries=100, diag_shift=0.0):
    """Sparse positive definite precision matrix ``L @ L.T``.

    ``L`` is lower triangular with diagonal ``U(0.5, 1.5)`` and off-diagonal
    entries kept with some probability and valued ``0.5 * U(-1, 1)``. The
    keep probability is adapted between draws until the off-diagonal
    nonzero fraction of the product is within ``band`` of ``density``.

    Returns ``(omega0, info)`` where ``info`` holds the achieved density,
    condition number and number of draws.
    """
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    rng = _rng(seed, _OMEGA) if rng is None else rng
    # each nonzero of L below the diagonal spreads to roughly (1 + 2 * keep * p / 3) entries
    keep = min(1.0, density / (1.0 + density * p / 2.0))
    history = []
    lower = np.tril_indices(p, -1)
    for attempt in range(1, max_tries + 1):
        L = np.diag(rng.uniform(0.5, 1.5, size=p))
        vals = 0.5 * rng.uniform(-1.0, 1.0, size=len(lower[0]))
        on = rng.random(len(lower[0])) < keep
        L[lower] = np.where(on, vals, 0.0)
        omega = symmetrize(L @ L.T)
        if diag_shift:
            omega = omega + diag_shift * np.eye(p)
        achieved = off_diag_density(omega)
        history.append(achieved)
        if abs(achieved - density) <= band + 1e-12:
            eig = np.linalg.eigvalsh(omega)
            info = {
                "density": achieved,
                "condition_number": float(eig[-1] / eig[0]),
                "draws": attempt,
            }
            return omega, info
        # multiplicative correction towards the target, damped
        ratio = density / achieved if achieved > 0 else 2.0
        keep = float(np.clip(keep * ratio ** 0.5, 1e-6, 1.0))
    raise DensityError(
        f"could not reach off-diagonal density {density} +/- {band} in {max_tries} draws "
        f"(p={p}, last densities {history[-5:]}, last keep probability {keep:.4g})"
    )


def gen_b0(p, q, s1, s2, seed, *, rng=None):
    """Sparse coefficients ``W * K * Q``: normal values, Bernoulli(s1) entry
    mask, Bernoulli(s2) row mask."""
    for s in (s1, s2):
        if not 0 <= s <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
    rng = _rng(seed, _B) if rng is None else rng
    W = rng.standard_normal((p, q))
    K = rng.random((p, q)) < s1
    rows = rng.random(p) < s2
    return W * K * rows[:, None]


def ar_covariance(p, rho):
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def sample_t_noise(n, sigma, nu, seed=None, *, rng=None):
    """Rows iid multivariate t with zero mean and covariance ``sigma``.

    Each row is ``N(0, (nu - 2)/nu * sigma) * sqrt(nu / chi2_nu)``.
    ``nu = inf`` gives Gaussian rows.
    """
    sigma = as_symmetric(sigma, "sigma")
    if not nu > 2:
        raise ValueError("nu must exceed 2")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("sigma is not positive definite") from exc
    rng = np.random.default_rng(seed) if rng is None else rng
    q = sigma.shape[0]
    Z = rng.standard_normal((n, q)) @ chol.T
    if math.isinf(nu):
        return Z
    w = np.sqrt(nu / rng.chisquare(nu, size=n))
    return Z * math.sqrt((nu - 2.0) / nu) * w[:, None]


def _draw_xy(cfg, B0, sigma, rng):
    X = rng.multivariate_normal(np.zeros(cfg.p), ar_covariance(cfg.p, cfg.ar_coef), size=cfg.n,
                                method="cholesky")
    Y = X @ B0
    if not cfg.noiseless:
        Y = Y + sample_t_noise(cfg.n, sigma, cfg.t_dof, rng=rng)
    return Dataset(X, Y)


@dataclass
class Simulation:
    train: Dataset
    validation: Dataset
    B0: np.ndarray
    omega0: np.ndarray
    info: dict


def simulate(cfg):
    """Ground truth plus independent training and validation sets of the
    same size drawn from it."""
    omega0, info = gen_omega0(cfg.q, cfg.density, cfg.seed, diag_shift=cfg.diag_shift)
    B0 = gen_b0(cfg.p, cfg.q, cfg.s1, cfg.s2, cfg.seed)
    sigma = symmetrize(np.linalg.inv(omega0))
    train = _draw_xy(cfg, B0, sigma, _rng(cfg.seed, _TRAIN))
    valid = _draw_xy(cfg, B0, sigma, _rng(cfg.seed, _VALID))
    return Simulation(train, valid, B0, omega0, info)


def gen_dataset(cfg):
    """``(dataset, B0, omega0)`` for a configuration."""
    sim = simulate(cfg)
    return sim.train, sim.B0, sim.omega0


def perturb_mask(omega0, extra_ratio, seed):
    """Support of ``omega0`` plus ``floor(extra_ratio * k)`` spurious pairs,
    ``k`` the number of nonzero off-diagonal pairs.

    Spurious pairs are a prefix of one seeded shuffle of the zero pairs, so
    masks from the same seed are nested in ``extra_ratio``.
    """
    if extra_ratio < 0:
        raise ValueError("extra_ratio must be nonnegative")
    omega0 = np.asarray(omega0)
    q = omega0.shape[0]
    iu = np.triu_indices(q, 1)
    upper = omega0[iu] != 0
    zeros = np.flatnonzero(~upper)
    n_extra = int(math.floor(extra_ratio * int(upper.sum()) + 1e-9))
    if n_extra > len(zeros):
        raise ValueError(f"requested {n_extra} spurious pairs but only {len(zeros)} zero pairs exist")
    order = _rng(seed, _MASK).permutation(len(zeros))
    chosen = upper.copy()
    chosen[zeros[order[:n_extra]]] = True
    mask = np.eye(q, dtype=bool)
    mask[iu] = chosen
    mask.T[iu] = chosen
    return mask
