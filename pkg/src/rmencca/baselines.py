"""Classical baselines.

cca_closed_form solves linear CCA exactly through the whitened
cross-covariance SVD and doubles as the oracle the iterative solver is
tested against at zero regularization.  appgrad_config and men_cca_mode
express the plain-gradient and Frobenius-penalty baselines as
parameterizations of the main solver.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import CanonicalPair, Hyperparams, Penalty, TwoViewDataset
from .errors import RankBudgetTooLarge, SingularCovariance
from .solver import normalize


@dataclass(frozen=True, eq=False)
class CCASolution:
    """Whitened canonical pair plus its canonical correlations, sorted
    descending in [0, 1]."""

    pair: CanonicalPair
    correlations: tuple[float, ...]


def cca_closed_form(
    ds: TwoViewDataset, k: int, ridge: float | None = None
) -> CCASolution:
    """Classical CCA: top-k SVD of (XX^T/n)^(-1/2) (XY^T/n) (YY^T/n)^(-1/2).

    ridge is added to the covariance eigenvalues before the inverse square
    root; None picks 1e-8 * trace(cov)/d per view, a scale-aware floor.  An
    explicit ridge of 0 demands genuinely nonsingular covariances.
    """
    x, y = ds.x.data, ds.y.data
    n, d1, d2 = ds.n, ds.x.d, ds.y.d
    if k < 1 or k > min(d1, d2):
        raise RankBudgetTooLarge(f"k={k} exceeds min(d1, d2) = {min(d1, d2)}")
    cov_x = x @ x.T / n
    cov_y = y @ y.T / n
    cross = x @ y.T / n
    wx = _inv_sqrt(cov_x, ridge)
    wy = _inv_sqrt(cov_y, ridge)
    left, svals, right_t = np.linalg.svd(wx @ cross @ wy)
    u = wx @ left[:, :k]
    v = wy @ right_t[:k].T
    u = _exact_rewhiten(u, cov_x)
    v = _exact_rewhiten(v, cov_y)
    corr = np.clip(svals[:k], 0.0, 1.0)
    return CCASolution(
        pair=CanonicalPair(u=u, v=v),
        correlations=tuple(float(c) for c in corr),
    )


def appgrad_config(hp: Hyperparams) -> Hyperparams:
    """Plain alternating projected gradient: no penalties, no momentum."""
    return dataclasses.replace(hp, lambda1=0.0, lambda2=0.0, gamma=0.0)


def men_cca_mode(hp: Hyperparams) -> Hyperparams:
    """Matrix-elastic-net variant: the row-wise penalty becomes Frobenius
    (unit half-quadratic weights); the nuclear term is unchanged."""
    return dataclasses.replace(hp, penalty=Penalty.FROBENIUS)


def _inv_sqrt(cov: np.ndarray, ridge: float | None) -> np.ndarray:
    d = cov.shape[0]
    if ridge is None:
        ridge = 1e-8 * float(np.trace(cov)) / d
    if ridge < 0.0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    eigvals = np.maximum(eigvals, 0.0)
    if ridge == 0.0 and eigvals.min() < 1e-12:
        raise SingularCovariance(
            f"covariance eigenvalue {eigvals.min():.3e} below 1e-12 with ridge=0"
        )
    scale = 1.0 / np.sqrt(eigvals + ridge)
    return (eigvecs * scale) @ eigvecs.T


def _exact_rewhiten(m: np.ndarray, cov: np.ndarray) -> np.ndarray:
    # the ridge perturbs the whitening constraint by O(ridge/eig); one exact
    # normalization pass removes it without moving the subspace
    gram = m.T @ cov @ m
    gram = 0.5 * (gram + gram.T)
    eigvals = np.linalg.eigvalsh(gram)
    if eigvals[0] <= 1e-10 * max(eigvals[-1], 1.0):
        return m
    return normalize(m, cov, 0.0)
