"""Row-sparsity and low-rank penalties.

l21 norm, its half-quadratic diagonal surrogate (diagonal weights
p_i = 1 / (2 sqrt(||row_i||^2 + zeta))), the nuclear norm, and the factored
S-inverse operator representing (M + zeta I)^(-1/2) for
M = proj_x proj_x^T + proj_y proj_y^T without ever forming an n x n matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSmoothing

# singular values of the projection concatenation below this fraction of the
# largest are treated as numerically zero
_RANK_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class HQDiagonal:
    """Diagonal of the half-quadratic weight matrix P (or Q)."""

    weights: np.ndarray
    zeta: float


@dataclass(frozen=True, eq=False)
class SInverseOperator:
    """Factored (M + zeta I)^(-1/2).

    Vectors inside span(basis) are scaled by scaled_eigs; anything orthogonal
    to the basis is scaled by complement_scale = zeta^(-1/2).
    """

    basis: np.ndarray
    scaled_eigs: np.ndarray
    complement_scale: float
    n: int


def l21_norm(m) -> float:
    """Sum of Euclidean row norms."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.linalg.norm(m, axis=1).sum())


def nuclear_norm(m) -> float:
    """Sum of singular values."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.linalg.svd(m, compute_uv=False).sum())


def hq_diagonal(m, zeta: float) -> HQDiagonal:
    """Half-quadratic weights for the rows of m.

    weights[i] = 1 / (2 sqrt(||row_i||^2 + zeta)); the smoothing keeps the
    weight finite for zero rows (bounded by 1 / (2 sqrt(zeta))).
    """
    if zeta <= 0:
        raise InvalidSmoothing(f"zeta must be positive, got {zeta}")
    m = np.asarray(m, dtype=np.float64)
    sq = (m * m).sum(axis=1)
    return HQDiagonal(weights=1.0 / (2.0 * np.sqrt(sq + zeta)), zeta=zeta)


def surrogate_penalty(m, hq: HQDiagonal) -> float:
    """Tr(m^T diag(weights) m), the weighted quadratic standing in for l21."""
    m = np.asarray(m, dtype=np.float64)
    if hq.weights.shape[0] != m.shape[0]:
        raise DimensionMismatch(
            f"weights for {hq.weights.shape[0]} rows applied to {m.shape[0]} rows"
        )
    return float((hq.weights * (m * m).sum(axis=1)).sum())


def build_s_inverse(proj_x, proj_y, zeta: float) -> SInverseOperator:
    """Factor (M + zeta I)^(-1/2) from the two n x k projection blocks.

    M has rank at most 2k, so a thin SVD of the n x 2k concatenation
    [proj_x proj_y] yields the nonzero spectrum (eigenvalues are the squared
    singular values) and the basis; the orthogonal complement is handled by
    the scalar zeta^(-1/2).
    """
    if zeta <= 0:
        raise InvalidSmoothing(f"zeta must be positive, got {zeta}")
    proj_x = np.asarray(proj_x, dtype=np.float64)
    proj_y = np.asarray(proj_y, dtype=np.float64)
    if proj_x.shape[0] != proj_y.shape[0]:
        raise DimensionMismatch(
            f"projection row counts differ: {proj_x.shape[0]} vs {proj_y.shape[0]}"
        )
    n = proj_x.shape[0]
    concat = np.concatenate([proj_x, proj_y], axis=1)
    phi, sigma, _ = np.linalg.svd(concat, full_matrices=False)
    if sigma.size and sigma[0] > 0.0:
        keep = sigma > _RANK_CUTOFF * sigma[0]
    else:
        keep = np.zeros(sigma.shape, dtype=bool)
    phi = phi[:, keep]
    eigs = sigma[keep] ** 2
    return SInverseOperator(
        basis=phi,
        scaled_eigs=1.0 / np.sqrt(eigs + zeta),
        complement_scale=zeta ** -0.5,
        n=n,
    )


def apply_s_inverse(op: SInverseOperator, m) -> np.ndarray:
    """Apply the factored operator to an n x c block in O(n c r)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.shape[0] != op.n:
        raise DimensionMismatch(
            f"operator acts on {op.n} rows, got {m.shape[0]}"
        )
    coeff = op.basis.T @ m
    return op.complement_scale * m + op.basis @ (
        (op.scaled_eigs - op.complement_scale)[:, None] * coeff
    )
