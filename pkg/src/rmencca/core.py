"""Shared data types: views, datasets, canonical pairs, hyperparameters,
solver state, and fit reports.

Layout convention: a view is stored features x samples (d x n), so the
projection of a view through a canonical matrix U is data.T @ U (n x k).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BatchTooLarge,
    DegenerateInput,
    NonFiniteEntry,
    RankBudgetTooLarge,
    SampleCountMismatch,
)


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D array, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a nonempty matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class ViewMatrix:
    """One view, d features x n samples.

    `centered` records that `feature_means` have been subtracted from the
    rows.  For the output of center() the means are the view's own sample
    means, so each row sums to (numerically) zero; a view centered with
    *training* means (center_with_means) carries the flag too, even though
    its rows need not sum to zero.
    """

    data: np.ndarray
    feature_means: np.ndarray
    centered: bool

    @classmethod
    def of(cls, data) -> "ViewMatrix":
        m = _as_matrix(data)
        return cls(data=m, feature_means=np.zeros(m.shape[0]), centered=False)

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class TwoViewDataset:
    """Paired views; column j of x and column j of y describe the same sample."""

    x: ViewMatrix
    y: ViewMatrix

    @property
    def n(self) -> int:
        return self.x.n


@dataclass(frozen=True, eq=False)
class CanonicalPair:
    """The true canonical matrices (U: d1 x k, V: d2 x k)."""

    u: np.ndarray
    v: np.ndarray

    @property
    def k(self) -> int:
        return self.u.shape[1]


class Penalty(str, enum.Enum):
    """Row penalty mode for the lambda1 term: l21 (default) or plain Frobenius."""

    L21 = "l21"
    FROBENIUS = "frobenius"


@dataclass(frozen=True)
class Hyperparams:
    k: int
    lambda1: float = 0.01
    lambda2: float = 0.001
    eta: float = 0.005
    gamma: float = 0.9
    zeta: float = 1e-8
    max_iters: int = 500
    tol: float = 1e-6
    batch_size: int | None = None
    seed: int = 0
    penalty: Penalty = Penalty.L21

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative (0 disables early stopping)")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive when given")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        object.__setattr__(self, "penalty", Penalty(self.penalty))


@dataclass
class SolverState:
    """Mutable in-flight solver variables; owned by exactly one fit."""

    u_tilde: np.ndarray
    v_tilde: np.ndarray
    delta_u: np.ndarray
    delta_v: np.ndarray
    pair: CanonicalPair
    iter: int = 0
    objective_trace: list[float] = field(default_factory=list)


class Termination(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True, eq=False)
class FitReport:
    pair: CanonicalPair
    iterations_run: int
    objective_trace: tuple[float, ...]
    final_constraint_residual_u: float
    final_constraint_residual_v: float
    termination: Termination
    wall_seconds: float


# ---------------------------------------------------------------- operations

def center(view: ViewMatrix) -> ViewMatrix:
    """Subtract per-feature sample means.

    Idempotent: a view already flagged centered is returned as-is.
    """
    if view.n < 2:
        raise DegenerateInput(f"centering needs n >= 2, got n={view.n}")
    if view.centered:
        return view
    means = view.data.mean(axis=1)
    return ViewMatrix(
        data=view.data - means[:, None],
        feature_means=means,
        centered=True,
    )


def center_with_means(view: ViewMatrix, means: np.ndarray) -> ViewMatrix:
    """Center with externally supplied (training) means, e.g. for test views."""
    means = np.asarray(means, dtype=np.float64).reshape(-1)
    if means.shape[0] != view.d:
        raise ValueError(
            f"means length {means.shape[0]} != feature count {view.d}"
        )
    return ViewMatrix(
        data=view.data - means[:, None],
        feature_means=means,
        centered=True,
    )


def validate_dataset(ds: TwoViewDataset, hp: Hyperparams) -> None:
    """Shape, finiteness, and budget checks shared by every fit entry point."""
    if ds.x.n != ds.y.n:
        raise SampleCountMismatch(
            f"view x has {ds.x.n} samples but view y has {ds.y.n}"
        )
    if not np.isfinite(ds.x.data).all():
        raise NonFiniteEntry("view x contains non-finite entries")
    if not np.isfinite(ds.y.data).all():
        raise NonFiniteEntry("view y contains non-finite entries")
    bound = min(ds.x.d, ds.y.d, ds.n)
    if hp.k > bound:
        raise RankBudgetTooLarge(
            f"k={hp.k} exceeds min(d1, d2, n) = {bound}"
        )
    if hp.batch_size is not None and hp.batch_size > ds.n:
        raise BatchTooLarge(
            f"batch_size={hp.batch_size} exceeds n={ds.n}"
        )
