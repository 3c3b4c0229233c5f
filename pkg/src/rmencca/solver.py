"""Momentum gradient solver with SVD whitening.

One iteration, given the current true pair (U, V):

  1. factor the S-inverse operator from the projections X^T U, Y^T V
  2. build the half-quadratic diagonals P (from U) and Q (from V)
  3. gradient step on the unnormalized U-tilde, then whiten against XX^T/n
  4. gradient step on V-tilde using the freshly whitened U, whiten against
     YY^T/n

The stochastic variant draws a fresh sample subset each iteration and
computes every per-iteration quantity (gradients, S-inverse, whitening
covariances, objective) from the minibatch with 1/m scaling, then restores
the exact full-batch whitening constraints once at the end.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    CanonicalPair,
    FitReport,
    Hyperparams,
    Penalty,
    SolverState,
    Termination,
    TwoViewDataset,
    ViewMatrix,
    validate_dataset,
)
from .errors import AllZeroInput, DimensionMismatch, NonFiniteIterate
from .regularizers import (
    HQDiagonal,
    SInverseOperator,
    apply_s_inverse,
    build_s_inverse,
    hq_diagonal,
    l21_norm,
    nuclear_norm,
)

_CONVERGENCE_WINDOW = 5


@dataclass(frozen=True, eq=False)
class IterationContext:
    """Per-iteration quantities frozen from the current true pair."""

    s_inv: SInverseOperator
    p: HQDiagonal
    q: HQDiagonal
    cov_x: np.ndarray
    cov_y: np.ndarray


def build_context(
    ds: TwoViewDataset,
    pair: CanonicalPair,
    hp: Hyperparams,
    cov_x: np.ndarray | None = None,
    cov_y: np.ndarray | None = None,
) -> IterationContext:
    """Freeze S^-1, P, Q, and the whitening covariances for one iteration.

    `ds` is the minibatch in stochastic mode; precomputed covariances may be
    passed in to avoid recomputation in full-batch mode.
    """
    x, y = ds.x.data, ds.y.data
    n = ds.n
    if cov_x is None:
        cov_x = x @ x.T / n
    if cov_y is None:
        cov_y = y @ y.T / n
    s_inv = build_s_inverse(x.T @ pair.u, y.T @ pair.v, hp.zeta)
    if hp.penalty is Penalty.L21:
        p = hq_diagonal(pair.u, hp.zeta)
        q = hq_diagonal(pair.v, hp.zeta)
    else:
        p = HQDiagonal(weights=np.ones(ds.x.d), zeta=hp.zeta)
        q = HQDiagonal(weights=np.ones(ds.y.d), zeta=hp.zeta)
    return IterationContext(s_inv=s_inv, p=p, q=q, cov_x=cov_x, cov_y=cov_y)


def objective(ds: TwoViewDataset, pair: CanonicalPair, hp: Hyperparams) -> float:
    """Full objective with the true (non-surrogate) norms:

    (1/2n) ||X^T U - Y^T V||_F^2 + lambda1 (||U||_21 + ||V||_21)
                                 + lambda2 ||[X^T U  Y^T V]||_*

    In Frobenius penalty mode the lambda1 term is ||U||_F^2 + ||V||_F^2.
    """
    if pair.u.shape[0] != ds.x.d or pair.v.shape[0] != ds.y.d:
        raise DimensionMismatch(
            f"pair shapes {pair.u.shape}/{pair.v.shape} do not fit views "
            f"d1={ds.x.d}, d2={ds.y.d}"
        )
    a = ds.x.data.T @ pair.u
    b = ds.y.data.T @ pair.v
    diff = a - b
    val = 0.5 / ds.n * float((diff * diff).sum())
    if hp.lambda1 != 0.0:
        if hp.penalty is Penalty.L21:
            val += hp.lambda1 * (l21_norm(pair.u) + l21_norm(pair.v))
        else:
            val += hp.lambda1 * float((pair.u * pair.u).sum()
                                      + (pair.v * pair.v).sum())
    if hp.lambda2 != 0.0:
        val += hp.lambda2 * nuclear_norm(np.concatenate([a, b], axis=1))
    return val


def grad_u(
    ds: TwoViewDataset,
    state: SolverState,
    ctx: IterationContext,
    hp: Hyperparams,
) -> np.ndarray:
    """(1/n) X (X^T U~ - Y^T V) + lambda1 P U~ + lambda2 X S^-1 X^T U~."""
    x, y = ds.x.data, ds.y.data
    ut = state.u_tilde
    if ut.shape[0] != ds.x.d:
        raise DimensionMismatch(f"u_tilde has {ut.shape[0]} rows, view x has {ds.x.d}")
    g = ctx.cov_x @ ut - x @ (y.T @ state.pair.v) / ds.n
    if hp.lambda1 != 0.0:
        g = g + hp.lambda1 * ctx.p.weights[:, None] * ut
    if hp.lambda2 != 0.0:
        g = g + hp.lambda2 * (x @ apply_s_inverse(ctx.s_inv, x.T @ ut))
    return g


def grad_v(
    ds: TwoViewDataset,
    state: SolverState,
    ctx: IterationContext,
    hp: Hyperparams,
) -> np.ndarray:
    """Mirror of grad_u; the residual uses the freshly updated U in state.pair."""
    x, y = ds.x.data, ds.y.data
    vt = state.v_tilde
    if vt.shape[0] != ds.y.d:
        raise DimensionMismatch(f"v_tilde has {vt.shape[0]} rows, view y has {ds.y.d}")
    g = ctx.cov_y @ vt - y @ (x.T @ state.pair.u) / ds.n
    if hp.lambda1 != 0.0:
        g = g + hp.lambda1 * ctx.q.weights[:, None] * vt
    if hp.lambda2 != 0.0:
        g = g + hp.lambda2 * (y @ apply_s_inverse(ctx.s_inv, y.T @ vt))
    return g


def momentum_step(
    m_tilde: np.ndarray,
    delta: np.ndarray,
    grad: np.ndarray,
    hp: Hyperparams,
) -> tuple[np.ndarray, np.ndarray]:
    """delta' = gamma delta - eta grad; m_tilde' = m_tilde + delta'."""
    delta_new = hp.gamma * delta - hp.eta * grad
    return m_tilde + delta_new, delta_new


def normalize(m_tilde: np.ndarray, cov: np.ndarray, zeta: float) -> np.ndarray:
    """Whiten m_tilde so the result W satisfies W^T cov W = I.

    Eigendecomposes the k x k Gram m_tilde^T cov m_tilde and rescales by
    (Sigma + zeta I)^(-1/2) in the eigenbasis.  zeta = 0 is allowed when the
    Gram is safely nonsingular.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        gram = m_tilde.T @ cov @ m_tilde
    if not np.isfinite(gram).all():
        raise NonFiniteIterate(
            "projected Gram overflowed double precision; reduce eta or rescale inputs"
        )
    gram = 0.5 * (gram + gram.T)
    eigvals, eigvecs = np.linalg.eigh(gram)
    eigvals = np.maximum(eigvals, 0.0)
    if eigvals[-1] <= 0.0:
        raise AllZeroInput("projected Gram is numerically zero; cannot whiten")
    scale = 1.0 / np.sqrt(eigvals + zeta)
    return m_tilde @ ((eigvecs * scale) @ eigvecs.T)


def _whiten(m_tilde: np.ndarray, cov: np.ndarray, zeta: float) -> np.ndarray:
    # one refinement pass: the first whitening leaves an O(eps * cond) residual
    # when the Gram is ill-conditioned (early iterations); re-whitening the
    # nearly-feasible result reduces it to rounding level
    return normalize(normalize(m_tilde, cov, zeta), cov, zeta)


def project(pair: CanonicalPair, ds: TwoViewDataset) -> tuple[np.ndarray, np.ndarray]:
    """Canonical projections (X^T U, Y^T V); views centered with training means."""
    if pair.u.shape[0] != ds.x.d or pair.v.shape[0] != ds.y.d:
        raise DimensionMismatch(
            f"pair shapes {pair.u.shape}/{pair.v.shape} do not fit views "
            f"d1={ds.x.d}, d2={ds.y.d}"
        )
    return ds.x.data.T @ pair.u, ds.y.data.T @ pair.v


# ------------------------------------------------------------------ fitting

def fit_full(ds: TwoViewDataset, hp: Hyperparams, on_iteration=None) -> FitReport:
    """Full-batch fit.  `on_iteration(i, pair)`, when given, is called after
    every iteration with the freshly whitened pair."""
    if hp.batch_size is not None:
        raise ValueError("hp.batch_size is set; use fit_stochastic")
    return _fit(ds, hp, stochastic=False, on_iteration=on_iteration)


def fit_stochastic(ds: TwoViewDataset, hp: Hyperparams, on_iteration=None) -> FitReport:
    """Minibatch fit; requires hp.batch_size.  With batch_size = n the
    trajectory reproduces fit_full bitwise for the same seed."""
    if hp.batch_size is None:
        raise ValueError("fit_stochastic requires hp.batch_size")
    return _fit(ds, hp, stochastic=True, on_iteration=on_iteration)


def _fit(ds, hp, stochastic, on_iteration):
    validate_dataset(ds, hp)
    start = time.perf_counter()
    x, y = ds.x.data, ds.y.data
    n, d1, d2, k = ds.n, ds.x.d, ds.y.d, hp.k
    m = hp.batch_size if stochastic else n
    subsample = stochastic and m < n
    rng = np.random.default_rng(hp.seed)
    # whitening smoothing: far below zeta so the constraint residual stays
    # orders of magnitude under the 1e-8 * k budget
    zw = hp.zeta * 1e-6

    with np.errstate(over="ignore"):
        cov_x_full = x @ x.T / n
        cov_y_full = y @ y.T / n
    if not (np.isfinite(cov_x_full).all() and np.isfinite(cov_y_full).all()):
        raise NonFiniteIterate(
            "view covariance overflowed double precision; rescale the inputs"
        )
    u0 = rng.standard_normal((d1, k))
    v0 = rng.standard_normal((d2, k))
    pair = CanonicalPair(u=_whiten(u0, cov_x_full, zw), v=_whiten(v0, cov_y_full, zw))
    state = SolverState(
        u_tilde=np.zeros((d1, k)),
        v_tilde=np.zeros((d2, k)),
        delta_u=np.zeros((d1, k)),
        delta_v=np.zeros((d2, k)),
        pair=pair,
    )
    termination = Termination.MAX_ITERS

    for it in range(1, hp.max_iters + 1):
        if subsample:
            idx = np.sort(rng.choice(n, size=m, replace=False))
            batch = TwoViewDataset(
                x=ViewMatrix(x[:, idx], ds.x.feature_means, ds.x.centered),
                y=ViewMatrix(y[:, idx], ds.y.feature_means, ds.y.centered),
            )
            cov_x = batch.x.data @ batch.x.data.T / m
            cov_y = batch.y.data @ batch.y.data.T / m
        else:
            batch = ds
            cov_x, cov_y = cov_x_full, cov_y_full

        ctx = build_context(batch, state.pair, hp, cov_x=cov_x, cov_y=cov_y)

        gu = grad_u(batch, state, ctx, hp)
        state.u_tilde, state.delta_u = momentum_step(state.u_tilde, state.delta_u, gu, hp)
        if not np.isfinite(state.u_tilde).all():
            raise NonFiniteIterate("U update produced non-finite values; reduce eta")
        state.pair = CanonicalPair(u=_whiten(state.u_tilde, cov_x, zw), v=state.pair.v)

        gv = grad_v(batch, state, ctx, hp)
        state.v_tilde, state.delta_v = momentum_step(state.v_tilde, state.delta_v, gv, hp)
        if not np.isfinite(state.v_tilde).all():
            raise NonFiniteIterate("V update produced non-finite values; reduce eta")
        state.pair = CanonicalPair(u=state.pair.u, v=_whiten(state.v_tilde, cov_y, zw))
        state.iter = it

        obj = objective(batch, state.pair, hp)
        if not np.isfinite(obj):
            raise NonFiniteIterate("objective became non-finite; reduce eta")
        state.objective_trace.append(obj)
        first = state.objective_trace[0]
        if obj > 10.0 * first and obj > 1e-12:
            raise NonFiniteIterate(
                f"objective grew from {first:.3e} to {obj:.3e}; reduce eta"
            )
        if on_iteration is not None:
            on_iteration(it, state.pair)
        if _converged(state.objective_trace, hp.tol):
            termination = Termination.CONVERGED
            break

    if stochastic:
        # the loop whitened against minibatch covariances; restore the exact
        # full-batch constraints
        state.pair = CanonicalPair(
            u=_whiten(state.u_tilde, cov_x_full, zw),
            v=_whiten(state.v_tilde, cov_y_full, zw),
        )

    ek = np.eye(k)
    res_u = float(np.linalg.norm(state.pair.u.T @ cov_x_full @ state.pair.u - ek))
    res_v = float(np.linalg.norm(state.pair.v.T @ cov_y_full @ state.pair.v - ek))
    return FitReport(
        pair=state.pair,
        iterations_run=state.iter,
        objective_trace=tuple(state.objective_trace),
        final_constraint_residual_u=res_u,
        final_constraint_residual_v=res_v,
        termination=termination,
        wall_seconds=time.perf_counter() - start,
    )


def _converged(trace: list[float], tol: float) -> bool:
    if len(trace) < _CONVERGENCE_WINDOW + 1:
        return False
    recent = trace[-(_CONVERGENCE_WINDOW + 1):]
    rel = [
        abs(b - a) / max(abs(a), 1e-30)
        for a, b in zip(recent[:-1], recent[1:])
    ]
    return sum(rel) / _CONVERGENCE_WINDOW < tol
