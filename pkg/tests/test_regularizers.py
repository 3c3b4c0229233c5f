import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rmencca as r
from rmencca.errors import DimensionMismatch, InvalidSmoothing


def test_l21_norm_hand_values():
    assert r.l21_norm(np.array([[3.0, 4.0]])) == 5.0
    assert r.l21_norm(np.zeros((4, 2))) == 0.0
    m = np.array([[1.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
    assert r.l21_norm(m) == pytest.approx(1.0 + 2.0 + np.sqrt(8.0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(-5.0, 5.0))
def test_l21_norm_is_a_norm(seed, scale):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((5, 3))
    b = rng.standard_normal((5, 3))
    la, lb = r.l21_norm(a), r.l21_norm(b)
    assert r.l21_norm(a + b) <= la + lb + 1e-9
    assert r.l21_norm(scale * a) == pytest.approx(abs(scale) * la, abs=1e-9)


def test_nuclear_norm_of_diagonal():
    m = np.diag([3.0, -2.0, 0.5])
    assert r.nuclear_norm(m) == pytest.approx(5.5)


def test_nuclear_norm_orthogonal_invariance():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((6, 4))
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    assert r.nuclear_norm(q @ m) == pytest.approx(r.nuclear_norm(m), rel=1e-12)


# -------------------------------------------------------------- HQ weights

def test_hq_diagonal_formula():
    m = np.array([[3.0, 4.0], [0.0, 0.0]])
    hq = r.hq_diagonal(m, 1e-8)
    assert hq.weights[0] == pytest.approx(1.0 / (2.0 * np.sqrt(25.0 + 1e-8)))
    assert hq.weights[1] == pytest.approx(1.0 / (2.0 * np.sqrt(1e-8)))


def test_hq_diagonal_rejects_bad_zeta():
    with pytest.raises(InvalidSmoothing):
        r.hq_diagonal(np.ones((2, 2)), 0.0)
    with pytest.raises(InvalidSmoothing):
        r.hq_diagonal(np.ones((2, 2)), -1e-8)


def test_surrogate_penalty_matches_direct_sum():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((7, 3))
    hq = r.hq_diagonal(m, 1e-6)
    direct = sum(hq.weights[i] * (m[i] ** 2).sum() for i in range(7))
    assert r.surrogate_penalty(m, hq) == pytest.approx(direct, rel=1e-12)


def test_surrogate_penalty_rejects_row_mismatch():
    hq = r.hq_diagonal(np.ones((3, 2)), 1e-8)
    with pytest.raises(DimensionMismatch):
        r.surrogate_penalty(np.ones((4, 2)), hq)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), zeta=st.floats(1e-10, 1e-2))
def test_hq_tightness_identity(seed, zeta):
    """surrogate + sum(zeta w_i + 1/(4 w_i)) equals sum sqrt(||row||^2+zeta)."""
    m = np.random.default_rng(seed).standard_normal((6, 3)) * 2.0
    hq = r.hq_diagonal(m, zeta)
    lhs = r.surrogate_penalty(m, hq) + float(
        (zeta * hq.weights + 1.0 / (4.0 * hq.weights)).sum()
    )
    rhs = float(np.sqrt((m * m).sum(axis=1) + zeta).sum())
    assert lhs == pytest.approx(rhs, rel=1e-12)


# --------------------------------------------------------- S-inverse operator

def _dense_inv_sqrt(mm):
    w, e = np.linalg.eigh(mm)
    return (e / np.sqrt(w)) @ e.T


def test_s_inverse_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(3, 30))
        k = int(rng.integers(1, 4))
        px = rng.standard_normal((n, k))
        py = rng.standard_normal((n, k))
        zeta = 10.0 ** rng.uniform(-5, -1)
        op = r.build_s_inverse(px, py, zeta)
        dense = _dense_inv_sqrt(px @ px.T + py @ py.T + zeta * np.eye(n))
        m = rng.standard_normal((n, 3))
        got = r.apply_s_inverse(op, m)
        want = dense @ m
        assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)


def test_s_inverse_zero_projections_scale_by_zeta():
    """With zero projections the operator is zeta^(-1/2) times identity."""
    op = r.build_s_inverse(np.zeros((5, 2)), np.zeros((5, 2)), 1e-4)
    m = np.eye(5)
    got = r.apply_s_inverse(op, m)
    assert np.allclose(got, 1e2 * np.eye(5))


def test_s_inverse_promotes_vectors():
    rng = np.random.default_rng(4)
    px = rng.standard_normal((6, 2))
    py = rng.standard_normal((6, 2))
    op = r.build_s_inverse(px, py, 1e-3)
    vec = rng.standard_normal(6)
    got = r.apply_s_inverse(op, vec)
    assert got.shape == (6, 1)
    assert np.allclose(got, r.apply_s_inverse(op, vec[:, None]))


def test_s_inverse_errors():
    with pytest.raises(InvalidSmoothing):
        r.build_s_inverse(np.ones((4, 1)), np.ones((4, 1)), 0.0)
    with pytest.raises(DimensionMismatch):
        r.build_s_inverse(np.ones((4, 1)), np.ones((5, 1)), 1e-8)
    op = r.build_s_inverse(np.ones((4, 1)), np.ones((4, 1)), 1e-8)
    with pytest.raises(DimensionMismatch):
        r.apply_s_inverse(op, np.ones((5, 2)))


def test_s_inverse_basis_stays_thin():
    """The factored form never materializes an n x n matrix: the basis has
    at most 2k columns."""
    rng = np.random.default_rng(5)
    px = rng.standard_normal((40, 3))
    py = rng.standard_normal((40, 3))
    op = r.build_s_inverse(px, py, 1e-6)
    assert op.basis.shape[0] == 40
    assert op.basis.shape[1] <= 6
