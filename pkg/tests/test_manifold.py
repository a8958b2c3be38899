import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inputagg import manifold as mf
from inputagg.aggregation import aggregation_forward, group_avg_pool, minus_mean, outer_product, transpose_fc
from inputagg.errors import DegenerateInputError, DomainError, ShapeError

from conftest import random_spd


def test_covariance_examples():
    S = np.array([[1.0, -1.0], [0.0, 0.0]])
    assert np.allclose(mf.covariance_descriptor(S), [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)
    assert not mf.covariance_descriptor(np.ones((3, 5))).any()


def test_covariance_against_numpy(rng):
    S = rng.standard_normal((5, 40))
    assert np.allclose(mf.covariance_descriptor(S), np.cov(S, bias=True), atol=1e-13)


def test_log_euclidean_examples():
    I = np.eye(3)
    assert mf.log_euclidean_distance(I, I) == 0.0
    assert abs(mf.log_euclidean_distance(np.eye(2), math.e * np.eye(2)) - math.sqrt(2)) < 1e-12
    assert abs(mf.log_euclidean_distance(np.diag([1.0, math.e ** 2]), np.eye(2)) - 2.0) < 1e-12


def test_log_euclidean_against_oracle(rng):
    A, B = random_spd(rng, 5), random_spd(rng, 5)

    def logm(C):
        w, V = np.linalg.eigh(C)
        return V @ np.diag(np.log(w)) @ V.T

    ref = np.linalg.norm(logm(A) - logm(B))
    assert abs(mf.log_euclidean_distance(A, B) - ref) < 1e-10 * max(1.0, ref)


def test_log_euclidean_singular_regularized():
    A = np.diag([1.0, 0.0])
    assert mf.needs_regularization(A)
    dist = mf.log_euclidean_distance(A, np.eye(2))
    assert np.isfinite(dist) and dist > 10
    assert mf.log_euclidean_distance(A, A) == 0.0
    with pytest.raises(DomainError):
        mf.log_euclidean_distance(A, np.eye(2), regularize_psd=False)


def test_log_euclidean_shape_mismatch():
    with pytest.raises(ShapeError):
        mf.log_euclidean_distance(np.eye(2), np.eye(3))


def test_grassmann_examples():
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    assert abs(mf.grassmann_distance(e1, e2) - 1.0) < 1e-15
    assert mf.grassmann_distance(e1, -e1) == 0.0
    diag = np.array([[1.0], [1.0]]) / math.sqrt(2)
    assert abs(mf.grassmann_distance(e1, diag) - 1 / math.sqrt(2)) < 1e-15


def test_grassmann_basis_orthonormal_top_eigvecs(rng):
    X = rng.standard_normal((6, 20))
    p = mf.grassmann_basis(X, 3)
    assert np.allclose(p.basis.T @ p.basis, np.eye(3), atol=1e-12)
    w, V = np.linalg.eigh(X @ X.T)
    ref = V[:, ::-1][:, :3]
    assert mf.grassmann_distance(p, ref) < 1e-10
    assert not p.degenerate and 0 < p.captured_mass < 1


def test_grassmann_basis_tie_and_errors():
    p = mf.grassmann_basis(np.eye(3), 1)
    assert p.degenerate
    with pytest.raises(DegenerateInputError):
        mf.grassmann_basis(np.zeros((3, 4)), 1)
    with pytest.raises(ShapeError):
        mf.grassmann_basis(np.ones((3, 4)), 4)


def test_grassmann_basis_invariance(rng):
    X = rng.standard_normal((5, 12))
    Y = mf.grassmann_basis(X, 2).basis
    Q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    assert mf.grassmann_distance(Y, Y @ Q) < 1e-12
    Z = mf.grassmann_basis(rng.standard_normal((5, 12)), 2).basis
    assert abs(mf.grassmann_distance(Y @ Q, Z) - mf.grassmann_distance(Y, Z)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_log_euclidean_metric_axioms(d, seed):
    rng = np.random.default_rng(seed)
    A, B, C = (random_spd(rng, d, cond=1e3) for _ in range(3))
    dab, dba = mf.log_euclidean_distance(A, B), mf.log_euclidean_distance(B, A)
    assert dab >= 0 and dab == pytest.approx(dba, abs=1e-12)
    assert mf.log_euclidean_distance(A, A) < 1e-12
    assert dab <= mf.log_euclidean_distance(A, C) + mf.log_euclidean_distance(C, B) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_grassmann_metric_axioms(d, q, seed):
    q = min(q, d)
    rng = np.random.default_rng(seed)
    A, B, C = (np.linalg.qr(rng.standard_normal((d, q)))[0] for _ in range(3))
    dab = mf.grassmann_distance(A, B)
    assert dab >= 0 and dab == pytest.approx(mf.grassmann_distance(B, A), abs=1e-14)
    assert mf.grassmann_distance(A, A) < 1e-12
    assert dab <= mf.grassmann_distance(A, C) + mf.grassmann_distance(C, B) + 1e-12


def test_grassmann_shape_mismatch():
    with pytest.raises(ShapeError):
        mf.grassmann_distance(np.eye(3)[:, :1], np.eye(3)[:, :2])


@pytest.mark.parametrize("d,n", [(2, 2), (3, 8), (5, 4), (4, 16)])
def test_covariance_equivalence(rng, d, n):
    S = rng.standard_normal((d, n))
    out = aggregation_forward(S, mf.aggregation_as_covariance(d, n)).matrices
    assert out.shape == (1, d, d)
    assert np.abs(out[0] - mf.covariance_descriptor(S)).max() < 1e-12


@pytest.mark.parametrize("d,n,q", [(3, 8, 2), (4, 10, 4), (2, 5, 1), (6, 12, 3)])
def test_grassmann_equivalence(rng, d, n, q):
    X = rng.standard_normal((d, n))
    Y = mf.grassmann_basis(X, q).basis
    out = aggregation_forward(X, mf.aggregation_as_grassmann(X, q)).matrices[0]
    assert np.abs(out - Y @ Y.T / n).max() < 1e-10


def test_grassmann_equivalence_stepwise(rng):
    X = rng.standard_normal((3, 7))
    Y = mf.grassmann_basis(X, 2).basis
    params = mf.aggregation_as_grassmann(X, 2)
    Xc, _ = minus_mean(X)
    # centered input passed through the fc layer recovers the basis in the first q columns
    Yhat = transpose_fc(Xc, params.W, params.b)
    assert np.allclose(Yhat[:, :2], Y, atol=1e-12)
    assert not Yhat[:, 2:].any()
    pooled = group_avg_pool(outer_product(Yhat), 1)[0]
    assert np.allclose(pooled, Y @ Y.T / 7, atol=1e-12)


def test_grassmann_equivalence_rank_deficient(rng):
    # rank-1 frame matrix: X X^+ projects, warning expected, still exact for q = rank
    u = rng.standard_normal((4, 1))
    X = u @ rng.standard_normal((1, 6))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        params = mf.aggregation_as_grassmann(X, 1)
    assert any(issubclass(w.category, mf.RankDeficientWarning) for w in caught)
    Y = mf.grassmann_basis(X, 1).basis
    out = aggregation_forward(X, params).matrices[0]
    assert np.abs(out - Y @ Y.T / 6).max() < 1e-10


def test_grassmann_equivalence_identity_frames():
    # X = I_n (d = n): every basis of the top-q subspace is a tie; the unit still
    # reproduces whichever basis grassmann_basis picked
    X = np.eye(4)
    Y = mf.grassmann_basis(X, 4).basis
    out = aggregation_forward(X, mf.aggregation_as_grassmann(X, 4)).matrices[0]
    assert np.abs(out - np.eye(4) / 4).max() < 1e-12
    assert np.allclose(Y @ Y.T, np.eye(4), atol=1e-12)
