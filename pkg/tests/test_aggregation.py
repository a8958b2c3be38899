import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inputagg import aggregation as agg
from inputagg.errors import GroupingError, ShapeError
from inputagg.gradcheck import numerical_grad, rel_error


def straight_line(X, W, b, t):
    """Scalar-loop re-composition of the four layers."""
    d, n = X.shape
    q = W.shape[1]
    mean = [sum(X[i, j] for j in range(n)) / n for i in range(d)]
    Xc = [[X[i, j] - mean[i] for j in range(n)] for i in range(d)]
    Y = [[sum(Xc[i][k] * W[k, j] for k in range(n)) + b[i, j] for j in range(q)] for i in range(d)]
    g = q // t
    out = np.zeros((t, d, d))
    for grp in range(t):
        for j in range(grp * g, (grp + 1) * g):
            for r in range(d):
                for c in range(d):
                    out[grp, r, c] += Y[r][j] * Y[c][j] / g
    return out


def test_minus_mean_examples():
    Xc, mean = agg.minus_mean(np.array([[1.0, 3.0], [2.0, 4.0]]))
    assert np.array_equal(Xc, [[-1.0, 1.0], [-1.0, 1.0]])
    assert np.array_equal(mean, [2.0, 3.0])
    Xc, mean = agg.minus_mean(np.tile([[0.5], [-2.0]], (1, 4)))
    assert not Xc.any() and np.array_equal(mean, [0.5, -2.0])
    Xc, mean = agg.minus_mean(np.array([[7.0], [1.0]]))
    assert not Xc.any() and np.array_equal(mean, [7.0, 1.0])


def test_minus_mean_column_sums(rng):
    X = rng.standard_normal((4, 9)) * 100
    Xc, _ = agg.minus_mean(X)
    assert np.abs(Xc.sum(axis=1)).max() <= 1e-12 * 9 * np.abs(X).max()


def test_transpose_fc_examples(rng):
    Xc = rng.standard_normal((3, 4))
    assert np.array_equal(agg.transpose_fc(Xc, np.eye(4), np.zeros((3, 4))), Xc)
    Y = agg.transpose_fc(np.array([[1.0, -1.0], [0.0, 0.0]]), np.ones((2, 1)), np.zeros((2, 1)))
    assert np.array_equal(Y, [[0.0], [0.0]])
    b = rng.standard_normal((3, 2))
    assert np.array_equal(agg.transpose_fc(Xc, np.zeros((4, 2)), b), b)
    with pytest.raises(ShapeError):
        agg.transpose_fc(Xc, np.zeros((5, 2)), b)


def test_outer_product_examples():
    C = agg.outer_product(np.array([[1.0], [2.0]]))
    assert np.array_equal(C[0], [[1.0, 2.0], [2.0, 4.0]])
    assert not agg.outer_product(np.zeros((3, 1))).any()
    E = agg.outer_product(np.array([[1.0], [0.0], [0.0]]))[0]
    assert E[0, 0] == 1.0 and E.sum() == 1.0


def test_group_avg_pool_examples(rng):
    I = np.eye(2)
    assert np.array_equal(agg.group_avg_pool([I, 3 * I], 1)[0], 2 * I)
    mats = rng.standard_normal((4, 3, 3))
    assert np.array_equal(agg.group_avg_pool(mats, 4), mats)
    A, B, C, D = mats
    out = agg.group_avg_pool(mats, 2)
    assert np.allclose(out, [(A + B) / 2, (C + D) / 2], atol=1e-15)
    with pytest.raises(GroupingError):
        agg.group_avg_pool(mats, 3)


def test_params_validation():
    with pytest.raises(GroupingError):
        agg.AggregationParams(np.eye(4, 3), np.zeros((2, 3)), t=2)
    with pytest.raises(ShapeError):
        agg.AggregationParams(np.eye(4), np.zeros((2, 3)), t=1)


def test_forward_covariance_case(rng):
    X = rng.standard_normal((3, 6))
    out = agg.aggregation_forward(X, agg.AggregationParams(np.eye(6), np.zeros((3, 6))))
    Xc = X - X.mean(axis=1, keepdims=True)
    cov = sum(np.outer(Xc[:, i], Xc[:, i]) for i in range(6)) / 6
    assert np.abs(out.matrices[0] - cov).max() < 1e-12


def test_forward_constant_frames_give_zero():
    X = np.tile([[1.0], [2.0], [3.0]], (1, 4))
    params = agg.AggregationParams(np.arange(8.0).reshape(4, 2), np.zeros((3, 2)), t=2)
    assert not agg.aggregation_forward(X, params).matrices.any()


def test_forward_matches_straight_line(kernels, rng):
    X = rng.standard_normal((3, 4))
    params = agg.AggregationParams(rng.standard_normal((4, 4)), rng.standard_normal((3, 4)), t=2)
    out = agg.aggregation_forward(X, params, kernels).matrices
    assert np.allclose(out, straight_line(X, params.W, params.b, 2), rtol=1e-13, atol=1e-13)


def test_layerwise_composition_matches_fused(kernels, rng):
    X = rng.standard_normal((5, 8))
    params = agg.AggregationParams(rng.standard_normal((8, 4)), rng.standard_normal((5, 4)), t=2)
    Xc, _ = agg.minus_mean(X)
    Y = agg.transpose_fc(Xc, params.W, params.b)
    layered = agg.group_avg_pool(agg.outer_product(Y), 2)
    fused = agg.aggregation_forward(X, params, kernels).matrices
    assert np.allclose(layered, fused, atol=1e-13)


@pytest.mark.parametrize("n", [8, 16, 32, 5, 1])
def test_fixed_length_output(rng, n):
    params = agg.init_params(4, n_train=16, q=8, t=2, rng=0)
    out = agg.aggregation_forward(rng.standard_normal((4, n)), params)
    assert out.matrices.shape == (2, 4, 4)


def test_resample_indices():
    assert np.array_equal(agg.resample_indices(16, 16), np.arange(16))
    assert np.array_equal(agg.resample_indices(32, 16), np.arange(0, 32, 2))
    assert np.array_equal(agg.resample_indices(3, 7), [0, 1, 2, 0, 1, 2, 0])
    idx = agg.resample_indices(37, 16)
    assert len(idx) == 16 and np.all(np.diff(idx) > 0) and idx[-1] < 37


def test_single_frame_is_zero():
    params = agg.init_params(3, n_train=4, noise=0.0)
    assert not agg.aggregation_forward(np.ones((3, 1)), params).matrices.any()


def test_init_identity_like():
    p = agg.init_params(3, n_train=4, q=6, noise=0.0)
    assert np.array_equal(p.W, np.eye(4, 6)) and not p.b.any()


def test_backward_zero_grad(rng):
    X = rng.standard_normal((3, 4))
    params = agg.AggregationParams(rng.standard_normal((4, 2)), rng.standard_normal((3, 2)), t=1)
    cache = agg.aggregation_forward(X, params)
    for g in agg.aggregation_backward(np.zeros((1, 3, 3)), cache, params):
        assert not g.any()


def test_backward_symmetric_upstream(kernels, rng):
    X = rng.standard_normal((3, 4))
    params = agg.AggregationParams(rng.standard_normal((4, 4)), rng.standard_normal((3, 4)), t=2)
    cache = agg.aggregation_forward(X, params, kernels)
    A = rng.standard_normal((2, 3, 3))
    G = A + A.transpose(0, 2, 1)
    dY = kernels.group_outer_pool_backward(G, cache.Y, 2)
    for j in range(4):
        assert np.allclose(dY[:, j], (2.0 / 2) * G[j // 2] @ cache.Y[:, j], atol=1e-13)


def test_backward_rejects_shape(rng):
    params = agg.init_params(3, n_train=4)
    cache = agg.aggregation_forward(rng.standard_normal((3, 4)), params)
    with pytest.raises(ShapeError):
        agg.aggregation_backward(np.zeros((2, 3, 3)), cache, params)


def _fd_check(X, params, G, kernels=None, eps=1e-5):
    """Loss <G, out> (G not symmetric) checked against central differences."""
    def loss():
        return float(np.sum(G * agg.aggregation_forward(X, params, kernels).matrices))

    cache = agg.aggregation_forward(X, params, kernels)
    dX, dW, db = agg.aggregation_backward(G, cache, params, kernels)
    return [rel_error(a, numerical_grad(loss, arr, eps))
            for a, arr in ((dX, X), (dW, params.W), (db, params.b))]


def test_backward_small_fd(kernels, rng):
    X = rng.standard_normal((2, 2))
    params = agg.AggregationParams(rng.standard_normal((2, 2)), rng.standard_normal((2, 2)), t=1)
    G = rng.standard_normal((1, 2, 2))  # deliberately asymmetric upstream gradient
    assert max(_fd_check(X, params, G, kernels)) < 1e-6


def test_backward_through_resampling(rng):
    # 5 frames resampled to 8 (cyclic repetition) and 11 frames to 8 (subsampling)
    for n in (5, 11):
        X = rng.standard_normal((3, n))
        params = agg.AggregationParams(rng.standard_normal((8, 4)), rng.standard_normal((3, 4)), t=2)
        G = rng.standard_normal((2, 3, 3))
        assert max(_fd_check(X, params, G)) < 1e-6


@pytest.mark.parametrize(
    "d,n,q,t",
    [c for c in itertools.product([2, 3, 5], [4, 8], [2, 4], [1, 2]) if c[2] % c[3] == 0],
)
def test_gradient_grid(d, n, q, t):
    rng = np.random.default_rng(d * 1000 + n * 100 + q * 10 + t)
    X = rng.standard_normal((d, n))
    params = agg.AggregationParams(rng.standard_normal((n, q)), rng.standard_normal((d, q)), t)

    def loss():
        out = agg.aggregation_forward(X, params).matrices
        return float(np.sum(out * out))

    cache = agg.aggregation_forward(X, params)
    grads = agg.aggregation_backward(2 * cache.matrices, cache, params)
    for a, arr in zip(grads, (X, params.W, params.b)):
        assert rel_error(a, numerical_grad(loss, arr)) < 1e-5


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 20), st.sampled_from([(4, 1), (4, 2), (6, 3), (8, 4)]),
       st.integers(0, 2**32 - 1))
def test_output_symmetric_psd(d, n, qt, seed):
    q, t = qt
    rng = np.random.default_rng(seed)
    params = agg.AggregationParams(rng.standard_normal((8, q)), rng.standard_normal((d, q)), t)
    out = agg.aggregation_forward(rng.standard_normal((d, n)) * 10, params).matrices
    for C in out:
        assert np.abs(C - C.T).max() <= 1e-12 * max(1.0, np.abs(C).max())
        assert np.linalg.eigvalsh(C).min() >= -1e-10 * max(1.0, np.abs(C).max())


def test_covariance_permutation_invariance(rng):
    X = rng.standard_normal((4, 8))
    params = agg.AggregationParams(np.eye(8), np.zeros((4, 8)))
    a = agg.aggregation_forward(X, params).matrices
    b = agg.aggregation_forward(X[:, rng.permutation(8)], params).matrices
    assert np.allclose(a, b, atol=1e-13)


def test_group_permutation_invariance(rng):
    # W constant within each pooling group of output columns -> swapping frames
    # inside a group changes nothing
    X = rng.standard_normal((3, 8))
    W = np.zeros((8, 4))
    W[:4, :2] = 1.0
    W[4:, 2:] = 1.0
    W += rng.standard_normal((8, 1))  # per-frame rows... kept constant across columns of a group
    W[:, 1] = W[:, 0]
    W[:, 3] = W[:, 2]
    params = agg.AggregationParams(W, rng.standard_normal((3, 4)), t=2)
    perm = np.array([1, 0, 2, 3, 4, 5, 6, 7])
    a = agg.aggregation_forward(X, params).matrices
    # permute frames together with the matching rows of W
    params_p = agg.AggregationParams(W[perm], params.b, t=2)
    b = agg.aggregation_forward(X[:, perm], params_p).matrices
    assert np.allclose(a, b, atol=1e-13)
