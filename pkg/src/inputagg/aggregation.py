"""Aggregation unit: minus mean -> transpose fully connected -> outer product
-> group average pooling.

Maps a d x n frame-feature matrix to ``t`` symmetric PSD d x d matrices. The
transpose FC weight ``W`` has a fixed row count ``n_train``, so videos are
first resampled to that many frames (:func:`resample_indices`).
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import GroupingError, ShapeError


@dataclass
class AggregationParams:
    """Learnables ``W`` (n_train x q) and ``b`` (d x q) plus the group count ``t``."""

    W: np.ndarray
    b: np.ndarray
    t: int = 1

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=np.float64)
        self.b = np.ascontiguousarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.ndim != 2:
            raise ShapeError("W and b must be 2-D")
        if self.b.shape[1] != self.W.shape[1]:
            raise ShapeError(
                f"b has {self.b.shape[1]} columns but W has {self.W.shape[1]}"
            )
        if self.t < 1:
            raise GroupingError(f"group count must be >= 1, got {self.t}")
        if self.q % self.t:
            raise GroupingError(f"q={self.q} is not divisible by t={self.t}")

    @property
    def q(self):
        return self.W.shape[1]

    @property
    def n_train(self):
        return self.W.shape[0]

    @property
    def d(self):
        return self.b.shape[0]

    def copy(self):
        return AggregationParams(self.W.copy(), self.b.copy(), self.t)


@dataclass
class AggregationOutput:
    """Pooled matrices plus what the backward pass needs."""

    matrices: np.ndarray  # (t, d, d)
    mean: np.ndarray  # (d,)
    centered: np.ndarray  # (d, n_train)
    Y: np.ndarray  # (d, q)
    frame_index: np.ndarray  # resampled column -> original frame
    n_frames: int

    def outer_products(self):
        return outer_product(self.Y)


def init_params(d, n_train=16, q=None, t=1, noise=0.01, rng=None):
    """Identity-like W (I truncated/padded to n_train x q) plus N(0, noise^2), b = 0."""
    q = n_train if q is None else q
    rng = np.random.default_rng(rng)
    W = np.eye(n_train, q)
    if noise:
        W = W + noise * rng.standard_normal((n_train, q))
    return AggregationParams(W, np.zeros((d, q)), t)


def resample_indices(n, n_train):
    """Frame indices taking an n-frame video to exactly n_train frames.

    Uniform temporal subsampling when ``n > n_train``, cyclic repetition
    when ``n < n_train``, identity otherwise.
    """
    if n < 1:
        raise ShapeError("a video needs at least one frame")
    if n == n_train:
        return np.arange(n)
    if n > n_train:
        return (np.arange(n_train) * n) // n_train
    return np.arange(n_train) % n


def minus_mean(X):
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=1)
    return X - mean[:, None], mean


def transpose_fc(Xc, W, b):
    if Xc.shape[1] != W.shape[0]:
        raise ShapeError(
            f"features have {Xc.shape[1]} frames but W expects {W.shape[0]}"
        )
    if b.shape != (Xc.shape[0], W.shape[1]):
        raise ShapeError(f"b must be {Xc.shape[0]}x{W.shape[1]}, got {b.shape}")
    return Xc @ W + b


def outer_product(Y):
    """Per-column outer products y_i y_i^T, stacked as (q, d, d)."""
    Y = np.asarray(Y, dtype=np.float64)
    return np.einsum("iq,jq->qij", Y, Y)


def group_avg_pool(mats, t):
    """Average consecutive blocks of q/t matrices -> (t, d, d)."""
    mats = np.asarray(mats, dtype=np.float64)
    q = mats.shape[0]
    if t < 1 or q % t:
        raise GroupingError(f"cannot split {q} matrices into {t} equal groups")
    return mats.reshape(t, q // t, *mats.shape[1:]).mean(axis=1)


def aggregation_forward(X, params, kernels=None):
    """Run the four layers on a d x n feature matrix.

    Videos whose frame count differs from ``params.n_train`` are resampled
    first, so the output shape ``(t, d, d)`` never depends on ``n``.
    """
    kernels = kernels or _backend.kernels
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"features must be d x n, got shape {X.shape}")
    if X.shape[0] != params.d:
        raise ShapeError(f"features have dim {X.shape[0]}, params expect {params.d}")
    idx = resample_indices(X.shape[1], params.n_train)
    Xc, mean = minus_mean(X[:, idx])
    Y = np.ascontiguousarray(transpose_fc(Xc, params.W, params.b))
    mats = kernels.group_outer_pool(Y, params.t)
    return AggregationOutput(mats, mean, Xc, Y, idx, X.shape[1])


def aggregation_backward(out_grads, cache, params, kernels=None):
    """Gradients of the loss w.r.t. the original X, W and b.

    ``out_grads`` is (t, d, d), the gradient w.r.t. each pooled matrix. It is
    used as given (not symmetrized); the outer-product rule already adds its
    transpose.
    """
    kernels = kernels or _backend.kernels
    G = np.ascontiguousarray(out_grads, dtype=np.float64)
    if G.shape != cache.matrices.shape:
        raise ShapeError(
            f"gradient shape {G.shape} does not match output {cache.matrices.shape}"
        )
    dY = kernels.group_outer_pool_backward(G, cache.Y, params.t)
    dW = cache.centered.T @ dY
    db = dY
    dXc = dY @ params.W.T
    # exact Jacobian of centering: I - 11^T/n
    dXr = dXc - dXc.mean(axis=1, keepdims=True)
    dX = np.zeros((dXr.shape[0], cache.n_frames))
    np.add.at(dX.T, cache.frame_index, dXr.T)
    return dX, dW, db
