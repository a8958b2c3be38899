"""SPD and Grassmann representations of a frame set, their metrics, and
aggregation-unit parameter settings that reproduce each of them exactly.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .aggregation import AggregationParams, minus_mean
from .errors import DegenerateInputError, DomainError, ShapeError

REG_TRIGGER = 1e-10
REG_SCALE = 1e-6
TIE_RTOL = 1e-12


class RankDeficientWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GrassmannPoint:
    """Orthonormal d x q basis of a subspace.

    ``degenerate`` flags an eigenvalue tie at the q-th position (the basis is
    then one valid choice among several); ``captured_mass`` is the share of the
    spectrum of X X^T kept by the top q eigenvalues.
    """

    basis: np.ndarray
    degenerate: bool = False
    captured_mass: float = 1.0

    @property
    def d(self):
        return self.basis.shape[0]

    @property
    def q(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.T


def covariance_descriptor(S):
    """Population covariance (1/n) sum (s - mu)(s - mu)^T of the columns of S."""
    Xc, _ = minus_mean(S)
    return Xc @ Xc.T / Xc.shape[1]


def needs_regularization(C):
    return linalg.sym_eig(C).eigenvalues[-1] < REG_TRIGGER


def regularize(C):
    """C + lambda I with lambda = 1e-6 * trace(C) / d."""
    C = linalg.as_matrix(C)
    lam = REG_SCALE * np.trace(C) / C.shape[0]
    return C + lam * np.eye(C.shape[0])


def log_euclidean_distance(Ca, Cb, regularize_psd=True):
    """|| log Ca - log Cb ||_F.

    If either matrix has an eigenvalue below 1e-10 and ``regularize_psd`` is
    set, both are shifted by :func:`regularize` before taking logarithms.
    """
    Ca = linalg.as_matrix(Ca, "Ca")
    Cb = linalg.as_matrix(Cb, "Cb")
    if Ca.shape != Cb.shape:
        raise ShapeError(f"shape mismatch {Ca.shape} vs {Cb.shape}")
    if regularize_psd and (needs_regularization(Ca) or needs_regularization(Cb)):
        Ca, Cb = regularize(Ca), regularize(Cb)
    try:
        La = linalg.matrix_log(Ca)
        Lb = linalg.matrix_log(Cb)
    except DomainError as exc:
        raise DomainError(f"log-Euclidean distance: {exc}") from exc
    return linalg.frobenius_norm(La - Lb)


def grassmann_basis(X, q):
    """Top-q eigenvectors of X X^T as a :class:`GrassmannPoint`."""
    X = linalg.as_matrix(X, "X")
    d = X.shape[0]
    if q < 1 or q > d:
        raise ShapeError(f"subspace dim q={q} must be in [1, {d}]")
    if not np.any(X):
        raise DegenerateInputError("all-zero feature matrix spans no subspace")
    w, U = linalg.sym_eig(X @ X.T)
    tie = q < d and abs(w[q - 1] - w[q]) <= TIE_RTOL * abs(w[0])
    total = float(np.sum(np.clip(w, 0.0, None)))
    mass = float(np.sum(np.clip(w[:q], 0.0, None)) / total)
    return GrassmannPoint(np.ascontiguousarray(U[:, :q]), bool(tie), mass)


def grassmann_distance(Ya, Yb):
    """(1/sqrt 2) || Ya Ya^T - Yb Yb^T ||_F (projection metric)."""
    A = Ya.basis if isinstance(Ya, GrassmannPoint) else np.asarray(Ya, float)
    B = Yb.basis if isinstance(Yb, GrassmannPoint) else np.asarray(Yb, float)
    if A.shape != B.shape:
        raise ShapeError(f"Grassmann points differ in (d, q): {A.shape} vs {B.shape}")
    return linalg.frobenius_norm(A @ A.T - B @ B.T) / math.sqrt(2.0)


def aggregation_as_covariance(d, n):
    """W = I_n, b = 0, q = n, t = 1: the unit then outputs the covariance descriptor."""
    return AggregationParams(np.eye(n), np.zeros((d, n)), t=1)


def aggregation_as_grassmann(X, q):
    """Parameters under which the unit outputs (1/n) Y Y^T for Y = grassmann_basis(X, q).

    W* = X^+ Y and b* = mean(X) 1^T W*, t = 1. Both are padded with n - q zero
    columns: the pooling layer divides by the column count, and the zero
    columns add nothing to the sum, so the normalization becomes 1/n.

    For rank-deficient X a :class:`RankDeficientWarning` is issued; the result
    is still exact as long as q does not exceed the rank.
    """
    X = linalg.as_matrix(X, "X")
    d, n = X.shape
    Y = grassmann_basis(X, q).basis
    if q > n:
        raise ShapeError(f"q={q} exceeds frame count n={n}")
    Xp = linalg.pseudo_inverse(X)
    s = linalg.svd(X)[1]
    if np.count_nonzero(s > max(d, n) * np.finfo(float).eps * s[0]) < d:
        warnings.warn(
            "feature matrix is not full row rank; X X^+ is only a projector",
            RankDeficientWarning,
            stacklevel=2,
        )
    W = Xp @ Y
    b = np.outer(X.mean(axis=1), W.sum(axis=0))
    Wpad = np.zeros((n, n))
    Wpad[:, :q] = W
    bpad = np.zeros((d, n))
    bpad[:, :q] = b
    return AggregationParams(Wpad, bpad, t=1)
