"""Dense real matrix kernel.

Matrices are plain 2-D ``numpy.float64`` arrays in C (row-major) order.
The eigensolver is a cyclic Jacobi iteration and the pseudo-inverse goes
through a one-sided Jacobi SVD; both run in the compiled extension when it
is available (see :mod:`inputagg._backend`).
"""

from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import DomainError, NumericalError, ShapeError, SymmetryError

SPD_EPS = 1e-12
SYMMETRY_RTOL = 1e-10
MAX_SWEEPS = 100


class EigDecomposition(NamedTuple):
    """Eigenvalues in descending order and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a, name="matrix"):
    m = np.array(a, dtype=np.float64, order="C", copy=True)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    return m


def _check_symmetric(c, name):
    if c.shape[0] != c.shape[1]:
        raise ShapeError(f"{name} must be square, got {c.shape[0]}x{c.shape[1]}")
    scale = np.linalg.norm(c)
    asym = np.linalg.norm(c - c.T)
    if asym > SYMMETRY_RTOL * scale:
        raise SymmetryError(
            f"{name} is not symmetric (relative asymmetry {asym / scale:.3e})"
        )


def _fix_signs(vecs, tol=1e-12):
    # first component with |v_i| > tol made positive
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        idx = np.flatnonzero(np.abs(col) > tol)
        if idx.size and col[idx[0]] < 0:
            vecs[:, j] = -col
    return vecs


def sym_eig(c, kernels=None):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    c : array_like, shape (d, d)
        Symmetric within a relative asymmetry of 1e-10.
    kernels : module, optional
        Kernel backend override (used by tests and benchmarks).

    Returns
    -------
    EigDecomposition
        Eigenvalues sorted in descending order; each eigenvector has its
        first non-negligible component positive.
    """
    kernels = kernels or _backend.kernels
    a = as_matrix(c)
    _check_symmetric(a, "matrix")
    n = a.shape[0]
    a = np.ascontiguousarray(0.5 * (a + a.T))
    v = np.eye(n)
    if n > 1 and kernels.jacobi_sweeps(a, v, MAX_SWEEPS) < 0:
        raise NumericalError(
            f"Jacobi eigensolver did not converge for {n}x{n} matrix "
            f"after {MAX_SWEEPS} sweeps"
        )
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return EigDecomposition(w[order], _fix_signs(v[:, order]))


def _spectral(u, values):
    out = (u * values) @ u.T
    return 0.5 * (out + out.T)


def matrix_log(c, kernels=None):
    """Matrix logarithm U log(L) U^T of a strictly SPD matrix.

    Raises DomainError if any eigenvalue is <= 1e-12; no clamping is done here.
    """
    w, u = sym_eig(c, kernels)
    if w[-1] <= SPD_EPS:
        raise DomainError(
            f"matrix_log needs a strictly SPD matrix; smallest eigenvalue is {w[-1]:.6e}"
        )
    return _spectral(u, np.log(w))


def matrix_exp(s, kernels=None):
    """Matrix exponential of a symmetric matrix (always SPD)."""
    w, u = sym_eig(s, kernels)
    return _spectral(u, np.exp(w))


def svd(x, kernels=None):
    """Thin SVD by one-sided Jacobi. Returns ``(u, s, v)`` with ``x = u diag(s) v^T``.

    Singular values come back in descending order.
    """
    kernels = kernels or _backend.kernels
    a = as_matrix(x)
    m, n = a.shape
    transposed = m < n
    if transposed:
        a = np.ascontiguousarray(a.T)
        m, n = n, m
    v = np.eye(n)
    if n > 1 and kernels.one_sided_jacobi(a, v, MAX_SWEEPS) < 0:
        raise NumericalError(
            f"one-sided Jacobi SVD did not converge for {m}x{n} matrix"
        )
    s = np.sqrt(np.einsum("ij,ij->j", a, a))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    a = a[:, order]
    v = v[:, order]
    u = np.zeros_like(a)
    nz = s > 0
    u[:, nz] = a[:, nz] / s[nz]
    if transposed:
        return v, s, u
    return u, s, v


def pseudo_inverse(x, rcond=None, kernels=None):
    """Moore-Penrose pseudo-inverse.

    Singular values below ``rcond * s_max`` are treated as zero; the default
    ``rcond`` is ``max(m, n) * eps``.
    """
    a = as_matrix(x)
    u, s, v = svd(a, kernels)
    if rcond is None:
        rcond = max(a.shape) * np.finfo(np.float64).eps
    smax = s[0] if s.size else 0.0
    keep = s > rcond * smax
    if not np.any(keep):
        return np.zeros((a.shape[1], a.shape[0]))
    return (v[:, keep] / s[keep]) @ u[:, keep].T


def frobenius_norm(m):
    m = np.asarray(m, dtype=np.float64)
    return float(np.sqrt(np.sum(m * m)))


def format_matrix(m):
    m = as_matrix(m)
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in m]
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    """Parse the ``rows cols`` header + whitespace-separated rows format."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError("matrix header must be 'rows cols'")
    rows, cols = int(header[0]), int(header[1])
    if len(lines) - 1 != rows:
        raise ValueError(f"expected {rows} rows, found {len(lines) - 1}")
    data = []
    for i, ln in enumerate(lines[1:]):
        vals = [float(tok) for tok in ln.split()]
        if len(vals) != cols:
            raise ValueError(f"row {i} has {len(vals)} values, expected {cols}")
        data.append(vals)
    return as_matrix(np.array(data, dtype=np.float64).reshape(rows, cols))


def read_matrix(path):
    with open(path) as fh:
        return parse_matrix(fh.read())


def write_matrix(path, m):
    with open(path, "w") as fh:
        fh.write(format_matrix(m))
