"""Pure-Python fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and rotation order as the extension; inner loops are
vectorized over one row/column with numpy instead of scalar C loops.
"""

import math

import numpy as np

EPS = float(np.finfo(np.float64).eps)


def jacobi_sweeps(a, v, max_sweeps):
    n = a.shape[0]
    floor_abs = math.sqrt(float(np.sum(a * a))) * 1e-300
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                app = a[p, p]
                aqq = a[q, q]
                if abs(apq) <= EPS * math.sqrt(abs(app * aqq)) or abs(apq) <= floor_abs:
                    continue
                rotated = True
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            return sweep + 1
    return -1


def one_sided_jacobi(a, v, max_sweeps):
    n = a.shape[1]
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                x = a[:, p]
                y = a[:, q]
                alpha = float(x @ x)
                beta = float(y @ y)
                gamma = float(x @ y)
                if gamma == 0.0 or abs(gamma) <= EPS * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0:
                    t = 1.0 / (zeta + math.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                xp = x.copy()
                yq = y.copy()
                a[:, p] = c * xp - s * yq
                a[:, q] = s * xp + c * yq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            return sweep + 1
    return -1


def group_outer_pool(y, t):
    d, q = y.shape
    g = q // t
    blocks = y.reshape(d, t, g).transpose(1, 0, 2)
    out = np.matmul(blocks, blocks.transpose(0, 2, 1)) / g
    # exact symmetry, matching the extension's mirrored upper triangle
    upper = np.triu(out)
    return upper + np.triu(out, 1).transpose(0, 2, 1)


def group_outer_pool_backward(grad, y, t):
    d, q = y.shape
    g = q // t
    sym = grad + grad.transpose(0, 2, 1)
    blocks = y.reshape(d, t, g).transpose(1, 0, 2)
    dy = np.matmul(sym, blocks) / g
    return np.ascontiguousarray(dy.transpose(1, 0, 2).reshape(d, q))
