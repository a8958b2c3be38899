"""Central finite-difference gradient checks."""

import numpy as np

from .aggregation import AggregationParams, aggregation_backward, aggregation_forward


def numerical_grad(f, x, eps=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return g


def rel_error(analytic, numeric):
    """max |a - f| divided by the larger of max |a| and max |f|."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)))
    diff = np.max(np.abs(analytic - numeric))
    if scale == 0.0:
        return float(diff)
    return float(diff / scale)


def aggregation_gradcheck(d, n, q, t, seed=0, eps=1e-5):
    """Compare analytic and numerical gradients of l = sum_i ||C_i||_F^2.

    X (d x n), W (n x q) and b (d x q) are drawn from N(0, 1). Returns a dict
    per parameter with its relative error and the index of the worst entry.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, n))
    params = AggregationParams(rng.standard_normal((n, q)), rng.standard_normal((d, q)), t)

    def loss():
        out = aggregation_forward(X, params).matrices
        return float(np.sum(out * out))

    cache = aggregation_forward(X, params)
    dX, dW, db = aggregation_backward(2.0 * cache.matrices, cache, params)
    report = {}
    for name, arr, ana in (("X", X, dX), ("W", params.W, dW), ("b", params.b, db)):
        num = numerical_grad(loss, arr, eps)
        worst = np.unravel_index(np.argmax(np.abs(ana - num)), ana.shape)
        report[name] = {
            "rel_error": rel_error(ana, num),
            "worst_index": [int(i) for i in worst],
        }
    return report
