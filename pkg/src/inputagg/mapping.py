"""Mapping unit: an MLP from flattened manifold points to the target space,
with auto-encoder pretraining.

Inputs are row vectors (or a batch of rows); layer ``i`` computes
``z_{i+1} = act_i(z_i @ W_i.T + b_i)`` with ``W_i`` of shape (out, in).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, TrainingError
from .optim import OptimizerConfig, sgd_momentum_step

ACTIVATIONS = ("identity", "relu", "sigmoid", "tanh")


def _act(kind, a):
    if kind == "identity":
        return a
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * a))
    if kind == "tanh":
        return np.tanh(a)
    raise ValueError(f"unknown activation {kind!r}")


def _act_grad(kind, a, z):
    # derivative of the activation, given pre-activation a and output z
    if kind == "identity":
        return np.ones_like(a)
    if kind == "relu":
        return (a > 0).astype(np.float64)
    if kind == "sigmoid":
        return z * (1.0 - z)
    if kind == "tanh":
        return 1.0 - z * z
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class MlpParams:
    weights: list
    biases: list
    activations: list = field(default=None)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if self.activations is None:
            self.activations = ["relu"] * (len(self.weights) - 1) + ["identity"]
        self.activations = list(self.activations)
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeError("weights, biases and activations must have equal length")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
            if b.shape != (w.shape[0],):
                raise ShapeError(f"layer {i}: bias shape {b.shape} vs weight {w.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i} takes {w.shape[1]} inputs but layer {i - 1} emits "
                    f"{self.weights[i - 1].shape[0]}"
                )

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def depth(self):
        return len(self.weights)

    def named(self, prefix=""):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}W{i}"] = w
            out[f"{prefix}b{i}"] = b
        return out

    def replace(self, named, prefix=""):
        return MlpParams(
            [named[f"{prefix}W{i}"] for i in range(self.depth)],
            [named[f"{prefix}b{i}"] for i in range(self.depth)],
            self.activations,
        )

    def copy(self):
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], self.activations)


def init_mlp(sizes, activations=None, rng=None):
    """He-normal weights N(0, 2/fan_in), zero biases."""
    rng = np.random.default_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, activations)


def mlp_forward(z, params):
    """Returns ``(output, cache)``; accepts one vector or a batch of rows."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    if z.shape[1] != params.sizes[0]:
        raise ShapeError(f"input has length {z.shape[1]}, network expects {params.sizes[0]}")
    cache = []
    for w, b, act in zip(params.weights, params.biases, params.activations):
        a = z @ w.T + b
        out = _act(act, a)
        cache.append((z, a, out))
        z = out
    return (z[0] if single else z), (single, cache)


def mlp_backward(out_grad, cache, params):
    """Backprop through :func:`mlp_forward`.

    Returns ``(input_grad, grads)`` where ``grads`` is a dict keyed like
    :meth:`MlpParams.named`. For a batch, parameter gradients are summed over rows.
    """
    single, layers = cache
    g = np.asarray(out_grad, dtype=np.float64)
    if single:
        g = g[None, :]
    if g.shape != layers[-1][2].shape:
        raise ShapeError(f"output gradient shape {g.shape} vs output {layers[-1][2].shape}")
    grads = {}
    for i in range(params.depth - 1, -1, -1):
        z_in, a, out = layers[i]
        ga = g * _act_grad(params.activations[i], a, out)
        grads[f"W{i}"] = ga.T @ z_in
        grads[f"b{i}"] = ga.sum(axis=0)
        g = ga @ params.weights[i]
    return (g[0] if single else g), grads


@dataclass
class PretrainConfig:
    """``eta`` weighs the squared Frobenius norm of every encoder/decoder weight."""

    eta: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")


def flatten_spd(mats):
    """Row-major flattening; (N, d, d) -> (N, d*d). Symmetric duplicates are kept."""
    mats = np.asarray(mats, dtype=np.float64)
    return mats.reshape(mats.shape[0], -1)


def autoencoder_loss(samples, encoder, decoder, cfg):
    """(1/N) sum ||c_j - F'(F(c_j))||^2 + eta * sum_k ||W_k||_F^2.

    ``samples`` is (N, D) flattened points. Returns
    ``(loss, encoder_grads, decoder_grads)``.
    """
    C = np.asarray(samples, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] == 0:
        raise ValueError("autoencoder_loss needs a non-empty (N, D) sample array")
    N = C.shape[0]
    code, enc_cache = mlp_forward(C, encoder)
    recon, dec_cache = mlp_forward(code, decoder)
    resid = recon - C
    data = float(np.sum(np.sum(resid * resid, axis=1))) / N
    reg = sum(float(np.sum(w * w)) for w in encoder.weights + decoder.weights)
    g_code, dec_grads = mlp_backward(2.0 * resid / N, dec_cache, decoder)
    _, enc_grads = mlp_backward(g_code, enc_cache, encoder)
    if cfg.eta:
        for params, grads in ((encoder, enc_grads), (decoder, dec_grads)):
            for i, w in enumerate(params.weights):
                grads[f"W{i}"] = grads[f"W{i}"] + 2.0 * cfg.eta * w
    return data + cfg.eta * reg, enc_grads, dec_grads


def default_arch(input_dim, embed_dim=None):
    """Encoder sizes D -> 4D -> m and the mirrored decoder sizes."""
    m = input_dim if embed_dim is None else embed_dim
    return [input_dim, 4 * input_dim, m], [m, 4 * input_dim, input_dim]


def _batches(n, batch, rng):
    # epoch-wise reshuffling; a batch never spans two epochs
    while True:
        order = rng.permutation(n)
        for start in range(0, n - batch + 1, batch):
            yield order[start:start + batch]


def pretrain_autoencoder(dataset, arch=None, cfg=None, opt=None, init=None):
    """Fit encoder F and decoder F' by SGD on :func:`autoencoder_loss`.

    Parameters
    ----------
    dataset : array_like, shape (N, D) or (N, d, d)
        Manifold points; square matrices are flattened row-major.
    arch : (list, list), optional
        Encoder and decoder layer sizes; defaults to :func:`default_arch`.
    cfg : PretrainConfig, optional
    opt : OptimizerConfig, optional
        ``batch_videos`` is the minibatch size; 0 or >= N means full batch.
    init : (MlpParams, MlpParams), optional
        Starting encoder/decoder; otherwise He-initialized from ``opt.seed``.

    Returns
    -------
    encoder, decoder, history
        ``history`` holds the minibatch loss evaluated before each update.
    """
    cfg = cfg or PretrainConfig()
    opt = opt or OptimizerConfig()
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim == 3:
        data = flatten_spd(data)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("pretraining needs a non-empty dataset")
    rng = np.random.default_rng(opt.seed)
    if init is None:
        enc_sizes, dec_sizes = arch or default_arch(data.shape[1])
        encoder = init_mlp(enc_sizes, rng=rng)
        decoder = init_mlp(dec_sizes, rng=rng)
    else:
        encoder, decoder = init[0].copy(), init[1].copy()
    N = data.shape[0]
    batch = N if opt.batch_videos <= 0 or opt.batch_videos >= N else opt.batch_videos
    batches = _batches(N, batch, rng)
    params = {**encoder.named("enc."), **decoder.named("dec.")}
    velocity = {}
    history = []
    for it in range(opt.max_iter):
        idx = next(batches)
        loss, eg, dg = autoencoder_loss(data[idx], encoder, decoder, cfg)
        if not np.isfinite(loss):
            raise TrainingError(f"auto-encoder loss is {loss} at iteration {it}")
        history.append(loss)
        grads = {**{f"enc.{k}": v for k, v in eg.items()},
                 **{f"dec.{k}": v for k, v in dg.items()}}
        params, velocity = sgd_momentum_step(params, grads, velocity, it, opt)
        encoder = encoder.replace(params, "enc.")
        decoder = decoder.replace(params, "dec.")
    return encoder, decoder, history
