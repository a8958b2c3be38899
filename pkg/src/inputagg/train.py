"""End-to-end model, softmax loss and the three-stage training protocol.

Stage 1 pretrains a trainable frame embedder on single frames (skipped for
passthrough features). Stage 2 pretrains the mapping unit as an auto-encoder
on aggregation outputs computed with W = I and b = 0. Stage 3 fine-tunes
embedder, aggregation, mapping and classifier together with softmax loss.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import aggregation as agg
from .errors import ShapeError, TrainingError
from .frames import FrameEmbedder, embed_frames, embedder_backward
from .mapping import (MlpParams, PretrainConfig, default_arch, init_mlp,
                      mlp_backward, mlp_forward, pretrain_autoencoder)
from .optim import OptimizerConfig, sgd_momentum_step

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
POOLINGS = ("aggregation", "mean")


def softmax(logits):
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def softmax_cross_entropy(logits, label):
    """Negative log-likelihood of ``label``; returns ``(loss, dloss/dlogits)``."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[0]:
        raise IndexError(f"label {label} out of range for {logits.shape[0]} classes")
    z = logits - np.max(logits)
    lse = np.log(np.sum(np.exp(z)))
    p = np.exp(z - lse)
    grad = p.copy()
    grad[label] -= 1.0
    return float(lse - z[label]), grad


@dataclass
class ModelBundle:
    """Frame embedder -> pooling -> mapping MLP -> linear softmax classifier.

    ``pooling="mean"`` replaces the aggregation unit by plain frame averaging
    (the baseline); ``aggregation`` is then None.
    """

    embedder: FrameEmbedder
    aggregation: agg.AggregationParams
    encoder: MlpParams
    classifier_W: np.ndarray
    classifier_b: np.ndarray
    labels: list
    pooling: str = "aggregation"
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.pooling not in POOLINGS:
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.pooling == "aggregation" and self.aggregation is None:
            raise ValueError("aggregation pooling needs AggregationParams")
        if self.encoder.sizes[0] != self.rep_dim:
            raise ShapeError(
                f"encoder takes {self.encoder.sizes[0]} inputs, pooled representation "
                f"has {self.rep_dim}"
            )
        if self.classifier_W.shape != (len(self.labels), self.encoder.sizes[-1]):
            raise ShapeError(f"classifier weight shape {self.classifier_W.shape} is inconsistent")
        if self.aggregation is not None and self.aggregation.d != self.embedder.out_dim:
            raise ShapeError("aggregation feature dim differs from embedder output dim")

    @property
    def feature_dim(self):
        return self.embedder.out_dim

    @property
    def rep_dim(self):
        d = self.feature_dim
        if self.pooling == "mean":
            return d
        return self.aggregation.t * d * d

    @property
    def n_train(self):
        return self.aggregation.n_train if self.aggregation is not None else None

    def named(self):
        out = {}
        if self.embedder.trainable:
            out.update(self.embedder.params.named("emb."))
        if self.aggregation is not None:
            out["agg.W"] = self.aggregation.W
            out["agg.b"] = self.aggregation.b
        out.update(self.encoder.named("enc."))
        out["cls.W"] = self.classifier_W
        out["cls.b"] = self.classifier_b
        return out

    def replace(self, named):
        emb = self.embedder
        if emb.trainable:
            emb = FrameEmbedder(emb.kind, emb.params.replace(named, "emb."), emb.in_dim)
        aggp = self.aggregation
        if aggp is not None:
            aggp = agg.AggregationParams(named["agg.W"], named["agg.b"], aggp.t)
        return ModelBundle(emb, aggp, self.encoder.replace(named, "enc."),
                           named["cls.W"], named["cls.b"], list(self.labels), self.pooling)

    def copy(self):
        return self.replace({k: v.copy() for k, v in self.named().items()})


def build_model(in_dim, labels, pooling="aggregation", embedder_kind="passthrough",
                feature_dim=32, n_train=16, q=None, t=1, embed_dim=None, seed=0):
    """Fresh model. Aggregation W starts near identity, mapping and embedder He-initialized."""
    if pooling not in POOLINGS:
        raise ValueError(f"unknown pooling {pooling!r}")
    rng = np.random.default_rng(seed)
    embedder = FrameEmbedder.create(embedder_kind, in_dim, feature_dim, rng=rng)
    d = embedder.out_dim
    aggp = agg.init_params(d, n_train, q, t, rng=rng) if pooling == "aggregation" else None
    rep = d if pooling == "mean" else aggp.t * d * d
    enc_sizes, _ = default_arch(rep, embed_dim)
    encoder = init_mlp(enc_sizes, rng=rng)
    m = enc_sizes[-1]
    cls_W = rng.standard_normal((len(labels), m)) / np.sqrt(m)
    return ModelBundle(embedder, aggp, encoder, cls_W, np.zeros(len(labels)),
                       list(labels), pooling)


def pool_features(model, X):
    """Pooled, flattened representation of one d x n feature matrix, plus cache."""
    if model.pooling == "mean":
        return X.mean(axis=1), X.shape[1]
    out = agg.aggregation_forward(X, model.aggregation)
    return out.matrices.reshape(-1), out


def forward_video(model, frames):
    X, emb_cache = embed_frames(frames, model.embedder)
    rep, pool_cache = pool_features(model, X)
    z, enc_cache = mlp_forward(rep, model.encoder)
    logits = model.classifier_W @ z + model.classifier_b
    return logits, (emb_cache, pool_cache, enc_cache, z)


def _pool_backward(model, drep, caches):
    """Gradients below the mapping unit for one video, given dl/d(pooled rep)."""
    emb_cache, pool_cache = caches
    grads = {}
    d = model.feature_dim
    if model.pooling == "mean":
        n = pool_cache
        dX = np.repeat((drep / n)[:, None], n, axis=1)
    else:
        t = model.aggregation.t
        dX, dW, db = agg.aggregation_backward(drep.reshape(t, d, d), pool_cache, model.aggregation)
        grads["agg.W"] = dW
        grads["agg.b"] = db
    if model.embedder.trainable:
        grads.update({f"emb.{k}": v for k, v in
                      embedder_backward(dX, emb_cache, model.embedder).items()})
    return grads


def batch_loss_and_grads(model, frames_list, y, pool=None):
    """Summed softmax loss over a batch of videos and its summed gradients.

    The mapping unit and classifier run on the stacked batch; per-video
    gradients below them are added in batch order. ``pool`` (an executor)
    only parallelizes the per-video parts, so the result does not depend on it.
    """
    def fwd(frames):
        X, emb_cache = embed_frames(frames, model.embedder)
        rep, pool_cache = pool_features(model, X)
        return rep, (emb_cache, pool_cache)

    mapper = pool.map if pool is not None else map
    fwd_out = list(mapper(fwd, frames_list))
    R = np.stack([r for r, _ in fwd_out])
    Z, enc_cache = mlp_forward(R, model.encoder)
    logits = Z @ model.classifier_W.T + model.classifier_b
    loss, G = 0.0, np.empty_like(logits)
    for i, label in enumerate(y):
        li, G[i] = softmax_cross_entropy(logits[i], label)
        loss += li
    grads = {"cls.W": G.T @ Z, "cls.b": G.sum(axis=0)}
    dR, enc_grads = mlp_backward(G @ model.classifier_W, enc_cache, model.encoder)
    grads.update({f"enc.{k}": v for k, v in enc_grads.items()})
    below = list(mapper(lambda i: _pool_backward(model, dR[i], fwd_out[i][1]), range(len(y))))
    for g in below:
        for k, v in g.items():
            grads[k] = grads[k] + v if k in grads else v.copy()
    return loss, grads


def represent(model, frames):
    """Mapped (encoder output) representation of one video."""
    X, _ = embed_frames(frames, model.embedder)
    rep, _ = pool_features(model, X)
    z, _ = mlp_forward(rep, model.encoder)
    return z


def predict_logits(model, frames):
    return forward_video(model, frames)[0]


def _label_index(model, videos):
    lookup = {lab: i for i, lab in enumerate(model.labels)}
    try:
        return np.array([lookup[v.label] for v in videos])
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} is not a model class") from None


def _batches(n, batch, rng):
    batch = max(1, min(batch, n))
    while True:
        order = rng.permutation(n)
        for start in range(0, n - batch + 1, batch):
            yield order[start:start + batch]


def _check_loss(loss, stage, it):
    if not np.isfinite(loss):
        raise TrainingError(f"{stage}: loss is {loss} at iteration {it}")


def train_embedder(model, videos, opt):
    """Stage 1: per-frame softmax pretraining of a trainable embedder."""
    emb = model.embedder
    if not emb.trainable or opt.max_iter == 0:
        return model, []
    rng = np.random.default_rng(opt.seed)
    frames = np.concatenate([v.frames for v in videos])
    labels = np.concatenate([np.full(v.n_frames, y) for v, y in
                             zip(videos, _label_index(model, videos))])
    K, d = len(model.labels), emb.out_dim
    params = {**emb.params.named("emb."),
              "head.W": rng.standard_normal((K, d)) / np.sqrt(d), "head.b": np.zeros(K)}
    net = emb.params
    velocity, history = {}, []
    batches = _batches(len(frames), opt.batch_videos * opt.n_train, rng)
    for it in range(opt.max_iter):
        idx = next(batches)
        feats, cache = mlp_forward(frames[idx], net)
        logits = feats @ params["head.W"].T + params["head.b"]
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        B = len(idx)
        loss = float(-np.mean(np.log(p[np.arange(B), labels[idx]])))
        _check_loss(loss, "stage 1", it)
        history.append(loss)
        g = p.copy()
        g[np.arange(B), labels[idx]] -= 1.0
        g /= B
        _, eg = mlp_backward(g @ params["head.W"], cache, net)
        grads = {f"emb.{k}": v for k, v in eg.items()}
        grads["head.W"] = g.T @ feats
        grads["head.b"] = g.sum(axis=0)
        params, velocity = sgd_momentum_step(params, grads, velocity, it, opt)
        net = net.replace(params, "emb.")
    new = model.copy()
    new.embedder = FrameEmbedder(emb.kind, net, emb.in_dim)
    return new, history


def pretrain_mapping(model, videos, opt, cfg=None):
    """Stage 2: auto-encoder pretraining of the encoder.

    Inputs are the pooled representations with the aggregation unit fixed at
    W = I (truncated/padded to n_train x q), b = 0. The decoder is freshly
    initialized from ``opt.seed`` and discarded afterwards.
    """
    if opt.max_iter == 0:
        return model, []
    fixed = model.copy()
    if fixed.aggregation is not None:
        a = fixed.aggregation
        fixed.aggregation = agg.AggregationParams(np.eye(a.n_train, a.q), np.zeros_like(a.b), a.t)
    reps = np.array([pool_features(fixed, embed_frames(v.frames, fixed.embedder)[0])[0]
                     for v in videos])
    enc_sizes = model.encoder.sizes
    decoder = init_mlp(enc_sizes[::-1], rng=np.random.default_rng(opt.seed))
    encoder, _, history = pretrain_autoencoder(reps, cfg=cfg or PretrainConfig(), opt=opt,
                                               init=(model.encoder, decoder))
    new = model.copy()
    new.encoder = encoder
    return new, history


def finetune(model, videos, opt, workers=1):
    """Stage 3: end-to-end softmax fine-tuning over minibatches of videos.

    Gradients are summed over the batch (see :func:`batch_loss_and_grads`) and
    divided by the batch size; results do not depend on ``workers``.
    """
    if opt.max_iter == 0:
        return model, []
    rng = np.random.default_rng(opt.seed)
    y = _label_index(model, videos)
    params = model.named()
    velocity, history = {}, []
    batches = _batches(len(videos), opt.batch_videos, rng)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    for it in range(opt.max_iter):
        idx = next(batches)
        loss, total = batch_loss_and_grads(model, [videos[i].frames for i in idx], y[idx], pool)
        B = len(idx)
        loss /= B
        _check_loss(loss, "stage 3", it)
        history.append(loss)
        grads = {k: v / B for k, v in total.items()}
        params, velocity = sgd_momentum_step(params, grads, velocity, it, opt)
        model = model.replace(params)
    if pool is not None:
        pool.shutdown()
    return model, history


def accuracy(model, videos):
    y = _label_index(model, videos)
    pred = np.array([np.argmax(predict_logits(model, v.frames)) for v in videos])
    return float(np.mean(pred == y))


@dataclass
class StageConfigs:
    embedder: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(max_iter=0))
    mapping: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(max_iter=2000))
    finetune: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(max_iter=5000))


def train_three_stage(videos, model, stages=None, pretrain_cfg=None, workers=1):
    """Run all three stages; returns ``(model, history)``.

    ``history`` maps ``stage1``/``stage2``/``stage3`` to per-iteration losses
    and ``train_accuracy`` to the final training-set accuracy.
    """
    if not videos:
        raise ValueError("training set is empty")
    stages = stages or StageConfigs()
    model, h1 = train_embedder(model, videos, stages.embedder)
    log.info("stage 1 done (%d iterations)", len(h1))
    model, h2 = pretrain_mapping(model, videos, stages.mapping, pretrain_cfg)
    log.info("stage 2 done (%d iterations)", len(h2))
    model, h3 = finetune(model, videos, stages.finetune, workers)
    log.info("stage 3 done (%d iterations)", len(h3))
    history = {"stage1": h1, "stage2": h2, "stage3": h3,
               "train_accuracy": accuracy(model, videos)}
    return model, history
