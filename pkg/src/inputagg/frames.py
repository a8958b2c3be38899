"""Frame representation unit: a per-frame embedder producing d x n features.

The convolutional DeepID-style extractor is not implemented; frames arrive as
precomputed feature vectors and are passed through, or mapped by a linear
layer or a small MLP that can be trained end to end.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .mapping import MlpParams, init_mlp, mlp_backward, mlp_forward

KINDS = ("passthrough", "linear", "small-mlp")


@dataclass
class FrameEmbedder:
    kind: str = "passthrough"
    params: MlpParams = None
    in_dim: int = 32

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.kind != "passthrough" and self.params is None:
            raise ValueError(f"{self.kind} embedder needs parameters")
        if self.params is not None and self.params.sizes[0] != self.in_dim:
            raise ShapeError(
                f"embedder input dim {self.in_dim} != network input {self.params.sizes[0]}"
            )

    @property
    def out_dim(self):
        return self.in_dim if self.params is None else self.params.sizes[-1]

    @property
    def trainable(self):
        return self.params is not None

    @classmethod
    def create(cls, kind, in_dim, out_dim=32, hidden=64, rng=None):
        if kind == "passthrough":
            return cls("passthrough", None, in_dim)
        if kind == "linear":
            return cls("linear", init_mlp([in_dim, out_dim], ["identity"], rng), in_dim)
        if kind == "small-mlp":
            return cls("small-mlp", init_mlp([in_dim, hidden, out_dim], ["relu", "identity"], rng), in_dim)
        raise ValueError(f"unknown embedder kind {kind!r}")


def embed_frames(raw, embedder):
    """Embed an (n, raw_dim) stack of frames; returns ``(features d x n, cache)``."""
    frames = np.asarray(raw, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ShapeError("expected a non-empty, non-ragged (n, raw_dim) frame stack")
    if frames.shape[1] != embedder.in_dim:
        raise ShapeError(f"frames have dim {frames.shape[1]}, embedder expects {embedder.in_dim}")
    if not embedder.trainable:
        return np.ascontiguousarray(frames.T), None
    out, cache = mlp_forward(frames, embedder.params)
    return np.ascontiguousarray(out.T), cache


def embedder_backward(feature_grad, cache, embedder):
    """Parameter gradients summed over frames (in frame order). Empty for passthrough."""
    if not embedder.trainable:
        return {}
    _, grads = mlp_backward(np.asarray(feature_grad, dtype=np.float64).T, cache, embedder.params)
    return grads
