"""Synthetic subspace-structured videos standing in for face-track datasets.

Each class owns a random orthonormal basis; a video's frames are random
combinations of that basis plus isotropic Gaussian noise. Unknown classes
only ever appear in the probe split.
"""

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class Video:
    label: str
    frames: np.ndarray  # (n, dim)

    @property
    def n_frames(self):
        return self.frames.shape[0]


@dataclass
class SynthConfig:
    n_classes: int = 10
    subspace_dim: int = 3
    dim: int = 16
    train_per_class: int = 12
    gallery_per_class: int = 4
    probe_per_class: int = 4
    frames_min: int = 8
    frames_max: int = 32
    noise: float = 0.1
    unknown_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.subspace_dim <= self.dim:
            raise ValueError(f"subspace_dim must be in [1, dim={self.dim}]")
        if not 0.0 <= self.unknown_fraction <= 1.0:
            raise ValueError("unknown_fraction must be in [0, 1]")
        if not 1 <= self.frames_min <= self.frames_max:
            raise ValueError("need 1 <= frames_min <= frames_max")
        if self.n_unknown >= self.n_classes:
            raise ValueError("at least one known class is required")

    @property
    def n_unknown(self):
        return int(round(self.unknown_fraction * self.n_classes))

    def to_dict(self):
        return asdict(self)


def class_label(i):
    return f"c{i:03d}"


def _video(rng, basis, label, cfg):
    n = int(rng.integers(cfg.frames_min, cfg.frames_max + 1))
    weights = rng.standard_normal((n, basis.shape[1]))
    frames = weights @ basis.T + cfg.noise * rng.standard_normal((n, cfg.dim))
    return Video(label, frames)


def synth_generate(cfg):
    """Returns ``(train, gallery, probe)`` lists of :class:`Video`.

    Known classes are the first ``n_classes - n_unknown``; the rest appear
    only in ``probe``.
    """
    rng = np.random.default_rng(cfg.seed)
    bases = [np.linalg.qr(rng.standard_normal((cfg.dim, cfg.subspace_dim)))[0]
             for _ in range(cfg.n_classes)]
    n_known = cfg.n_classes - cfg.n_unknown
    train, gallery, probe = [], [], []
    for c, basis in enumerate(bases):
        label = class_label(c)
        if c < n_known:
            train += [_video(rng, basis, label, cfg) for _ in range(cfg.train_per_class)]
            gallery += [_video(rng, basis, label, cfg) for _ in range(cfg.gallery_per_class)]
        probe += [_video(rng, basis, label, cfg) for _ in range(cfg.probe_per_class)]
    return train, gallery, probe
