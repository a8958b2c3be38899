"""SGD with momentum, weight decay and the polynomial ("poly") learning-rate policy."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError, TrainingError


@dataclass
class OptimizerConfig:
    base_lr: float = 0.01
    power: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 0.0005
    max_iter: int = 1000
    batch_videos: int = 12
    n_train: int = 16
    seed: int = 0

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be >= 0, got {self.max_iter}")

    def to_dict(self):
        return asdict(self)


def poly_lr(iteration, cfg):
    """base_lr * (1 - iteration / max_iter) ** power."""
    if iteration < 0 or iteration > cfg.max_iter:
        raise ValueError(f"iteration {iteration} outside [0, {cfg.max_iter}]")
    if cfg.max_iter == 0:
        return cfg.base_lr
    return cfg.base_lr * (1.0 - iteration / cfg.max_iter) ** cfg.power


def sgd_momentum_step(params, grads, velocity, iteration, cfg):
    """One update over a dict of named arrays.

    v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v

    Returns new ``(params, velocity)`` dicts; the inputs are not modified.
    Missing velocity entries start at zero.
    """
    lr = poly_lr(iteration, cfg)
    new_params, new_velocity = {}, {}
    for name in params:
        w = params[name]
        g = grads[name]
        if np.shape(g) != np.shape(w):
            raise ShapeError(f"gradient for {name!r} has shape {np.shape(g)}, expected {np.shape(w)}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name!r} at iteration {iteration}")
        v = velocity.get(name)
        v = np.zeros_like(w) if v is None else v
        v = cfg.momentum * v - lr * (g + cfg.weight_decay * w)
        new_velocity[name] = v
        new_params[name] = w + v
    return new_params, new_velocity
