"""Trainable aggregation of variable-length frame sets into SPD/Grassmann-style
matrix representations, with a from-scratch numerical core."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
