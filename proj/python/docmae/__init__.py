"""Masked-autoencoder pre-training and flow-based document rectification.

Images are float32 arrays of shape [H, W, 3] with values in [0, 1]; masks are
[H, W, 1]; flows are [H, W, 2] holding (row, column) displacements.
"""

from ._docmae import *  # noqa: F401,F403
from ._docmae import (  # noqa: F401
    CompatibilityError,
    DimensionError,
    DocmaeError,
    GeometryError,
    IoError,
    ValidationError,
)

__version__ = "0.1.0"
