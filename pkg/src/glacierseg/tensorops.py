"""Shape primitives on N x C x H x W arrays.

All model computation runs on row-major float32 ndarrays in NCHW layout;
operations here are pure and dtype-preserving (the gradient-check harness
reruns them in float64).
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(Exception):
    pass


def zero_pad2d(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeMismatch(f"cannot concat {a.shape} with {b.shape}")
    return np.concatenate([a, b], axis=1)


def minmax_normalize(grid: np.ndarray) -> np.ndarray:
    """Affine map of a 2D grid to [0, 1]; constant grids map to all zeros."""
    lo = grid.min()
    hi = grid.max()
    if hi == lo:
        return np.zeros_like(grid)
    return (grid - lo) / (hi - lo)
