"""Input validation helpers shared by kernels and estimators."""
import numpy as np

from .exceptions import ShapeError


def check_feature_map(x, name="input"):
    """Return ``x`` as a C-contiguous float64 array of shape (c, h, w).

    Raises
    ------
    ShapeError
        If ``x`` is not three-dimensional or has an empty axis.
    ValueError
        If ``x`` contains NaN or Inf.
    """
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"{name} must have shape (c, h, w), got {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeError(f"{name} has an empty axis: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} {a.shape} and {names[1]} {b.shape} differ in shape")


def check_boxes(boxes, name="boxes"):
    """Return ``boxes`` as an (n, 4) float64 array of (cx, cy, w, h) rows."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 4)
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ShapeError(f"{name} must have shape (n, 4), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr[:, 2:] <= 0):
        raise ValueError(f"{name} must have positive widths and heights")
    return arr
