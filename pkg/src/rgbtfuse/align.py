"""Offset-based cross-modal alignment and multi-dilation scale refinement."""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ._validation import check_feature_map, check_same_shape
from .exceptions import ShapeError
from .tensor import ConvParams, concat_channels, conv2d, global_avg_pool

__all__ = [
    "OffsetField",
    "DsrParams",
    "predict_offsets",
    "grid_sample",
    "aam_align",
    "dsr_branch_weights",
    "dsr_refine",
]

NORM_EPS = 1e-6


@dataclass(frozen=True)
class OffsetField:
    """Per-pixel displacement in pixels, shared by all channels.

    Every entry of ``dx`` and ``dy`` lies strictly inside
    ``(-max_disp, max_disp)``.
    """

    dx: np.ndarray
    dy: np.ndarray
    max_disp: float = 1.0

    def __post_init__(self):
        dx = np.asarray(self.dx, dtype=np.float64)
        dy = np.asarray(self.dy, dtype=np.float64)
        if dx.ndim != 2 or dx.shape != dy.shape:
            raise ShapeError(f"dx {dx.shape} and dy {dy.shape} must be equal 2D arrays")
        if not self.max_disp > 0:
            raise ValueError("max_disp must be positive")
        if not (np.all(np.abs(dx) < self.max_disp) and np.all(np.abs(dy) < self.max_disp)):
            raise ValueError(f"offsets must lie strictly inside (-{self.max_disp}, {self.max_disp})")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @property
    def shape(self):
        return self.dx.shape

    @classmethod
    def constant(cls, dx, dy, shape):
        """Uniform displacement; ``max_disp`` is the tightest valid bound."""
        peak = max(abs(dx), abs(dy))
        bound = np.nextafter(peak, np.inf) if peak > 0 else 1.0
        return cls(np.full(shape, float(dx)), np.full(shape, float(dy)), float(bound))

    @classmethod
    def zeros(cls, shape, max_disp=1.0):
        return cls(np.zeros(shape), np.zeros(shape), max_disp)


def _standardize(raw):
    mean = raw.mean(axis=(1, 2), keepdims=True)
    var = raw.var(axis=(1, 2), keepdims=True)
    return (raw - mean) / np.sqrt(var + NORM_EPS)


def predict_offsets(f_v, f_t, conv, max_disp=1.0):
    """Predict a bounded offset field from the concatenated modalities.

    ``conv`` maps 2C -> 2 channels. Its output is standardized per channel
    over the spatial axes, squashed with tanh and scaled by ``max_disp``;
    channel 0 is the x displacement, channel 1 the y displacement.
    """
    f_v = check_feature_map(f_v, "f_v")
    f_t = check_feature_map(f_t, "f_t")
    check_same_shape(f_v, f_t, ("f_v", "f_t"))
    if conv.c_out != 2:
        raise ShapeError(f"offset conv must produce 2 channels, got {conv.c_out}")
    raw = conv2d(concat_channels(f_v, f_t), conv)
    if raw.shape[1:] != f_v.shape[1:]:
        raise ShapeError(f"offset conv changed spatial dims to {raw.shape[1:]}")
    disp = np.tanh(_standardize(raw)) * max_disp
    # tanh saturates to exactly 1.0 in float64; keep the bound strict.
    lim = np.nextafter(max_disp, 0.0)
    disp = np.clip(disp, -lim, lim)
    return OffsetField(disp[0], disp[1], max_disp)


def grid_sample(x, offsets):
    """Bilinearly sample ``x`` at ``(col + dx, row + dy)`` for every pixel.

    Coordinates outside the map are clamped to the border (replicate
    padding), so every sample is well defined.
    """
    x = check_feature_map(x)
    _, h, w = x.shape
    if offsets.shape != (h, w):
        raise ShapeError(f"offset field {offsets.shape} does not match map ({h}, {w})")
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = np.clip(cols + offsets.dx, 0.0, w - 1)
    sy = np.clip(rows + offsets.dy, 0.0, h - 1)
    x0 = np.minimum(np.floor(sx).astype(np.intp), w - 1)
    y0 = np.minimum(np.floor(sy).astype(np.intp), h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    top = x[:, y0, x0] * (1.0 - fx) + x[:, y0, x1] * fx
    bottom = x[:, y1, x0] * (1.0 - fx) + x[:, y1, x1] * fx
    # Fancy indexing yields a strided result; reductions downstream depend on layout.
    return np.ascontiguousarray(top * (1.0 - fy) + bottom * fy)


def aam_align(f_v, f_t, conv, max_disp=1.0, offsets=None):
    """Warp the visible map onto the thermal reference.

    Returns ``(grid_sample(f_v, offsets), f_t)``; the thermal map passes
    through unchanged, which is what sampling it on the identity grid gives.
    When ``offsets`` is supplied it replaces the predicted field and
    ``conv``/``max_disp`` are ignored.
    """
    f_v = check_feature_map(f_v, "f_v")
    f_t = check_feature_map(f_t, "f_t")
    check_same_shape(f_v, f_t, ("f_v", "f_t"))
    if offsets is None:
        offsets = predict_offsets(f_v, f_t, conv, max_disp)
    return grid_sample(f_v, offsets), f_t.copy()


def _preserves_shape(conv, channels):
    kh, kw = conv.kernel_size
    return (
        conv.c_in == channels
        and conv.c_out == channels
        and conv.stride == 1
        and 2 * conv.padding == conv.dilation * (kh - 1)
        and 2 * conv.padding == conv.dilation * (kw - 1)
    )


@dataclass(frozen=True)
class DsrParams:
    """Branch convolutions plus the 1x1 projections applied to pooled context."""

    branches: List[ConvParams]
    gate_proj: ConvParams
    context_proj: ConvParams
    channels: int = field(init=False)

    def __post_init__(self):
        if not self.branches:
            raise ValueError("at least one branch is required")
        c = self.context_proj.c_out
        object.__setattr__(self, "channels", c)
        object.__setattr__(self, "branches", list(self.branches))
        for i, branch in enumerate(self.branches):
            if not _preserves_shape(branch, c):
                raise ShapeError(f"branch {i} does not preserve a ({c}, h, w) shape")
        if self.gate_proj.kernel_size != (1, 1) or self.context_proj.kernel_size != (1, 1):
            raise ShapeError("gate_proj and context_proj must be 1x1")
        if self.gate_proj.c_in != c or self.gate_proj.c_out != len(self.branches):
            raise ShapeError(f"gate_proj must map {c} -> {len(self.branches)} channels")
        if self.context_proj.c_in != c:
            raise ShapeError(f"context_proj must map {c} -> {c} channels")

    @classmethod
    def random(cls, channels, rng, sigma=0.1, dilations=(1, 2, 3)):
        branches = [
            ConvParams.random(channels, channels, 3, rng, sigma, dilation=d, padding=d)
            for d in dilations
        ]
        return cls(
            branches=branches,
            gate_proj=ConvParams.random(len(dilations), channels, 1, rng, sigma),
            context_proj=ConvParams.random(channels, channels, 1, rng, sigma),
        )


def _softmax(v):
    z = np.exp(v - v.max())
    return z / z.sum()


def dsr_branch_weights(x, params):
    """Softmax gate over branches computed from the pooled context of ``x``."""
    pooled = global_avg_pool(x)[:, None, None]
    return _softmax(conv2d(pooled, params.gate_proj)[:, 0, 0])


def dsr_refine(x, params):
    """Gated sum of multi-dilation branches plus a broadcast context term."""
    x = check_feature_map(x)
    if x.shape[0] != params.channels:
        raise ShapeError(f"input has {x.shape[0]} channels, params expect {params.channels}")
    weights = dsr_branch_weights(x, params)
    context = conv2d(global_avg_pool(x)[:, None, None], params.context_proj)
    out = np.zeros_like(x)
    for wb, branch in zip(weights, params.branches):
        out += wb * conv2d(x, branch)
    return out + context
