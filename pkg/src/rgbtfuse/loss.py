"""Object-centred bidirectional KL consistency loss and total-loss composition."""
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_feature_map, check_same_shape
from .assign import Box
from .exceptions import EmptyRegionError

__all__ = [
    "DEFAULT_LAMBDA",
    "LossComponents",
    "RegionSpec",
    "region_bounds",
    "crop_region",
    "region_kl",
    "region_kl_grad",
    "mean_region_kl",
    "total_loss",
]

DEFAULT_LAMBDA = 0.1


@dataclass(frozen=True)
class RegionSpec:
    """A GT box in image pixels, the map stride, and the enlargement factor."""

    box: Box
    stride: int = 1
    enlarge: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "box", Box.of(self.box))
        if self.stride < 1:
            raise ValueError("stride must be a positive integer")
        if not self.enlarge > 0:
            raise ValueError("enlarge must be positive")


def region_bounds(shape, spec):
    """Row/column bounds ``(y0, y1, x0, x1)`` of the crop on a map of ``shape``.

    The box is enlarged about its centre, clipped to the image extent
    (map size times stride), divided by the stride, then floored at the min
    corner and ceiled at the max corner.
    """
    h, w = shape[-2:]
    s = spec.stride
    b = spec.box
    half_w, half_h = b.w * spec.enlarge / 2, b.h * spec.enlarge / 2
    x1 = min(max(b.cx - half_w, 0.0), w * s)
    x2 = min(max(b.cx + half_w, 0.0), w * s)
    y1 = min(max(b.cy - half_h, 0.0), h * s)
    y2 = min(max(b.cy + half_h, 0.0), h * s)
    c0, c1 = math.floor(x1 / s), min(math.ceil(x2 / s), w)
    r0, r1 = math.floor(y1 / s), min(math.ceil(y2 / s), h)
    if c1 <= c0 or r1 <= r0:
        raise EmptyRegionError(f"region for {b} does not intersect a {h}x{w} grid")
    return r0, r1, c0, c1


def crop_region(x, spec):
    x = check_feature_map(x)
    r0, r1, c0, c1 = region_bounds(x.shape, spec)
    return x[:, r0:r1, c0:c1]


def _log_softmax(z):
    shifted = z - z.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def _crops(fused, thermal, spec):
    fused = check_feature_map(fused, "fused")
    thermal = check_feature_map(thermal, "thermal")
    check_same_shape(fused, thermal, ("fused", "thermal"))
    bounds = region_bounds(fused.shape, spec)
    r0, r1, c0, c1 = bounds
    return fused, bounds, fused[:, r0:r1, c0:c1], thermal[:, r0:r1, c0:c1]


def region_kl(fused, thermal, spec):
    """Mean over the cropped pixels of ``KL(p||q) + KL(q||p)``.

    ``p`` and ``q`` are the channel softmaxes of the fused and thermal maps.
    """
    _, _, zf, zt = _crops(fused, thermal, spec)
    log_p, log_q = _log_softmax(zf), _log_softmax(zt)
    per_pixel = ((np.exp(log_p) - np.exp(log_q)) * (log_p - log_q)).sum(axis=0)
    return float(per_pixel.mean())


def region_kl_grad(fused, thermal, spec):
    """Gradient of :func:`region_kl` with respect to the fused logits.

    Entries outside the crop are exactly zero. The thermal-side gradient is
    ``region_kl_grad(thermal, fused, spec)`` by symmetry of the loss.
    """
    fused, (r0, r1, c0, c1), zf, zt = _crops(fused, thermal, spec)
    log_p, log_q = _log_softmax(zf), _log_softmax(zt)
    p, q = np.exp(log_p), np.exp(log_q)
    log_ratio = log_p - log_q
    kl_pq = (p * log_ratio).sum(axis=0, keepdims=True)
    n_pixels = zf.shape[1] * zf.shape[2]
    grad = np.zeros_like(fused)
    grad[:, r0:r1, c0:c1] = (p * (log_ratio - kl_pq) + p - q) / n_pixels
    return grad


def mean_region_kl(fused, thermal, boxes, stride=1, enlarge=1.5):
    """Average :func:`region_kl` over a set of GT boxes (0.0 for no boxes)."""
    values = [region_kl(fused, thermal, RegionSpec(Box.of(b), stride, enlarge)) for b in boxes]
    return float(np.mean(values)) if values else 0.0


@dataclass(frozen=True)
class LossComponents:
    """Detector loss terms plus the weighted KL regularizer.

    ``cls``, ``reg`` and ``ctr`` are opaque scalars computed elsewhere.
    """

    cls: float
    reg: float
    ctr: float
    kl: float = 0.0
    lambda_kl: float = DEFAULT_LAMBDA

    def __post_init__(self):
        values = (self.cls, self.reg, self.ctr, self.kl, self.lambda_kl)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("loss components must be finite")
        if self.kl < 0 or self.lambda_kl < 0:
            raise ValueError("kl and lambda_kl must be non-negative")


def total_loss(components):
    c = components
    return c.cls + c.reg + c.ctr + c.lambda_kl * c.kl
