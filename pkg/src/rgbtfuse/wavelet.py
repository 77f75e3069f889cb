"""Single-level orthonormal Haar DWT and cross-layer wavelet fusion."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_feature_map
from .exceptions import ShapeError
from .tensor import ConvParams, concat_channels, conv2d, deconv2d

__all__ = ["WaveletBands", "ClfmParams", "dwt_haar", "idwt_haar", "clfm_fuse"]


class WaveletBands(NamedTuple):
    """Sub-bands of one Haar level, each of shape (c, h/2, w/2)."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


def dwt_haar(x):
    """Decompose ``x`` into Haar sub-bands.

    For each 2x2 block ``[a b; c d]``::

        LL = (a + b + c + d) / 2    LH = (a + b - c - d) / 2
        HL = (a - b + c - d) / 2    HH = (a - b - c + d) / 2

    Odd spatial dimensions are rejected rather than padded.
    """
    x = check_feature_map(x)
    _, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"Haar DWT needs even spatial dims, got ({h}, {w})")
    a = x[:, 0::2, 0::2]
    b = x[:, 0::2, 1::2]
    c = x[:, 1::2, 0::2]
    d = x[:, 1::2, 1::2]
    return WaveletBands(
        ll=(a + b + c + d) / 2,
        lh=(a + b - c - d) / 2,
        hl=(a - b + c - d) / 2,
        hh=(a - b - c + d) / 2,
    )


def idwt_haar(bands):
    """Exact inverse of :func:`dwt_haar`."""
    ll, lh, hl, hh = (check_feature_map(band, name) for band, name in zip(bands, WaveletBands._fields))
    if not (ll.shape == lh.shape == hl.shape == hh.shape):
        raise ShapeError(
            f"band shapes differ: {ll.shape}, {lh.shape}, {hl.shape}, {hh.shape}"
        )
    c, h, w = ll.shape
    out = np.empty((c, 2 * h, 2 * w))
    out[:, 0::2, 0::2] = (ll + lh + hl + hh) / 2
    out[:, 0::2, 1::2] = (ll + lh - hl - hh) / 2
    out[:, 1::2, 0::2] = (ll - lh + hl - hh) / 2
    out[:, 1::2, 1::2] = (ll - lh - hl + hh) / 2
    return out


@dataclass(frozen=True)
class ClfmParams:
    """Learnable pieces of the cross-layer fusion.

    deconv
        2x2 stride-2 transposed conv lifting the coarse visible map to the
        thermal resolution, c_v -> C.
    ll_fuse
        3x3 dilation-2 conv over the concatenated LL bands, 2C -> C.
    hf_gate
        1x1 conv turning the concatenated visible LH/HL bands into a C-channel
        gate for the fused LL band.
    """

    deconv: ConvParams
    ll_fuse: ConvParams
    hf_gate: ConvParams

    def __post_init__(self):
        if self.deconv.kernel_size != (2, 2) or self.deconv.stride != 2:
            raise ShapeError("deconv must be a 2x2 kernel with stride 2")
        if self.deconv.padding or self.deconv.dilation != 1:
            raise ShapeError("deconv must use padding 0 and dilation 1")
        c = self.deconv.c_out
        for name in ("ll_fuse", "hf_gate"):
            conv = getattr(self, name)
            if conv.c_in != 2 * c or conv.c_out != c:
                raise ShapeError(f"{name} must map {2 * c} -> {c} channels")
        if self.hf_gate.kernel_size != (1, 1):
            raise ShapeError("hf_gate must be a 1x1 kernel")

    @property
    def channels(self):
        return self.deconv.c_out

    @classmethod
    def random(cls, channels, rng, sigma=0.1, visible_channels=None):
        cv = channels if visible_channels is None else visible_channels
        return cls(
            deconv=ConvParams.random(channels, cv, 2, rng, sigma, stride=2),
            ll_fuse=ConvParams.random(channels, 2 * channels, 3, rng, sigma, dilation=2, padding=2),
            hf_gate=ConvParams.random(channels, 2 * channels, 1, rng, sigma),
        )

    @classmethod
    def zeros(cls, channels, visible_channels=None):
        cv = channels if visible_channels is None else visible_channels
        return cls(
            deconv=ConvParams.zeros(channels, cv, 2, stride=2),
            ll_fuse=ConvParams.zeros(channels, 2 * channels, 3, dilation=2, padding=2),
            hf_gate=ConvParams.zeros(channels, 2 * channels, 1),
        )


def clfm_fuse(f_v_next, f_t, params):
    """Fuse a coarse visible map with a fine thermal map in the Haar domain.

    Parameters
    ----------
    f_v_next : ndarray, shape (c_v, h/2, w/2)
        Higher-level visible features.
    f_t : ndarray, shape (C, h, w)
        Lower-level thermal features; ``h`` and ``w`` must be even.
    params : ClfmParams

    Returns
    -------
    ndarray, shape (C, h, w)
        ``idwt(LL', LH_v, HL_v, HH_v)`` where ``LL = ll_fuse([LL_v, LL_t])``
        and ``LL' = LL * hf_gate([LH_v, HL_v]) + LL``. The thermal detail
        bands are not used.
    """
    f_v_next = check_feature_map(f_v_next, "f_v_next")
    f_t = check_feature_map(f_t, "f_t")
    c, h, w = f_t.shape
    if h % 2 or w % 2:
        raise ShapeError(f"thermal map needs even spatial dims, got ({h}, {w})")
    if f_v_next.shape[1:] != (h // 2, w // 2):
        raise ShapeError(
            f"visible map spatial dims {f_v_next.shape[1:]} must be half of thermal ({h}, {w})"
        )
    if c != params.channels:
        raise ShapeError(f"thermal has {c} channels, params expect {params.channels}")

    f_v_up = deconv2d(f_v_next, params.deconv)
    vis = dwt_haar(f_v_up)
    thr = dwt_haar(f_t)
    fused_ll = conv2d(concat_channels(vis.ll, thr.ll), params.ll_fuse)
    gate = conv2d(concat_channels(vis.lh, vis.hl), params.hf_gate)
    gated_ll = fused_ll * gate + fused_ll
    return idwt_haar(WaveletBands(gated_ll, vis.lh, vis.hl, vis.hh))
