"""Dense (c, y, x) feature-map kernels.

Feature maps are plain ``numpy.ndarray`` objects of dtype float64 with shape
``(channels, height, width)``. A batch is a Python sequence of maps; none of
the kernels here batch internally.
"""
import struct
from dataclasses import dataclass

import numpy as np

from ._validation import check_feature_map, check_same_shape
from .exceptions import ShapeError

__all__ = [
    "ConvParams",
    "conv2d",
    "deconv2d",
    "global_avg_pool",
    "channel_softmax",
    "elementwise",
    "add",
    "mul",
    "concat_channels",
    "to_fmap_bytes",
    "from_fmap_bytes",
    "write_fmap",
    "read_fmap",
]

FMAP_MAGIC = b"FMAP"
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class ConvParams:
    """Weights and geometry of a 2D convolution.

    ``weights`` has shape (c_out, c_in, k_h, k_w) for both :func:`conv2d`
    and :func:`deconv2d`.
    """

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    dilation: int = 1
    padding: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 4 or w.shape[2] < 1 or w.shape[3] < 1:
            raise ShapeError(f"weights must be (c_out, c_in, k_h, k_w), got {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"bias length {b.shape[0]} != c_out {w.shape[0]}")
        if self.stride < 1 or self.dilation < 1 or self.padding < 0:
            raise ValueError("stride and dilation must be >= 1 and padding >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def c_out(self):
        return self.weights.shape[0]

    @property
    def c_in(self):
        return self.weights.shape[1]

    @property
    def kernel_size(self):
        return self.weights.shape[2], self.weights.shape[3]

    @classmethod
    def random(cls, c_out, c_in, kernel_size, rng, sigma=0.1, **geometry):
        """Gaussian weights and bias with standard deviation ``sigma``."""
        kh, kw = (kernel_size, kernel_size) if np.isscalar(kernel_size) else kernel_size
        weights = rng.normal(0.0, sigma, size=(c_out, c_in, kh, kw))
        bias = rng.normal(0.0, sigma, size=c_out)
        return cls(weights, bias, **geometry)

    @classmethod
    def zeros(cls, c_out, c_in, kernel_size, **geometry):
        kh, kw = (kernel_size, kernel_size) if np.isscalar(kernel_size) else kernel_size
        return cls(np.zeros((c_out, c_in, kh, kw)), np.zeros(c_out), **geometry)

    @classmethod
    def identity(cls, channels):
        """1x1 kernel that copies its input."""
        w = np.eye(channels).reshape(channels, channels, 1, 1)
        return cls(w, np.zeros(channels))


def _check_channels(x, params):
    if x.shape[0] != params.c_in:
        raise ShapeError(
            f"input has {x.shape[0]} channels but kernel expects {params.c_in}"
        )


def conv2d(x, params):
    """Zero-padded 2D cross-correlation.

    Output extent per axis is ``floor((n + 2p - d(k-1) - 1) / s) + 1``.
    """
    x = check_feature_map(x)
    _check_channels(x, params)
    s, d, p = params.stride, params.dilation, params.padding
    kh, kw = params.kernel_size
    _, h, w = x.shape
    ho = (h + 2 * p - d * (kh - 1) - 1) // s + 1
    wo = (w + 2 * p - d * (kw - 1) - 1) // s + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"convolution output extent ({ho}, {wo}) is not positive")

    xp = np.pad(x, ((0, 0), (p, p), (p, p))) if p else x
    out = np.zeros((params.c_out, ho, wo))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, i * d : i * d + s * (ho - 1) + 1 : s, j * d : j * d + s * (wo - 1) + 1 : s]
            out += np.tensordot(params.weights[:, :, i, j], patch, axes=(1, 0))
    out += params.bias[:, None, None]
    return out


def deconv2d(x, params):
    """Transposed convolution (scatter-add form of :func:`conv2d`).

    Output extent per axis is ``(n - 1)s - 2p + d(k-1) + 1``; a 2x2 kernel
    with stride 2 therefore doubles each spatial dimension exactly.
    """
    x = check_feature_map(x)
    _check_channels(x, params)
    s, d, p = params.stride, params.dilation, params.padding
    kh, kw = params.kernel_size
    _, h, w = x.shape
    fh = (h - 1) * s + d * (kh - 1) + 1
    fw = (w - 1) * s + d * (kw - 1) + 1
    if fh - 2 * p < 1 or fw - 2 * p < 1:
        raise ShapeError("transposed convolution output extent is not positive")

    full = np.zeros((params.c_out, fh, fw))
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(params.weights[:, :, i, j], x, axes=(1, 0))
            full[:, i * d : i * d + s * (h - 1) + 1 : s, j * d : j * d + s * (w - 1) + 1 : s] += contrib
    out = full[:, p : fh - p, p : fw - p] if p else full
    return out + params.bias[:, None, None]


def global_avg_pool(x):
    """Per-channel spatial mean, shape (channels,)."""
    x = check_feature_map(x)
    return x.mean(axis=(1, 2))


def channel_softmax(x):
    """Softmax over the channel axis at every pixel."""
    x = check_feature_map(x)
    z = np.exp(x - x.max(axis=0, keepdims=True))
    return z / z.sum(axis=0, keepdims=True)


def elementwise(a, b, kind):
    """Pointwise ``add`` or ``mul`` of two equally shaped maps."""
    a = check_feature_map(a, "a")
    b = check_feature_map(b, "b")
    check_same_shape(a, b)
    if kind == "add":
        return a + b
    if kind == "mul":
        return a * b
    raise ValueError(f"unknown elementwise kind {kind!r}")


def add(a, b):
    return elementwise(a, b, "add")


def mul(a, b):
    return elementwise(a, b, "mul")


def concat_channels(a, b):
    """Stack ``a`` then ``b`` along the channel axis."""
    a = check_feature_map(a, "a")
    b = check_feature_map(b, "b")
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"spatial dims differ: {a.shape[1:]} vs {b.shape[1:]}")
    return np.concatenate([a, b], axis=0)


def to_fmap_bytes(x):
    """Serialize a map as ``FMAP`` + u32 (c, h, w) + little-endian float64 data."""
    x = check_feature_map(x)
    c, h, w = x.shape
    return _HEADER.pack(FMAP_MAGIC, c, h, w) + x.astype("<f8").tobytes()


def from_fmap_bytes(buf):
    if len(buf) < _HEADER.size:
        raise ValueError("buffer too short for an FMAP header")
    magic, c, h, w = _HEADER.unpack_from(buf)
    if magic != FMAP_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    expected = _HEADER.size + 8 * c * h * w
    if len(buf) != expected:
        raise ValueError(f"FMAP payload is {len(buf)} bytes, expected {expected}")
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size)
    return data.astype(np.float64).reshape(c, h, w)


def write_fmap(path, x):
    with open(path, "wb") as fh:
        fh.write(to_fmap_bytes(x))


def read_fmap(path):
    with open(path, "rb") as fh:
        return from_fmap_bytes(fh.read())
