"""Seeded synthetic visible/thermal scenes with a known misalignment."""
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..align import OffsetField, grid_sample
from ..exceptions import PlacementError

MAX_SHIFT = 8.0
MAX_PLACEMENT_TRIES = 1000
PLACEMENT_ENLARGE = 1.5


@dataclass(frozen=True)
class SceneConfig:
    """Scene geometry, object statistics, misalignment and noise.

    ``true_shift`` displaces the thermal content by ``(dx, dy)`` pixels.
    ``noise_sigma`` is one value for both modalities or a
    ``(visible, thermal)`` pair. ``thermal_gain`` scales the thermal
    amplitudes relative to the visible ones.
    """

    seed: int = 0
    width: int = 64
    height: int = 64
    num_objects: int = 3
    object_size: Tuple[float, float] = (6.0, 12.0)
    true_shift: Tuple[float, float] = (0.0, 0.0)
    noise_sigma: Union[float, Tuple[float, float]] = 0.0
    channels: int = 4
    thermal_gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "object_size", tuple(float(v) for v in self.object_size))
        object.__setattr__(self, "true_shift", tuple(float(v) for v in self.true_shift))
        if np.ndim(self.noise_sigma):
            object.__setattr__(self, "noise_sigma", tuple(float(v) for v in self.noise_sigma))
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for dim in (self.width, self.height):
            if dim < 2 or dim % 2:
                raise ValueError("width and height must be even positive integers")
        if self.num_objects < 1 or self.channels < 1:
            raise ValueError("num_objects and channels must be positive")
        lo, hi = self.object_size
        if not 0 < lo <= hi:
            raise ValueError("object_size must be (min, max) with 0 < min <= max")
        if math.hypot(*self.true_shift) > MAX_SHIFT:
            raise ValueError(f"|true_shift| must not exceed {MAX_SHIFT}")
        if hi + 2 * self.margin >= min(self.width, self.height):
            raise ValueError("objects do not fit inside the image")
        if min(self.noise_sigmas) < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def noise_sigmas(self):
        if isinstance(self.noise_sigma, tuple):
            return self.noise_sigma
        return (float(self.noise_sigma), float(self.noise_sigma))

    @property
    def margin(self):
        return math.ceil(max(abs(v) for v in self.true_shift))


@dataclass(frozen=True)
class Scene:
    visible: np.ndarray
    thermal: np.ndarray
    gts: np.ndarray
    true_shift: Tuple[float, float]
    content: np.ndarray


def _place_objects(cfg, rng):
    lo, hi = cfg.object_size
    placed = []
    tries = 0
    while len(placed) < cfg.num_objects:
        tries += 1
        if tries > MAX_PLACEMENT_TRIES:
            raise PlacementError(
                f"placed {len(placed)} of {cfg.num_objects} objects after {MAX_PLACEMENT_TRIES} tries"
            )
        size = rng.uniform(lo, hi)
        pad = size / 2 + cfg.margin
        cx = rng.uniform(pad, cfg.width - pad)
        cy = rng.uniform(pad, cfg.height - pad)
        # Enlarged boxes stay disjoint so per-object crops do not overlap.
        reach = PLACEMENT_ENLARGE / 2
        if all(
            abs(cx - ox) >= reach * (size + os) or abs(cy - oy) >= reach * (size + os)
            for ox, oy, os in placed
        ):
            placed.append((cx, cy, size))
    return placed


def render_blobs(objects, amplitudes, height, width):
    """Sum of isotropic Gaussians with sigma = size/4 and per-channel amplitudes."""
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    out = np.zeros((amplitudes.shape[1], height, width))
    for (cx, cy, size), amp in zip(objects, amplitudes):
        sigma = size / 4
        blob = np.exp(-((cols - cx) ** 2 + (rows - cy) ** 2) / (2 * sigma * sigma))
        out += amp[:, None, None] * blob
    return out


def gen_scene(cfg):
    """Render a scene; the same config always yields bit-identical arrays.

    The thermal map is the visible content scaled by ``thermal_gain`` and
    bilinearly translated by ``true_shift``. GT boxes are square, sized by
    the object size, and given in the thermal frame.
    """
    rng = np.random.default_rng(cfg.seed)
    objects = _place_objects(cfg, rng)
    amplitudes = rng.uniform(0.5, 1.5, size=(len(objects), cfg.channels))
    content = render_blobs(objects, amplitudes, cfg.height, cfg.width)

    dx, dy = cfg.true_shift
    shift = OffsetField.constant(-dx, -dy, (cfg.height, cfg.width))
    thermal = grid_sample(cfg.thermal_gain * content, shift)
    visible = content.copy()

    sigma_v, sigma_t = cfg.noise_sigmas
    if sigma_v > 0:
        visible += rng.normal(0.0, sigma_v, size=visible.shape)
    if sigma_t > 0:
        thermal += rng.normal(0.0, sigma_t, size=thermal.shape)

    gts = np.array([(cx + dx, cy + dy, size, size) for cx, cy, size in objects])
    return Scene(visible, thermal, gts, (dx, dy), content)
