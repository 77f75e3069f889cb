"""Box similarity metrics and dual-calculation label assignment.

Boxes are centre-form ``(cx, cy, w, h)`` in pixels. The scalar functions take
a :class:`Box` or any 4-sequence; the ``pairwise_*`` functions take (n, 4)
and (m, 4) arrays and return an (n, m) matrix.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_boxes
from .exceptions import NonSmoothPointError, ShapeError

__all__ = [
    "Box",
    "GeoShapeParams",
    "AssignmentResult",
    "BACKGROUND",
    "iou",
    "giou",
    "center_distance",
    "ratio_distance",
    "geoshape",
    "geoshape_grad",
    "dual_score",
    "pairwise_iou",
    "pairwise_giou",
    "pairwise_geoshape",
    "assign_labels",
]

BACKGROUND = -1


class Box(NamedTuple):
    cx: float
    cy: float
    w: float
    h: float

    @classmethod
    def of(cls, b):
        box = b if isinstance(b, cls) else cls(*(float(v) for v in b))
        if not (box.w > 0 and box.h > 0):
            raise ValueError(f"box sides must be positive, got {box}")
        if not all(math.isfinite(v) for v in box):
            raise ValueError(f"box has non-finite values: {box}")
        return box

    def corners(self):
        """(x1, y1, x2, y2)."""
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )


@dataclass(frozen=True)
class GeoShapeParams:
    """Weights of the aspect-ratio (``gamma``) and IoU (``beta``) terms."""

    gamma: float = 2.0
    beta: float = 1.0

    def __post_init__(self):
        if self.gamma < 0 or self.beta < 0:
            raise ValueError("gamma and beta must be non-negative")


def _axis_overlap(ca, wa, cg, wg):
    """Signed overlap length of two intervals; negative when they are apart.

    Written in centre/size form so identical intervals give exactly ``wa``.
    """
    return min(wa, wg, (wa + wg) / 2 - abs(ca - cg))


def _axis_hull(ca, wa, cg, wg):
    return max(wa, wg, (wa + wg) / 2 + abs(ca - cg))


def _overlap(a, g):
    iw = _axis_overlap(a.cx, a.w, g.cx, g.w)
    ih = _axis_overlap(a.cy, a.h, g.cy, g.h)
    inter = max(iw, 0.0) * max(ih, 0.0)
    return iw, ih, inter, a.w * a.h + g.w * g.h - inter


def iou(a, g):
    a, g = Box.of(a), Box.of(g)
    _, _, inter, union = _overlap(a, g)
    return inter / union


def giou(a, g):
    a, g = Box.of(a), Box.of(g)
    _, _, inter, union = _overlap(a, g)
    hull = _axis_hull(a.cx, a.w, g.cx, g.w) * _axis_hull(a.cy, a.h, g.cy, g.h)
    return inter / union - (hull - union) / hull


def center_distance(a, g):
    """Centre offset normalized per axis by the summed side lengths."""
    a, g = Box.of(a), Box.of(g)
    u = (a.cx - g.cx) / (a.w + g.w)
    v = (a.cy - g.cy) / (a.h + g.h)
    return math.sqrt(u * u + v * v)


def ratio_distance(a, g):
    """Absolute difference of log aspect ratios."""
    a, g = Box.of(a), Box.of(g)
    return abs(math.log(a.w / a.h) - math.log(g.w / g.h))


def geoshape(a, g, params=GeoShapeParams()):
    """``exp(-(d_c + gamma * d_r + beta * (1 - IoU)))``, in (0, 1]."""
    energy = (
        center_distance(a, g)
        + params.gamma * ratio_distance(a, g)
        + params.beta * (1.0 - iou(a, g))
    )
    return math.exp(-energy)


def _check_smooth(a, g):
    if a.cx == g.cx and a.cy == g.cy:
        raise NonSmoothPointError("coincident centres: centre distance is not differentiable")
    if math.log(a.w / a.h) == math.log(g.w / g.h):
        raise NonSmoothPointError("equal aspect ratios: ratio distance is not differentiable")
    ac, gc = a.corners(), g.corners()
    for axis in (0, 1):
        mine = (ac[axis], ac[axis + 2])
        theirs = (gc[axis], gc[axis + 2])
        if any(p == q for p in mine for q in theirs):
            raise NonSmoothPointError("boxes share a corner coordinate: IoU is not differentiable")


def _axis_overlap_grad(ca, wa, cg, wg):
    """d(overlap)/d(ca), d(overlap)/d(wa) on the active branch of the min."""
    partial = (wa + wg) / 2 - abs(ca - cg)
    if partial < min(wa, wg):
        return -math.copysign(1.0, ca - cg), 0.5
    if wa < wg:
        return 0.0, 1.0
    return 0.0, 0.0


def geoshape_grad(a, g, params=GeoShapeParams()):
    """Gradient of :func:`geoshape` with respect to ``a``'s (cx, cy, w, h).

    Raises
    ------
    NonSmoothPointError
        At coincident centres, equal aspect ratios, or when the boxes share
        an edge coordinate on either axis.
    """
    a, g = Box.of(a), Box.of(g)
    _check_smooth(a, g)

    sw, sh = a.w + g.w, a.h + g.h
    u = (a.cx - g.cx) / sw
    v = (a.cy - g.cy) / sh
    dc = math.sqrt(u * u + v * v)
    grad_dc = np.array([u / (dc * sw), v / (dc * sh), -u * u / (dc * sw), -v * v / (dc * sh)])

    r = math.log(a.w / a.h) - math.log(g.w / g.h)
    sign = 1.0 if r > 0 else -1.0
    grad_dr = np.array([0.0, 0.0, sign / a.w, -sign / a.h])

    iw, ih, inter, union = _overlap(a, g)
    grad_inter = np.zeros(4)
    if iw > 0 and ih > 0:
        dcx, dw = _axis_overlap_grad(a.cx, a.w, g.cx, g.w)
        dcy, dh = _axis_overlap_grad(a.cy, a.h, g.cy, g.h)
        grad_inter = np.array([ih * dcx, iw * dcy, ih * dw, iw * dh])
    grad_union = np.array([0.0, 0.0, a.h, a.w]) - grad_inter
    grad_iou = (grad_inter * union - inter * grad_union) / (union * union)

    grad_energy = grad_dc + params.gamma * grad_dr - params.beta * grad_iou
    return -geoshape(a, g, params) * grad_energy


def dual_score(b, p, g, params=GeoShapeParams()):
    """Better of the anchor and prediction similarities to ``g``."""
    return max(geoshape(b, g, params), geoshape(p, g, params))


def _pairwise_overlap(a, g):
    dx = np.abs(a[:, None, 0] - g[None, :, 0])
    dy = np.abs(a[:, None, 1] - g[None, :, 1])
    aw, ah = a[:, None, 2], a[:, None, 3]
    gw, gh = g[None, :, 2], g[None, :, 3]
    iw = np.minimum(np.minimum(aw, gw), (aw + gw) / 2 - dx)
    ih = np.minimum(np.minimum(ah, gh), (ah + gh) / 2 - dy)
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = aw * ah + gw * gh - inter
    hull = np.maximum(np.maximum(aw, gw), (aw + gw) / 2 + dx) * np.maximum(
        np.maximum(ah, gh), (ah + gh) / 2 + dy
    )
    return inter, union, hull


def pairwise_iou(a, g):
    a, g = check_boxes(a), check_boxes(g)
    inter, union, _ = _pairwise_overlap(a, g)
    return inter / union


def pairwise_giou(a, g):
    a, g = check_boxes(a), check_boxes(g)
    inter, union, hull = _pairwise_overlap(a, g)
    return inter / union - (hull - union) / hull


def pairwise_geoshape(a, g, params=GeoShapeParams()):
    a, g = check_boxes(a), check_boxes(g)
    inter, union, _ = _pairwise_overlap(a, g)
    u = (a[:, None, 0] - g[None, :, 0]) / (a[:, None, 2] + g[None, :, 2])
    v = (a[:, None, 1] - g[None, :, 1]) / (a[:, None, 3] + g[None, :, 3])
    dc = np.sqrt(u * u + v * v)
    dr = np.abs(np.log(a[:, 2] / a[:, 3])[:, None] - np.log(g[:, 2] / g[:, 3])[None])
    return np.exp(-(dc + params.gamma * dr + params.beta * (1.0 - inter / union)))


_SIMILARITIES = {
    "geoshape": pairwise_geoshape,
    "iou": lambda a, g, params: pairwise_iou(a, g),
    "giou": lambda a, g, params: pairwise_giou(a, g),
}


@dataclass(frozen=True)
class AssignmentResult:
    """Per-anchor GT index (``BACKGROUND`` when unmatched) and best score.

    ``scores[i]`` is the best dual score of anchor ``i`` over all GTs, or 0.0
    when there are no GTs.
    """

    labels: np.ndarray
    scores: np.ndarray

    @property
    def positive(self):
        return self.labels != BACKGROUND

    @property
    def num_positive(self):
        return int(self.positive.sum())

    def mean_positive_score(self):
        pos = self.positive
        return float(self.scores[pos].mean()) if pos.any() else 0.0


def assign_labels(anchors, preds, gts, params=GeoShapeParams(), tau=0.5, metric="geoshape"):
    """Label each anchor with its best-matching GT under the dual rule.

    For anchor ``i`` and GT ``j`` the score is
    ``max(sim(anchor_i, gt_j), sim(pred_i, gt_j))``. The anchor takes the
    arg-max GT (lowest index on ties) when that score is at least ``tau``,
    otherwise it is background. ``metric`` selects ``"geoshape"``,
    ``"iou"`` or ``"giou"``.
    """
    if metric not in _SIMILARITIES:
        raise ValueError(f"unknown metric {metric!r}; expected one of {sorted(_SIMILARITIES)}")
    anchors = check_boxes(anchors, "anchors")
    preds = check_boxes(preds, "preds")
    gts = check_boxes(gts, "gts")
    if len(anchors) != len(preds):
        raise ShapeError(f"{len(anchors)} anchors but {len(preds)} predictions")
    n = len(anchors)
    if len(gts) == 0 or n == 0:
        return AssignmentResult(np.full(n, BACKGROUND, dtype=np.int64), np.zeros(n))
    sim = _SIMILARITIES[metric]
    scores = np.maximum(sim(anchors, gts, params), sim(preds, gts, params))
    best = np.argmax(scores, axis=1)
    best_score = scores[np.arange(n), best]
    labels = np.where(best_score >= tau, best, BACKGROUND).astype(np.int64)
    return AssignmentResult(labels, best_score)
