"""In-process invariant checks behind the ``selftest`` CLI command.

Every check is seeded, and the printed output carries no timings, so two
runs print identical bytes.
"""
import math

import numpy as np

from ..align import OffsetField, grid_sample, predict_offsets
from ..assign import (
    BACKGROUND,
    Box,
    GeoShapeParams,
    assign_labels,
    dual_score,
    geoshape,
    geoshape_grad,
)
from ..loss import RegionSpec, region_kl, region_kl_grad
from ..tensor import ConvParams, channel_softmax, conv2d, deconv2d
from ..wavelet import dwt_haar, idwt_haar
from .bench import assign_bench
from .config import RunConfig
from .pipeline import run_pipeline
from .recover import recover_shift
from .scene import SceneConfig, gen_scene

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _conv_loops(x, p):
    kh, kw = p.kernel_size
    s, d, pad = p.stride, p.dilation, p.padding
    c_in, h, w = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - d * (kh - 1) - 1) // s + 1
    wo = (w + 2 * pad - d * (kw - 1) - 1) // s + 1
    out = np.zeros((p.c_out, ho, wo))
    for o in range(p.c_out):
        for y in range(ho):
            for xx in range(wo):
                acc = p.bias[o]
                for c in range(c_in):
                    for i in range(kh):
                        for j in range(kw):
                            acc += p.weights[o, c, i, j] * xp[c, y * s + i * d, xx * s + j * d]
                out[o, y, xx] = acc
    return out


@check
def conv2d_matches_loops():
    rng = np.random.default_rng(1)
    x = rng.integers(-5, 6, size=(2, 5, 7)).astype(float)
    p = ConvParams(rng.integers(-3, 4, size=(3, 2, 3, 3)).astype(float), np.ones(3), dilation=2, padding=2)
    return np.array_equal(conv2d(x, p), _conv_loops(x, p))


@check
def conv_and_deconv_are_linear():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(2, 3, 8, 8))
    a, b = rng.normal(size=2)
    ok = True
    for op, p in (
        (conv2d, ConvParams(rng.normal(size=(4, 3, 3, 3)), np.zeros(4), padding=1)),
        (deconv2d, ConvParams(rng.normal(size=(4, 3, 2, 2)), np.zeros(4), stride=2)),
    ):
        ok &= np.max(np.abs(op(a * x + b * y, p) - (a * op(x, p) + b * op(y, p)))) < 1e-10
    return bool(ok)


@check
def channel_softmax_normalizes():
    x = np.random.default_rng(3).normal(scale=10, size=(5, 6, 6))
    p = channel_softmax(x)
    return bool(np.all(p > 0) and np.max(np.abs(p.sum(axis=0) - 1)) < 1e-12)


@check
def haar_round_trip_and_energy():
    rng = np.random.default_rng(4)
    for _ in range(20):
        c, h, w = rng.integers(1, 4), 2 * rng.integers(1, 9), 2 * rng.integers(1, 9)
        x = rng.normal(size=(c, h, w))
        bands = dwt_haar(x)
        if np.max(np.abs(idwt_haar(bands) - x)) >= 1e-12:
            return False
        energy = sum(float(np.sum(b * b)) for b in bands)
        if abs(energy - np.sum(x * x)) > 1e-10 * np.sum(x * x):
            return False
    return True


@check
def grid_sample_identity_and_linearity():
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=(2, 3, 9, 11))
    if not np.array_equal(grid_sample(x, OffsetField.zeros((9, 11))), x):
        return False
    off = OffsetField(rng.uniform(-2, 2, (9, 11)), rng.uniform(-2, 2, (9, 11)), 2.0)
    a, b = rng.normal(size=2)
    lhs = grid_sample(a * x + b * y, off)
    rhs = a * grid_sample(x, off) + b * grid_sample(y, off)
    return bool(np.max(np.abs(lhs - rhs)) < 1e-12)


@check
def offsets_strictly_bounded():
    rng = np.random.default_rng(6)
    fv, ft = rng.normal(size=(2, 2, 10, 10))
    conv = ConvParams(rng.normal(scale=5, size=(2, 4, 3, 3)), np.zeros(2), padding=1)
    off = predict_offsets(fv, ft, conv, max_disp=1.5)
    return bool(np.all(np.abs(off.dx) < 1.5) and np.all(np.abs(off.dy) < 1.5))


@check
def geoshape_hand_value():
    value = geoshape((0, 0, 2, 2), (1, 0, 2, 2), GeoShapeParams(2.0, 1.0))
    same = geoshape((3, 4, 5, 6), (3, 4, 5, 6))
    return abs(value - math.exp(-11 / 12)) < 1e-10 and same == 1.0


@check
def geoshape_similarity_invariance():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = np.r_[rng.uniform(-10, 10, 2), rng.uniform(0.5, 10, 2)]
        g = np.r_[rng.uniform(-10, 10, 2), rng.uniform(0.5, 10, 2)]
        s, t = rng.uniform(0.1, 10), np.r_[rng.uniform(-50, 50, 2), 0, 0]
        if abs(geoshape(a * s + t, g * s + t) - geoshape(a, g)) >= 1e-12:
            return False
    return True


@check
def geoshape_grad_matches_finite_differences():
    rng = np.random.default_rng(8)
    h = 1e-5
    done = 0
    while done < 100:
        a = np.r_[rng.uniform(-3, 3, 2), rng.uniform(1, 4, 2)]
        g = np.r_[rng.uniform(-3, 3, 2), rng.uniform(1, 4, 2)]
        try:
            grad = geoshape_grad(a, g)
        except ValueError:
            continue
        fd = np.array([(geoshape(a + h * e, g) - geoshape(a - h * e, g)) / (2 * h) for e in np.eye(4)])
        # skip instances within a step of a kink
        if np.max(np.abs(grad - fd)) > 1e-4 * max(np.max(np.abs(fd)), 1e-8):
            if _near_kink(a, g, 1e-3):
                continue
            return False
        done += 1
    return True


def _near_kink(a, g, margin):
    a, g = Box.of(a), Box.of(g)
    ac, gc = a.corners(), g.corners()
    gaps = [abs(p - q) for ax in (0, 1) for p in (ac[ax], ac[ax + 2]) for q in (gc[ax], gc[ax + 2])]
    gaps.append(abs(math.log(a.w / a.h) - math.log(g.w / g.h)))
    gaps.append(math.hypot(a.cx - g.cx, a.cy - g.cy))
    return min(gaps) < margin


@check
def assignment_matches_brute_force():
    rng = np.random.default_rng(9)
    params = GeoShapeParams()
    for _ in range(100):
        n, m = rng.integers(1, 17), rng.integers(0, 5)
        anchors = np.c_[rng.uniform(0, 20, (n, 2)), rng.uniform(1, 8, (n, 2))]
        preds = anchors + np.c_[rng.normal(size=(n, 2)), np.zeros((n, 2))]
        gts = np.c_[rng.uniform(0, 20, (m, 2)), rng.uniform(1, 8, (m, 2))]
        res = assign_labels(anchors, preds, gts, params, 0.3)
        for i in range(n):
            scores = [dual_score(anchors[i], preds[i], gts[j], params) for j in range(m)]
            best = max(range(m), key=lambda j: (scores[j], -j)) if m else None
            want = best if m and scores[best] >= 0.3 else BACKGROUND
            if res.labels[i] != want:
                return False
    return True


@check
def region_kl_properties():
    z = np.zeros((2, 1, 1))
    zf = z.copy()
    zf[1] = math.log(3)
    spec = RegionSpec((0.5, 0.5, 1, 1), 1, 1.0)
    hand = abs(region_kl(zf, z, spec) - 0.27465) < 1e-4
    rng = np.random.default_rng(10)
    x, y = rng.normal(size=(2, 4, 12, 12))
    spec = RegionSpec((6, 6, 4, 4), 1)
    sym = abs(region_kl(x, y, spec) - region_kl(y, x, spec)) < 1e-12
    return hand and sym and region_kl(x, x, spec) == 0.0


@check
def region_kl_grad_matches_finite_differences():
    rng = np.random.default_rng(11)
    x, y = rng.normal(size=(2, 3, 10, 10))
    spec = RegionSpec((5, 5, 4, 4), 1)
    grad = region_kl_grad(x, y, spec)
    r0, r1, c0, c1 = 2, 8, 2, 8
    outside = grad.copy()
    outside[:, r0:r1, c0:c1] = 0
    if np.any(outside != 0):
        return False
    h = 1e-6
    for idx in np.ndindex(3, r1 - r0, c1 - c0):
        k = (idx[0], idx[1] + r0, idx[2] + c0)
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd = (region_kl(xp, y, spec) - region_kl(xm, y, spec)) / (2 * h)
        if abs(fd - grad[k]) > 1e-5 * max(abs(fd), np.max(np.abs(grad))):
            return False
    return True


@check
def shift_recovery_noise_free():
    rng = np.random.default_rng(12)
    for seed in range(4):
        shift = tuple(float(v) for v in rng.integers(-3, 4, 2))
        scene = gen_scene(SceneConfig(seed=seed, true_shift=shift))
        got = recover_shift(scene.visible, scene.thermal)
        if math.hypot(got[0] - shift[0], got[1] - shift[1]) >= 0.25:
            return False
    return True


@check
def pipeline_alignment_reduces_kl():
    for seed, shift in ((0, (3.0, 0.0)), (1, (-2.0, 1.0))):
        report = run_pipeline(RunConfig(scene=SceneConfig(seed=seed, true_shift=shift)))
        if not report.region_kl_after < report.region_kl_before:
            return False
    return True


@check
def bench_matches_analytic_iou():
    for row in assign_bench([2, 4, 8, 16], [0, 1, 2, 4, 8, 16, 20]):
        k, d = row["size"], row["shift"]
        if d <= k and abs(row["iou"] - (k - d) / (k + d)) > 1e-12:
            return False
        if d >= k and not (row["iou"] == 0.0 and row["geoshape"] > 0):
            return False
    return True


def run_selftest(out):
    """Run every check, write one line each to ``out``; return the failure count."""
    failures = 0
    for fn in CHECKS:
        try:
            ok = bool(fn())
            detail = ""
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f" ({type(exc).__name__}: {exc})"
        failures += not ok
        out.write(f"{'PASS' if ok else 'FAIL'} {fn.__name__}{detail}\n")
    out.write(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed\n")
    return failures
