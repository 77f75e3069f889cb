"""scikit-learn style wrappers around the functional kernels.

Feature-map estimators accept either a single (c, h, w) array or a sequence
of them and return the same kind.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_boxes, check_feature_map
from .align import DsrParams, OffsetField, dsr_refine, grid_sample
from .assign import GeoShapeParams, assign_labels
from .harness.recover import recover_shift
from .wavelet import ClfmParams, clfm_fuse


def _as_batch(X):
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [check_feature_map(X)], True
    return [check_feature_map(x) for x in X], False


def _unbatch(maps, single):
    return maps[0] if single else maps


class ShiftRegistrar(BaseEstimator, TransformerMixin):
    """Estimate a global shift from a visible/thermal pair and undo it.

    Parameters
    ----------
    search_radius : float, default=4.0
        Half-width of the square offset search window, in pixels.
    coarse_step : float, default=0.5
        Spacing of the coarse offset grid.

    Attributes
    ----------
    shift_ : tuple of float
        Displacement of the thermal content relative to the visible content.
    """

    def __init__(self, search_radius=4.0, coarse_step=0.5):
        self.search_radius = search_radius
        self.coarse_step = coarse_step

    def fit(self, X, y):
        self.shift_ = recover_shift(X, y, self.search_radius, self.coarse_step)
        return self

    def transform(self, X):
        check_is_fitted(self, "shift_")
        maps, single = _as_batch(X)
        dx, dy = self.shift_
        out = [grid_sample(m, OffsetField.constant(-dx, -dy, m.shape[1:])) for m in maps]
        return _unbatch(out, single)


class ScaleRefiner(BaseEstimator, TransformerMixin):
    """Multi-dilation gated refinement with seeded Gaussian weights."""

    def __init__(self, dilations=(1, 2, 3), sigma=0.1, random_state=None):
        self.dilations = dilations
        self.sigma = sigma
        self.random_state = random_state

    def fit(self, X, y=None):
        maps, _ = _as_batch(X)
        rng = np.random.default_rng(self.random_state)
        self.params_ = DsrParams.random(maps[0].shape[0], rng, self.sigma, tuple(self.dilations))
        self.n_channels_ = maps[0].shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        maps, single = _as_batch(X)
        return _unbatch([dsr_refine(m, self.params_) for m in maps], single)


class CrossLayerFuser(BaseEstimator):
    """Wavelet-domain fusion of coarse visible maps with fine thermal maps.

    ``fit(X, y)`` takes coarse visible maps ``X`` and thermal maps ``y`` to
    size the seeded parameters; ``transform(X, y)`` fuses matching pairs.
    """

    def __init__(self, sigma=0.1, random_state=None):
        self.sigma = sigma
        self.random_state = random_state

    def fit(self, X, y):
        vis, _ = _as_batch(X)
        thr, _ = _as_batch(y)
        rng = np.random.default_rng(self.random_state)
        self.params_ = ClfmParams.random(thr[0].shape[0], rng, self.sigma, vis[0].shape[0])
        return self

    def transform(self, X, y):
        check_is_fitted(self, "params_")
        vis, single = _as_batch(X)
        thr, _ = _as_batch(y)
        if len(vis) != len(thr):
            raise ValueError(f"{len(vis)} visible maps but {len(thr)} thermal maps")
        return _unbatch([clfm_fuse(v, t, self.params_) for v, t in zip(vis, thr)], single)

    def fit_transform(self, X, y):
        return self.fit(X, y).transform(X, y)


class GeoShapeAssigner(BaseEstimator):
    """Dual-calculation label assignment against a fitted set of GT boxes.

    ``fit`` stores the GT boxes; ``predict`` labels anchor boxes (optionally
    with their current predictions) and ``score_samples`` returns the best
    dual score per anchor.
    """

    def __init__(self, gamma=2.0, beta=1.0, tau=0.5, metric="geoshape"):
        self.gamma = gamma
        self.beta = beta
        self.tau = tau
        self.metric = metric

    def fit(self, X, y=None):
        self.gts_ = check_boxes(X, "gts")
        return self

    def _assign(self, X, preds):
        check_is_fitted(self, "gts_")
        anchors = check_boxes(X, "anchors")
        preds = anchors if preds is None else preds
        params = GeoShapeParams(self.gamma, self.beta)
        return assign_labels(anchors, preds, self.gts_, params, self.tau, self.metric)

    def predict(self, X, preds=None):
        return self._assign(X, preds).labels

    def score_samples(self, X, preds=None):
        return self._assign(X, preds).scores
