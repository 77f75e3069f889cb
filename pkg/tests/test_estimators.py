import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rgbtfuse.align import dsr_refine
from rgbtfuse.assign import assign_labels
from rgbtfuse.estimators import CrossLayerFuser, GeoShapeAssigner, ScaleRefiner, ShiftRegistrar
from rgbtfuse.harness import SceneConfig, gen_scene

SMALL = dict(width=32, height=32, num_objects=2, object_size=(5.0, 8.0), channels=2)


class TestShiftRegistrar:
    def test_fit_transform_aligns(self):
        scene = gen_scene(SceneConfig(seed=1, true_shift=(2.0, 1.0), **SMALL))
        reg = ShiftRegistrar().fit(scene.visible, scene.thermal)
        assert np.hypot(reg.shift_[0] - 2.0, reg.shift_[1] - 1.0) < 0.25
        aligned = reg.transform(scene.visible)
        before = np.mean((scene.visible - scene.thermal) ** 2)
        assert np.mean((aligned - scene.thermal)[:, 3:-3, 3:-3] ** 2) < 1e-3 * before

    def test_batch_input(self):
        scene = gen_scene(SceneConfig(seed=2, **SMALL))
        out = ShiftRegistrar().fit(scene.visible, scene.thermal).transform([scene.visible, scene.thermal])
        assert isinstance(out, list) and len(out) == 2
        np.testing.assert_array_equal(out[0], scene.visible)

    def test_params_and_clone(self):
        reg = ShiftRegistrar(search_radius=2.0, coarse_step=0.25)
        assert reg.get_params() == {"search_radius": 2.0, "coarse_step": 0.25}
        assert clone(reg).set_params(coarse_step=1.0).coarse_step == 1.0

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            ShiftRegistrar().transform(np.zeros((1, 4, 4)))


class TestScaleRefiner:
    def test_seeded_and_matches_kernel(self):
        x = np.random.default_rng(0).normal(size=(2, 6, 6))
        a = ScaleRefiner(random_state=3).fit(x)
        b = ScaleRefiner(random_state=3).fit(x)
        np.testing.assert_array_equal(a.transform(x), b.transform(x))
        np.testing.assert_array_equal(a.transform(x), dsr_refine(x, a.params_))
        assert a.n_channels_ == 2 and len(a.params_.branches) == 3

    def test_custom_dilations(self):
        x = np.zeros((3, 8, 8))
        est = ScaleRefiner(dilations=(1, 4), random_state=0).fit(x)
        assert [b.dilation for b in est.params_.branches] == [1, 4]
        assert est.fit_transform(x).shape == x.shape

    def test_get_params(self):
        assert ScaleRefiner().get_params() == {"dilations": (1, 2, 3), "sigma": 0.1, "random_state": None}


class TestCrossLayerFuser:
    def test_shapes(self):
        r = np.random.default_rng(1)
        coarse, fine = r.normal(size=(4, 3, 3)), r.normal(size=(2, 6, 6))
        fuser = CrossLayerFuser(random_state=0)
        out = fuser.fit_transform(coarse, fine)
        assert out.shape == (2, 6, 6)
        batch = fuser.transform([coarse, coarse], [fine, fine])
        np.testing.assert_array_equal(batch[1], out)

    def test_length_mismatch(self):
        r = np.random.default_rng(2)
        fuser = CrossLayerFuser(random_state=0).fit(r.normal(size=(2, 3, 3)), r.normal(size=(2, 6, 6)))
        with pytest.raises(ValueError):
            fuser.transform([r.normal(size=(2, 3, 3))], [r.normal(size=(2, 6, 6))] * 2)


class TestGeoShapeAssigner:
    def test_matches_function(self):
        r = np.random.default_rng(5)
        gts = np.column_stack([r.uniform(0, 20, (3, 2)), r.uniform(2, 6, (3, 2))])
        anchors = np.column_stack([r.uniform(0, 20, (10, 2)), r.uniform(2, 6, (10, 2))])
        preds = anchors + r.normal(scale=0.5, size=anchors.shape) * [1, 1, 0, 0]
        est = GeoShapeAssigner(tau=0.3).fit(gts)
        want = assign_labels(anchors, preds, gts, tau=0.3)
        np.testing.assert_array_equal(est.predict(anchors, preds), want.labels)
        np.testing.assert_array_equal(est.score_samples(anchors, preds), want.scores)

    def test_anchor_equal_to_gt(self):
        gts = np.array([[5.0, 5.0, 4.0, 4.0]])
        est = GeoShapeAssigner().fit(gts)
        assert est.predict(gts).tolist() == [0] and est.score_samples(gts).tolist() == [1.0]

    def test_unknown_metric(self):
        est = GeoShapeAssigner(metric="siwd").fit(np.array([[0.0, 0.0, 1.0, 1.0]]))
        with pytest.raises(ValueError):
            est.predict(np.array([[0.0, 0.0, 1.0, 1.0]]))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            GeoShapeAssigner().predict(np.zeros((1, 4)) + 1)
