import json

import numpy as np
import pytest

from rgbtfuse.align import OffsetField, grid_sample
from rgbtfuse.exceptions import ConfigError, DegenerateSceneError, PlacementError
from rgbtfuse.harness import RunConfig, SceneConfig, assign_bench, gen_scene, load_config, recover_shift, run_pipeline
from rgbtfuse.harness.bench import format_json, format_table
from rgbtfuse.harness.pipeline import anchor_grid, avg_pool, pseudo_predictions

from oracles import spearman_rho

SMALL = dict(width=32, height=32, num_objects=2, object_size=(5.0, 8.0), channels=3)


def integer_shift(seed):
    r = np.random.default_rng([seed, 7])
    return tuple(float(v) for v in r.integers(-3, 4, size=2))


class TestSceneConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(width=31),
        dict(height=0),
        dict(true_shift=(6.0, 6.0)),
        dict(object_size=(50.0, 70.0)),
        dict(object_size=(5.0, 3.0)),
        dict(noise_sigma=-0.1),
        dict(noise_sigma=(0.1, -0.1)),
        dict(num_objects=0),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SceneConfig(**kwargs)

    def test_per_modality_noise(self):
        assert SceneConfig(noise_sigma=(0.1, 0.2)).noise_sigmas == (0.1, 0.2)
        assert SceneConfig(noise_sigma=0.3).noise_sigmas == (0.3, 0.3)


class TestGenScene:
    def test_deterministic(self):
        cfg = SceneConfig(seed=5, true_shift=(1.5, -0.5), noise_sigma=0.1, **SMALL)
        a, b = gen_scene(cfg), gen_scene(cfg)
        assert a.visible.tobytes() == b.visible.tobytes()
        assert a.thermal.tobytes() == b.thermal.tobytes()
        np.testing.assert_array_equal(a.gts, b.gts)

    def test_seeds_differ(self):
        a = gen_scene(SceneConfig(seed=1, **SMALL))
        b = gen_scene(SceneConfig(seed=2, **SMALL))
        assert not np.array_equal(a.visible, b.visible)

    def test_noise_free_aligned_is_identical(self):
        scene = gen_scene(SceneConfig(seed=3, **SMALL))
        np.testing.assert_array_equal(scene.visible, scene.thermal)

    def test_shift_is_a_sampling_identity(self):
        scene = gen_scene(SceneConfig(seed=4, true_shift=(2.0, 0.0), **SMALL))
        want = grid_sample(scene.content, OffsetField.constant(-2.0, 0.0, scene.content.shape[1:]))
        assert np.max(np.abs(scene.thermal[:, :, 2:-2] - want[:, :, 2:-2])) < 1e-10

    def test_gts_follow_thermal_content(self):
        scene = gen_scene(SceneConfig(seed=6, true_shift=(3.0, -2.0), num_objects=1, **{k: v for k, v in SMALL.items() if k != "num_objects"}))
        cx, cy = scene.gts[0, :2]
        peak = np.unravel_index(np.argmax(scene.thermal[0]), scene.thermal.shape[1:])
        assert abs(peak[1] - cx) <= 1 and abs(peak[0] - cy) <= 1

    def test_shape_and_channels(self):
        scene = gen_scene(SceneConfig(seed=0, **SMALL))
        assert scene.visible.shape == scene.thermal.shape == (3, 32, 32)
        assert scene.gts.shape == (2, 4)

    def test_placement_failure(self):
        cfg = SceneConfig(width=16, height=16, num_objects=40, object_size=(6.0, 6.0))
        with pytest.raises(PlacementError):
            gen_scene(cfg)


class TestRecoverShift:
    def test_identical_is_exact_zero(self):
        scene = gen_scene(SceneConfig(seed=8, **SMALL))
        assert recover_shift(scene.visible, scene.thermal) == (0.0, 0.0)

    def test_known_shift(self):
        scene = gen_scene(SceneConfig(seed=9, true_shift=(2.0, -1.0), **SMALL))
        dx, dy = recover_shift(scene.visible, scene.thermal)
        assert abs(dx - 2.0) < 0.25 and abs(dy + 1.0) < 0.25

    def test_sub_pixel_shift(self):
        scene = gen_scene(SceneConfig(seed=10, true_shift=(0.7, 1.3), **SMALL))
        dx, dy = recover_shift(scene.visible, scene.thermal)
        assert np.hypot(dx - 0.7, dy - 1.3) < 0.25

    def test_degenerate(self):
        flat = np.full((2, 8, 8), 0.3)
        with pytest.raises(DegenerateSceneError):
            recover_shift(flat, flat.copy())

    def test_argument_validation(self):
        x = np.zeros((1, 4, 4))
        with pytest.raises(ValueError):
            recover_shift(x, x, search_radius=0.1, coarse_step=0.5)

    def test_error_grows_with_noise(self):
        levels = (0.0, 0.05, 0.2)
        noise, errors, means = [], [], []
        for sigma in levels:
            errs = []
            for seed in range(20):
                shift = integer_shift(seed)
                scene = gen_scene(SceneConfig(seed=seed, true_shift=shift, noise_sigma=sigma, **SMALL))
                dx, dy = recover_shift(scene.visible, scene.thermal)
                errs.append(np.hypot(dx - shift[0], dy - shift[1]))
            noise += [sigma] * len(errs)
            errors += errs
            means.append(np.mean(errs))
        assert spearman_rho(levels, means) > 0
        assert spearman_rho(noise, errors) > 0
        assert means[0] <= means[1] <= means[2]


class TestPipeline:
    def test_zero_shift_is_a_no_op(self):
        report = run_pipeline(RunConfig(scene=SceneConfig(seed=1, **SMALL)))
        assert report.recovered_shift == (0.0, 0.0)
        assert abs(report.region_kl_before - report.region_kl_after) <= 1e-10

    def test_alignment_reduces_kl(self):
        report = run_pipeline(RunConfig(scene=SceneConfig(seed=2, true_shift=(3.0, 0.0), **SMALL)))
        assert report.region_kl_after < report.region_kl_before
        assert report.shift_error < 0.25

    def test_report_json_is_byte_identical(self):
        cfg = RunConfig(scene=SceneConfig(seed=3, true_shift=(1.0, 2.0), noise_sigma=0.01, **SMALL))
        assert run_pipeline(cfg).to_json() == run_pipeline(cfg).to_json()

    def test_report_fields(self):
        cfg = RunConfig(scene=SceneConfig(seed=4, true_shift=(-1.0, 1.0), **SMALL), stride=2, lambda_kl=0.5)
        report = run_pipeline(cfg)
        data = json.loads(report.to_json())
        assert set(data["assignment_summary"]) == {"iou", "giou", "geoshape"}
        assert "timings" not in data and "timings" in json.loads(report.to_json(include_timings=True))
        assert len(data["region_kl_per_box_after"]) == cfg.scene.num_objects
        assert data["shift_error"] == pytest.approx(np.hypot(*np.subtract(data["recovered_shift"], data["true_shift"])))
        assert report.weighted_kl == pytest.approx(0.5 * report.region_kl_after)
        assert report.learned_offset_max_abs < cfg.max_disp

    def test_float_precision(self):
        report = run_pipeline(RunConfig(scene=SceneConfig(seed=5, true_shift=(0.5, 0.0), **SMALL)))
        value = json.loads(report.to_json())["region_kl_before"]
        assert value == float(f"{report.region_kl_before:.12g}")


class TestPipelineHelpers:
    def test_avg_pool(self):
        x = np.arange(16, dtype=float).reshape(1, 4, 4)
        np.testing.assert_array_equal(avg_pool(x, 2)[0], [[2.5, 4.5], [10.5, 12.5]])
        with pytest.raises(ValueError):
            avg_pool(np.zeros((1, 3, 4)), 2)

    def test_anchor_grid(self):
        anchors = anchor_grid(16, 24, 6.0)
        assert anchors.shape == (6, 4)
        np.testing.assert_array_equal(anchors[0], [4.0, 4.0, 6.0, 6.0])
        np.testing.assert_array_equal(anchors[-1], [20.0, 12.0, 6.0, 6.0])

    def test_pseudo_predictions_move_halfway(self):
        anchors = np.array([[0.0, 0.0, 4.0, 4.0], [10.0, 10.0, 4.0, 4.0]])
        gts = np.array([[2.0, 0.0, 6.0, 6.0], [10.0, 14.0, 2.0, 2.0]])
        np.testing.assert_array_equal(pseudo_predictions(anchors, gts), [[1, 0, 5, 5], [10, 12, 3, 3]])


class TestAssignBench:
    def test_hand_rows(self):
        rows = {(r["size"], r["shift"]): r for r in assign_bench([4], [0, 2])}
        assert rows[4, 0]["iou"] == 1.0 and rows[4, 0]["geoshape"] == 1.0
        assert rows[4, 2]["iou"] == pytest.approx(1 / 3, abs=1e-12)
        assert rows[4, 2]["geoshape"] == pytest.approx(np.exp(-(0.25 + 2 / 3)), abs=1e-10)

    def test_analytic_column_and_contrast(self):
        for row in assign_bench([2, 4, 8, 16], [0, 1, 2, 4, 8, 16, 24]):
            k, d = row["size"], row["shift"]
            if d <= k:
                assert abs(row["iou"] - (k - d) / (k + d)) < 1e-12
            else:
                assert row["iou_analytic"] is None
            if d >= k:
                assert row["iou"] == 0.0 and row["geoshape"] > 0

    def test_empty_lists(self):
        with pytest.raises(ValueError):
            assign_bench([], [1])

    def test_formatting(self):
        rows = assign_bench([2], [0, 4])
        table = format_table(rows).splitlines()
        assert table[0].split("\t")[:3] == ["size", "shift", "iou"] and len(table) == 3
        assert "-" in table[2].split("\t")
        assert json.loads(format_json(rows))[1]["iou_analytic"] is None


class TestConfig:
    def test_round_trip(self):
        cfg = RunConfig(scene=SceneConfig(seed=7, true_shift=(1.0, 0.0)), tau=0.4, lambda_kl=0.2)
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    def test_lambda_key(self):
        cfg = RunConfig.from_dict({"lambda": 0.3, "gamma": 1.5})
        assert cfg.lambda_kl == 0.3 and cfg.geoshape.gamma == 1.5

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="lambda_kl"):
            RunConfig.from_dict({"lambda_kl": 0.1})
        with pytest.raises(ConfigError, match="colour"):
            RunConfig.from_dict({"seed": 1, "colour": "red"})

    def test_invalid_value_becomes_config_error(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"width": 33})
        with pytest.raises(ConfigError):
            RunConfig.from_dict([1, 2])

    def test_load_config(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 2, "true_shift": [1, -1], "stride": 2}))
        cfg = load_config(path)
        assert cfg.scene.true_shift == (1.0, -1.0) and cfg.stride == 2
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)
