import numpy as np
import pytest

from flowcam.errors import ConfigError, RangeError
from flowcam.pipeline import (
    PARAMETER_SETS,
    frontend_apply,
    hardware_reference,
    of_scale_for,
    run_parameter_set,
    run_pipeline,
    synthesize_sequence,
    throughput_report,
)
from flowcam.scene_synth import MotionSpec, TextureSpec, generate_texture, render_sequence
from flowcam.sensor_frontend import Frame, SensorConfig, load_config, save_config


def small_config(**overrides):
    base = dict(
        out_width=160, out_height=120, frame_rate=60, brief_target=64,
        brief_max=256, tile_budget=4, max_displacement=8, ratio_threshold=0.8,
    )
    base.update(overrides)
    return SensorConfig(**base)


def still_frames(n=4, size=(160, 120), seed=0):
    tex = generate_texture(TextureSpec("blocks", seed, (2 * size[0], 2 * size[1])))
    return render_sequence(tex, MotionSpec("still"), n, size)


class TestParameterSets:
    # (id, width, height, crop, factor, fps, target, cap, tile)
    TABLE = [
        (1, 1124, 1364, None, 1, 60, 1536, 2048, 2),
        (2, 1120, 1344, (0, 0), 1, 60, 1536, 2048, 2),
        (3, 640, 480, (240, 432), 1, 140, 768, 1024, 4),
        (4, 560, 672, (280, 336), 1, 140, 768, 1024, 4),
        (5, 560, 672, None, 2, 140, 768, 1024, 4),
        (6, 272, 336, (420, 504), 1, 240, 384, 512, 8),
        (7, 280, 336, None, 4, 240, 384, 512, 8),
    ]

    @pytest.mark.parametrize("row", TABLE, ids=[f"set{r[0]}" for r in TABLE])
    def test_catalog_matches_documented_settings(self, row):
        sid, w, h, crop, factor, fps, target, cap, tile = row
        cfg = PARAMETER_SETS[sid]
        assert (cfg.out_width, cfg.out_height) == (w, h)
        assert cfg.crop_origin == crop
        assert cfg.subsample_factor == factor
        assert cfg.frame_rate == fps
        assert cfg.brief_target == target
        assert cfg.brief_max == cap
        assert cfg.tile_budget == tile

    @pytest.mark.parametrize("sid", list(PARAMETER_SETS))
    def test_round_trip_through_config_file(self, sid, tmp_path):
        cfg = PARAMETER_SETS[sid]
        path = tmp_path / f"set{sid}.cfg"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_ten_second_frame_counts(self):
        assert round(PARAMETER_SETS[1].frame_rate * 10) == 600
        assert round(PARAMETER_SETS[6].frame_rate * 10) == 2400


class TestFrontendApply:
    def test_pass_through_at_output_size(self):
        cfg = PARAMETER_SETS[4]
        frame = Frame.from_array(
            np.zeros((cfg.out_height, cfg.out_width), dtype=np.uint8)
        )
        assert frontend_apply(frame, cfg) is frame

    def test_full_sensor_cropped(self):
        rng = np.random.default_rng(0)
        full = Frame.from_array(rng.integers(0, 256, size=(1364, 1124), dtype=np.uint8))
        cfg = PARAMETER_SETS[4]
        out = frontend_apply(full, cfg)
        assert (out.width, out.height) == (560, 672)
        assert out.pixel(0, 0) == full.pixel(280, 336)

    def test_full_sensor_subsampled(self):
        rng = np.random.default_rng(1)
        full = Frame.from_array(rng.integers(0, 256, size=(1364, 1124), dtype=np.uint8))
        out = frontend_apply(full, PARAMETER_SETS[5])
        assert (out.width, out.height) == (560, 672)
        assert out.pixel(0, 0) == full.pixel(0, 0)  # decimation keeps (0, 0)
        out7 = frontend_apply(full, PARAMETER_SETS[7])
        assert (out7.width, out7.height) == (280, 336)

    def test_dimension_mismatch_rejected(self):
        frame = Frame.from_array(np.zeros((100, 100), dtype=np.uint8))
        with pytest.raises(ConfigError):
            frontend_apply(frame, PARAMETER_SETS[3])


class TestOfScale:
    @pytest.mark.parametrize(
        "sid,scale", [(1, 2), (2, 2), (3, 1), (4, 2), (5, 2), (6, 1), (7, 1)]
    )
    def test_catalog_scales(self, sid, scale):
        assert of_scale_for(PARAMETER_SETS[sid]) == scale


class TestRunPipeline:
    def test_static_two_frames_all_zero_vectors(self):
        cfg = small_config()
        frames = still_frames(2)
        vectors, report = run_pipeline(cfg, frames)
        assert vectors[0] == []
        assert len(vectors[1]) > 0
        assert all(v.dx == 0 and v.dy == 0 and v.best_score == 0 for v in vectors[1])

    def test_needs_two_frames(self):
        with pytest.raises(ConfigError):
            run_pipeline(small_config(), still_frames(1))

    def test_vector_count_never_exceeds_cap(self):
        cfg = small_config(brief_max=32, brief_target=16)
        vectors, report = run_pipeline(cfg, still_frames(5))
        assert all(n <= cfg.brief_max for n in report.vectors_per_frame)
        assert all(n <= cfg.brief_max for n in report.produced_per_frame)

    def test_determinism(self):
        cfg = small_config()
        frames = still_frames(5, seed=2)
        v1, _ = run_pipeline(cfg, frames)
        v2, _ = run_pipeline(cfg, frames)
        assert v1 == v2

    def test_timings_non_negative_and_complete(self):
        _, report = run_pipeline(small_config(), still_frames(3))
        assert set(report.stage_us) == {"frontend", "detect", "describe", "match", "encode"}
        assert all(v >= 0 for v in report.stage_us.values())
        assert report.throughput_fps > 0

    def test_set6_still_converges_to_target(self):
        # 240-frame standstill run: the vector count settles within 10 percent
        # of the 384-descriptor target.
        vectors, report = run_parameter_set(6, "still", 1.0, seed=3)
        assert report.n_frames == 240
        counts = np.array(report.vectors_per_frame[20:])
        assert np.all(np.abs(counts - 384) <= 0.1 * 384)

    def test_set3_translation_tracks_ground_truth(self):
        from flowcam.track_analyzer import mean_flow

        vectors, report = run_parameter_set(
            3, "translate-easy", 0.0, n_frames=80, seed=0, speed_px_s=420.0
        )
        flows = [mean_flow(v) for v in vectors[21:]]
        assert all(f is not None for f in flows)
        assert all(abs(f[0] - 3.0) <= 0.25 and abs(f[1]) <= 0.25 for f in flows)

    def test_translate_hard_report_has_final_rel_err(self):
        vectors, report = run_parameter_set(
            3, "translate-hard", 0.0, n_frames=30, seed=0
        )
        assert "final_rel_err" in report.summary


class TestSynthesizeSequence:
    def test_frame_counts_follow_rate(self):
        vectors, report = run_parameter_set(6, "still", 0.1, seed=0)
        assert report.n_frames == round(240 * 0.1)

    def test_ground_truth_in_of_units(self):
        cfg = PARAMETER_SETS[5]  # 2x record subsample, 2x OF downscale
        frames, gt = synthesize_sequence(cfg, "translate-easy", 3, seed=0,
                                         speed_px_s=560.0)
        assert gt[0] == (0.0, 0.0)
        assert gt[1] == (560.0 / 140.0 / 4.0, 0.0)

    def test_unknown_scenario_rejected(self):
        with pytest.raises(RangeError):
            synthesize_sequence(PARAMETER_SETS[6], "warp", 3)

    def test_same_seed_same_frames(self):
        cfg = PARAMETER_SETS[6]
        a, _ = synthesize_sequence(cfg, "translate-easy", 3, seed=5)
        b, _ = synthesize_sequence(cfg, "translate-easy", 3, seed=5)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.pixels, fb.pixels)


class TestThroughput:
    def test_hardware_reference_exact_rows(self):
        assert hardware_reference(480, 1024) == 205
        assert hardware_reference(1364, 2048) == 80

    def test_hardware_reference_floors_vector_budget(self):
        assert hardware_reference(1364, 1536) == 84

    def test_hardware_reference_missing_points(self):
        assert hardware_reference(672, 768) is None
        assert hardware_reference(336, 384) is None
        assert hardware_reference(240, 500) is None

    def test_needs_fifty_frames(self):
        with pytest.raises(RangeError):
            throughput_report(small_config(), still_frames(10))

    def test_report_fields(self):
        cfg = small_config()
        report = throughput_report(cfg, still_frames(50))
        assert report.n_frames == 50
        assert report.total_us_per_frame > 0
        assert report.hw_reference is None  # 120-px frame height not documented
        assert report.hw_model_fps is None  # below the rate-model height range
