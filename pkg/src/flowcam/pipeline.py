"""End-to-end pipeline runner and the built-in camera parameter sets.

Wires the stages the way the sensor does per frame: frontend geometry, the
automatic OF down-scale, detection under the current contrast threshold,
tile budget, global cap, orientation and description, matching against the
previous frame, the ratio filter, and one controller update. Also provides
the benchmark scenarios and the throughput report with the hardware
frame-rate reference.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BoundsError, ConfigError, RangeError
from .feature_engine import (
    DetectorState,
    describe_corners,
    select_corners,
    update_threshold,
)
from .matcher import FlowVector, match_features, ratio_filter
from .scene_synth import (
    MotionSpec,
    TextureSpec,
    generate_texture,
    mean_ground_truth_flow,
    render_camera_sequence,
)
from .sensor_frontend import (
    FULL_HEIGHT,
    FULL_WIDTH,
    Frame,
    RATE_TABLE,
    SensorConfig,
    crop,
    downscale_for_of,
    max_frame_rate,
    subsample,
)
from .track_analyzer import (
    accuracy_metrics,
    link_tracks,
    mean_flow,
    redetect,
    track_stats,
    write_frame_report_csv,
    write_ground_truth_csv,
    write_summary_csv,
)
from .wire_format import encode, write_ofv

INITIAL_THRESHOLD = 20

# Vector-search window half-width; the datasheet parameter table does not
# publish one, 16 px covers every benchmark motion comfortably.
DEFAULT_MAX_DISPLACEMENT = 16

# The sensor transmits both Hamming scores and leaves ratio suppression to
# the consumer; the harness applies the usual 0.8 as that later step.
DEFAULT_RATIO_THRESHOLD = 0.8


def _pset(out_w, out_h, fps, target, cap, tile, crop_origin=None, factor=1):
    return SensorConfig(
        out_width=out_w,
        out_height=out_h,
        frame_rate=fps,
        brief_target=target,
        brief_max=cap,
        tile_budget=tile,
        max_displacement=DEFAULT_MAX_DISPLACEMENT,
        ratio_threshold=DEFAULT_RATIO_THRESHOLD,
        crop_origin=crop_origin,
        subsample_factor=factor,
        subsample_mode="decimate",
    )

PARAMETER_SETS: dict[int, SensorConfig] = {
    1: _pset(1124, 1364, 60, 1536, 2048, 2),
    2: _pset(1120, 1344, 60, 1536, 2048, 2, crop_origin=(0, 0)),
    3: _pset(640, 480, 140, 768, 1024, 4, crop_origin=(240, 432)),
    4: _pset(560, 672, 140, 768, 1024, 4, crop_origin=(280, 336)),
    5: _pset(560, 672, 140, 768, 1024, 4, factor=2),
    6: _pset(272, 336, 240, 384, 512, 8, crop_origin=(420, 504)),
    7: _pset(280, 336, 240, 384, 512, 8, factor=4),
}

SCENARIOS = ("translate-easy", "translate-hard", "zoom", "rotate", "still")

_SCENARIO_TEXTURE = {
    "translate-easy": "blocks",
    "translate-hard": "foliage",
    "zoom": "blocks",
    "rotate": "wheel",
    "still": "blocks",
}

DEFAULT_SPEED_PX_S = 420.0  # translation speed in full-sensor px/s
DEFAULT_OMEGA_DEG_FRAME = 2.0
DEFAULT_ZOOM_RATE_FRAME = 1.002


@dataclass
class RunReport:
    """Timing and outcome summary of one pipeline run."""

    n_frames: int
    stage_us: dict[str, float]  # mean microseconds per frame, per stage
    throughput_fps: float
    of_width: int
    of_height: int
    of_scale: int
    vectors_per_frame: list[int]
    produced_per_frame: list[int]
    thresholds: list[int]
    summary: dict = field(default_factory=dict)
    hw_reference: float | None = None
    hw_model_fps: float | None = None
    ofv_path: Path | None = None
    frames_csv: Path | None = None
    summary_csv: Path | None = None

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.stage_us.values()) or self.throughput_fps < 0:
            raise RangeError("timings must be non-negative")

    @property
    def total_us_per_frame(self) -> float:
        return sum(self.stage_us.values())


def frontend_apply(frame: Frame, config: SensorConfig) -> Frame:
    """Reduce an input frame to the configured recorded geometry.

    Frames already at the output size pass through; full-sensor frames get
    the configured crop and sub-sampling. Anything else is a mismatch.
    """
    out_size = (config.out_width, config.out_height)
    if (frame.width, frame.height) == out_size:
        return frame
    result = frame
    try:
        if config.crop_origin is not None:
            size = (config.out_width * config.subsample_factor,
                    config.out_height * config.subsample_factor)
            result = crop(result, config.crop_origin, size)
        if config.subsample_factor > 1:
            result = subsample(result, config.subsample_factor, config.subsample_mode)
        elif config.crop_origin is None:
            raise ConfigError(
                f"frame {frame.width}x{frame.height} does not match configured "
                f"output {config.out_width}x{config.out_height} and no "
                f"crop/sub-sample is set"
            )
    except BoundsError as exc:
        raise ConfigError(
            f"frame {frame.width}x{frame.height} cannot supply the configured "
            f"geometry: {exc}"
        ) from exc
    if (result.width, result.height) != out_size:
        raise ConfigError(
            f"frontend produced {result.width}x{result.height}, configured output "
            f"is {config.out_width}x{config.out_height}"
        )
    return result


def of_scale_for(config: SensorConfig) -> int:
    """Down-scale factor the OF unit applies to this configuration's frames."""
    w, h = config.out_width, config.out_height
    return 2 if (max(w, h) > 640 or min(w, h) > 480) else 1


def run_pipeline(
    config: SensorConfig,
    frames: list[Frame],
    initial_threshold: int = INITIAL_THRESHOLD,
) -> tuple[list[list[FlowVector]], RunReport]:
    """Run the full per-frame pipeline over a frame sequence.

    Returns the flow vectors per frame (entry t holds vectors from frame t-1
    to t; entry 0 is empty) and a report with per-stage timings. The
    controller consumes the post-cap descriptor count and updates once per
    frame; frame 0 only seeds features.
    """
    if len(frames) < 2:
        raise ConfigError("need at least 2 frames")
    state = DetectorState(
        initial_threshold, config.brief_target, config.brief_max, config.tile_budget
    )
    stage_ns = {"frontend": 0, "detect": 0, "describe": 0, "match": 0, "encode": 0}
    per_frame_vectors: list[list[FlowVector]] = []
    vectors_per_frame: list[int] = []
    produced_per_frame: list[int] = []
    thresholds: list[int] = []
    prev_features = None
    of_size = None

    for i, frame in enumerate(frames):
        t0 = time.perf_counter_ns()
        recorded = frontend_apply(frame, config)
        of_frame, scale = downscale_for_of(recorded)
        t1 = time.perf_counter_ns()
        corners = select_corners(of_frame, state)
        t2 = time.perf_counter_ns()
        features = describe_corners(of_frame, corners)
        produced = len(features)
        t3 = time.perf_counter_ns()
        if i == 0 or prev_features is None:
            vectors: list[FlowVector] = []
        else:
            vectors = match_features(prev_features, features, config.max_displacement)
            vectors = ratio_filter(vectors, config.ratio_threshold)
        t4 = time.perf_counter_ns()
        encode(vectors)
        t5 = time.perf_counter_ns()

        stage_ns["frontend"] += t1 - t0
        stage_ns["detect"] += t2 - t1
        stage_ns["describe"] += t3 - t2
        stage_ns["match"] += t4 - t3
        stage_ns["encode"] += t5 - t4

        thresholds.append(state.threshold)
        state = update_threshold(state, produced)
        produced_per_frame.append(produced)
        vectors_per_frame.append(len(vectors))
        per_frame_vectors.append(vectors)
        prev_features = features
        of_size = (of_frame.width, of_frame.height, scale)

    n = len(frames)
    total_s = sum(stage_ns.values()) / 1e9
    report = RunReport(
        n_frames=n,
        stage_us={k: v / n / 1000.0 for k, v in stage_ns.items()},
        throughput_fps=n / total_s if total_s > 0 else 0.0,
        of_width=of_size[0],
        of_height=of_size[1],
        of_scale=of_size[2],
        vectors_per_frame=vectors_per_frame,
        produced_per_frame=produced_per_frame,
        thresholds=thresholds,
    )
    return per_frame_vectors, report


# ---------------------------------------------------------------------------
# Scenario synthesis
# ---------------------------------------------------------------------------

def synthesize_sequence(
    config: SensorConfig,
    scenario: str,
    n_frames: int,
    seed: int = 0,
    speed_px_s: float = DEFAULT_SPEED_PX_S,
    omega_deg_frame: float = DEFAULT_OMEGA_DEG_FRAME,
    zoom_rate_frame: float = DEFAULT_ZOOM_RATE_FRAME,
) -> tuple[list[Frame], list[tuple[float, float]]]:
    """Render the recorded-resolution frames a configuration would capture.

    The scene lives in full-sensor coordinates so different configurations
    observe the same physical motion; translation speed is given in
    full-sensor pixels per second, rotation and zoom per frame. Returns the
    frames plus the per-frame mean ground-truth flow in OF-unit pixels.
    """
    if scenario not in SCENARIOS:
        raise RangeError(f"unknown scenario {scenario!r}")
    stride = config.subsample_factor
    origin = config.crop_origin if config.crop_origin is not None else (0, 0)
    viewport = (config.out_width, config.out_height)
    fov = (FULL_WIDTH, FULL_HEIGHT)

    fov_center = ((fov[0] - 1) / 2, (fov[1] - 1) / 2)
    if scenario.startswith("translate"):
        per_frame = speed_px_s / config.frame_rate
        motion = MotionSpec("translate", velocity=(per_frame, 0.0))
        # centered viewport: either side must absorb the whole drift
        drift = int(math.ceil(per_frame * (n_frames - 1)))
        tex_size = (
            max(2 * fov[0], fov[0] + 2 * drift + 8),
            2 * fov[1],
        )
    elif scenario == "rotate":
        motion = MotionSpec(
            "rotate", omega=math.radians(omega_deg_frame), center=fov_center
        )
        side = int(math.ceil(math.hypot(*fov))) + 8
        tex_size = (side, side)
    elif scenario == "zoom":
        motion = MotionSpec("zoom", rate=zoom_rate_frame, center=fov_center)
        side = int(math.ceil(math.hypot(*fov))) + 8
        tex_size = (side, side)
    else:
        motion = MotionSpec("still")
        tex_size = (fov[0] + 8, fov[1] + 8)

    texture = generate_texture(TextureSpec(_SCENARIO_TEXTURE[scenario], seed, tex_size))
    frames = render_camera_sequence(
        texture, motion, n_frames, viewport,
        fov=fov, window_origin=origin, stride=stride,
        frame_rate=config.frame_rate,
    )
    of_units = stride * of_scale_for(config)
    gt_fov = mean_ground_truth_flow(motion)
    gt = [(0.0, 0.0)]
    gt += [(gt_fov[0] / of_units, gt_fov[1] / of_units)] * (n_frames - 1)
    return frames, gt


def run_parameter_set(
    set_id: int,
    scenario: str,
    duration_s: float,
    *,
    n_frames: int | None = None,
    seed: int = 0,
    out_dir: str | Path | None = None,
    speed_px_s: float = DEFAULT_SPEED_PX_S,
    omega_deg_frame: float = DEFAULT_OMEGA_DEG_FRAME,
    zoom_rate_frame: float = DEFAULT_ZOOM_RATE_FRAME,
    initial_threshold: int = INITIAL_THRESHOLD,
) -> tuple[list[list[FlowVector]], RunReport]:
    """Generate the benchmark sequence for one built-in set and run it."""
    if set_id not in PARAMETER_SETS:
        raise RangeError(f"parameter set must be 1..7, got {set_id}")
    config = PARAMETER_SETS[set_id]
    if n_frames is None:
        n_frames = round(config.frame_rate * duration_s)
    frames, gt = synthesize_sequence(
        config, scenario, n_frames, seed=seed, speed_px_s=speed_px_s,
        omega_deg_frame=omega_deg_frame, zoom_rate_frame=zoom_rate_frame,
    )
    vectors, report = run_pipeline(config, frames, initial_threshold)
    finalize_report(vectors, report, gt, out_dir, name=f"set{set_id}_{scenario}")
    return vectors, report


def finalize_report(
    per_frame_vectors: list[list[FlowVector]],
    report: RunReport,
    ground_truth: list[tuple[float, float]] | None,
    out_dir: str | Path | None,
    name: str = "run",
    redetect_max_gap: int = 4,
    redetect_radius: int = 1,
) -> None:
    """Attach accuracy/track summaries to a report and write output files."""
    est = [mean_flow(v) for v in per_frame_vectors]
    tracks = redetect(
        link_tracks(per_frame_vectors), redetect_max_gap, redetect_radius
    )
    report.summary.update(track_stats(tracks))
    accuracy = None
    if ground_truth is not None:
        accuracy = accuracy_metrics(est, ground_truth)
        report.summary.update(
            rmse_x=accuracy.rmse_x,
            rmse_y=accuracy.rmse_y,
            final_rel_err=accuracy.final_rel_err,
            no_data_frames=len(accuracy.no_data_frames),
        )
    if out_dir is None:
        return
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.ofv_path = out_dir / f"{name}.ofv"
    write_ofv(report.ofv_path, report.of_width, report.of_height, per_frame_vectors)
    report.summary_csv = out_dir / f"{name}_summary.csv"
    write_summary_csv(report.summary_csv, accuracy, tracks)
    if ground_truth is not None and accuracy is not None:
        report.frames_csv = out_dir / f"{name}_frames.csv"
        write_frame_report_csv(report.frames_csv, est, ground_truth, accuracy)
        write_ground_truth_csv(out_dir / f"{name}_gt.csv", ground_truth)


# ---------------------------------------------------------------------------
# Throughput
# ---------------------------------------------------------------------------

def hardware_reference(frame_height: int, n_vectors: int) -> float | None:
    """Datasheet frame rate at the nearest documented operating point.

    Only exact table heights have a reference; the vector budget is rounded
    down to the closest documented row. None means no documented point.
    """
    rows = [p for p in RATE_TABLE if p.frame_height == frame_height]
    if not rows:
        return None
    eligible = [p for p in rows if p.n_vectors <= n_vectors]
    if not eligible:
        return None
    return float(max(eligible, key=lambda p: p.n_vectors).max_fps)


def throughput_report(
    config: SensorConfig,
    frames: list[Frame],
    initial_threshold: int = INITIAL_THRESHOLD,
) -> RunReport:
    """Measure software throughput and attach the hardware reference.

    The software numbers make no claim of matching the sensor; the reference
    is printed for context only.
    """
    if len(frames) < 50:
        raise RangeError(f"need at least 50 frames for stable timing, got {len(frames)}")
    vectors, report = run_pipeline(config, frames, initial_threshold)
    report.summary.update(track_stats(link_tracks(vectors)))
    report.hw_reference = hardware_reference(config.out_height, config.brief_target)
    try:
        report.hw_model_fps = max_frame_rate(config.out_height, config.brief_target)
    except RangeError:
        report.hw_model_fps = None
    return report
