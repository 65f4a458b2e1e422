"""Command-line harness: sequence generation, pipeline runs, benchmarks.

Subcommands: `gen` renders a synthetic sequence to PGM files, `run` drives
the pipeline over a sequence or a generated scenario and writes the .ofv
stream plus report CSVs, `bench` measures throughput next to the hardware
reference, `tracks` analyzes a stored .ofv stream, `report` compares a
stream against a ground-truth CSV.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .errors import FlowcamError
from .pipeline import (
    DEFAULT_OMEGA_DEG_FRAME,
    DEFAULT_SPEED_PX_S,
    DEFAULT_ZOOM_RATE_FRAME,
    INITIAL_THRESHOLD,
    PARAMETER_SETS,
    SCENARIOS,
    finalize_report,
    of_scale_for,
    run_pipeline,
    synthesize_sequence,
    throughput_report,
)
from .scene_synth import (
    MOTION_KINDS,
    MotionSpec,
    TEXTURE_KINDS,
    TextureSpec,
    generate_texture,
    load_sequence,
    mean_ground_truth_flow,
    render_sequence,
    save_sequence,
)
from .sensor_frontend import SensorConfig, load_config
from .track_analyzer import (
    accuracy_metrics,
    link_tracks,
    mean_flow,
    read_ground_truth_csv,
    redetect,
    track_stats,
    write_frame_report_csv,
    write_summary_csv,
)
from .wire_format import read_ofv


def _size(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _pair(text: str) -> tuple[float, float]:
    x, _, y = text.partition(",")
    return float(x), float(y)


def _resolve_config(args) -> SensorConfig:
    if getattr(args, "param_set", None) is not None:
        if args.param_set not in PARAMETER_SETS:
            raise FlowcamError(f"--param-set must be 1..7, got {args.param_set}")
        config = PARAMETER_SETS[args.param_set]
    elif getattr(args, "config", None):
        config = load_config(args.config)
    else:
        raise FlowcamError("one of --param-set or --config is required")
    overrides = {}
    if getattr(args, "max_displacement", None) is not None:
        overrides["max_displacement"] = args.max_displacement
    if getattr(args, "ratio_threshold", None) is not None:
        overrides["ratio_threshold"] = args.ratio_threshold
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    return config


def cmd_gen(args) -> int:
    viewport = _size(args.viewport)
    tex_size = _size(args.texture_size) if args.texture_size else (
        2 * viewport[0], 2 * viewport[1]
    )
    center = ((viewport[0] - 1) / 2, (viewport[1] - 1) / 2)
    motion = MotionSpec(
        args.motion,
        velocity=_pair(args.velocity),
        rate=args.zoom_rate,
        omega=math.radians(args.omega_deg),
        center=center,
    )
    texture = generate_texture(TextureSpec(args.texture, args.seed, tex_size))
    frames = render_sequence(texture, motion, args.frames, viewport)
    dummy = SensorConfig(
        out_width=viewport[0], out_height=viewport[1], frame_rate=args.frame_rate,
        brief_target=1, brief_max=1, tile_budget=2, max_displacement=1,
    )
    scale = of_scale_for(dummy)
    gt_view = mean_ground_truth_flow(motion)
    gt = [(0.0, 0.0)] + [(gt_view[0] / scale, gt_view[1] / scale)] * (args.frames - 1)
    manifest = {
        "texture": args.texture,
        "seed": args.seed,
        "texture_size": f"{tex_size[0]}x{tex_size[1]}",
        "motion": args.motion,
        "velocity": f"{motion.velocity[0]},{motion.velocity[1]}",
        "omega_deg": args.omega_deg,
        "zoom_rate": args.zoom_rate,
        "n_frames": args.frames,
        "viewport": f"{viewport[0]}x{viewport[1]}",
        "frame_rate": args.frame_rate,
        "of_scale": scale,
    }
    save_sequence(args.out, frames, gt, manifest)
    print(f"wrote {args.frames} frames to {args.out}")
    return 0


def cmd_run(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    if args.seq:
        frames = load_sequence(args.seq)
        gt_path = Path(args.seq) / "ground_truth.csv"
        gt = read_ground_truth_csv(gt_path) if gt_path.exists() else None
        if gt is not None and len(gt) != len(frames):
            gt = None
        name = args.name or "run"
    else:
        if args.scenario is None:
            raise FlowcamError("one of --seq or --scenario is required")
        n_frames = args.frames or round(config.frame_rate * args.duration)
        frames, gt = synthesize_sequence(
            config, args.scenario, n_frames, seed=args.seed,
            speed_px_s=args.speed, omega_deg_frame=args.omega_deg_frame,
            zoom_rate_frame=args.zoom_rate_frame,
        )
        label = f"set{args.param_set}" if args.param_set else "custom"
        name = args.name or f"{label}_{args.scenario}"
    vectors, report = run_pipeline(config, frames, args.initial_threshold)
    finalize_report(vectors, report, gt, out_dir, name=name)
    summary = report.summary
    rel = summary.get("final_rel_err")
    rel_text = "n/a" if rel is None else f"{rel:.4f}"
    print(
        f"{name}: {report.n_frames} frames, OF {report.of_width}x{report.of_height} "
        f"(scale {report.of_scale}), mean vectors "
        f"{sum(report.vectors_per_frame) / max(1, report.n_frames - 1):.0f}, "
        f"final_rel_err {rel_text}, tracks {summary.get('n_tracks', 0)} "
        f"(max len {summary.get('max_track_len', 0)})"
    )
    print(f"outputs in {out_dir}")
    return 0


def cmd_bench(args) -> int:
    config = _resolve_config(args)
    if args.seq:
        frames = load_sequence(args.seq)
    else:
        frames, _ = synthesize_sequence(config, "still", args.frames, seed=args.seed)
    report = throughput_report(config, frames, args.initial_threshold)
    print(f"frames: {report.n_frames}   OF frame: {report.of_width}x{report.of_height}")
    for stage, us in report.stage_us.items():
        print(f"  {stage:<9s} {us:10.1f} us/frame")
    print(f"  {'total':<9s} {report.total_us_per_frame:10.1f} us/frame")
    print(f"software throughput: {report.throughput_fps:.1f} fps")
    ref = "—" if report.hw_reference is None else f"{report.hw_reference:.0f}"
    model = "—" if report.hw_model_fps is None else f"{report.hw_model_fps:.1f}"
    print(f"hardware reference: {ref} fps (documented point), {model} fps (rate model)")
    print("software numbers claim no parity with the sensor.")
    return 0


def cmd_tracks(args) -> int:
    width, height, per_frame = read_ofv(args.ofv)
    tracks = redetect(link_tracks(per_frame), args.max_gap, args.radius)
    stats = track_stats(tracks)
    print(
        f"{args.ofv}: {len(per_frame)} frames ({width}x{height}), "
        f"{stats['n_tracks']} tracks, max len {stats['max_track_len']}, "
        f"median len {stats['p50_track_len']}, "
        f"{stats['redetected_count']} re-detections"
    )
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_summary_csv(out_dir / "tracks_summary.csv", None, tracks)
        print(f"outputs in {out_dir}")
    return 0


def cmd_report(args) -> int:
    width, height, per_frame = read_ofv(args.ofv)
    gt = read_ground_truth_csv(args.gt)
    if len(gt) != len(per_frame):
        raise FlowcamError(
            f"ground truth has {len(gt)} frames, stream has {len(per_frame)}"
        )
    est = [mean_flow(v) for v in per_frame]
    accuracy = accuracy_metrics(est, gt)
    tracks = redetect(link_tracks(per_frame), args.max_gap, args.radius)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_frame_report_csv(out_dir / "report_frames.csv", est, gt, accuracy)
    write_summary_csv(out_dir / "report_summary.csv", accuracy, tracks)
    rel = "n/a" if accuracy.final_rel_err is None else f"{accuracy.final_rel_err:.4f}"
    print(
        f"rmse ({accuracy.rmse_x:.4f}, {accuracy.rmse_y:.4f}), final_rel_err {rel}, "
        f"reports in {out_dir}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowcam",
        description="On-sensor optical-flow emulator and benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic PGM sequence")
    p.add_argument("--out", required=True)
    p.add_argument("--texture", choices=TEXTURE_KINDS, default="blocks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--viewport", default="640x480", help="WxH of output frames")
    p.add_argument("--texture-size", default=None, help="WxH, default 2x viewport")
    p.add_argument("--motion", choices=MOTION_KINDS, default="still")
    p.add_argument("--velocity", default="0,0", help="px/frame, e.g. 3,-1")
    p.add_argument("--omega-deg", type=float, default=0.0, help="deg/frame")
    p.add_argument("--zoom-rate", type=float, default=1.0, help="scale/frame")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--frame-rate", type=float, default=60.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run the pipeline over a sequence")
    p.add_argument("--param-set", type=int, default=None, help="built-in set 1..7")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--seq", default=None, help="directory of frame_*.pgm")
    p.add_argument("--scenario", choices=SCENARIOS, default=None)
    p.add_argument("--duration", type=float, default=10.0, help="seconds")
    p.add_argument("--frames", type=int, default=None, help="overrides --duration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speed", type=float, default=DEFAULT_SPEED_PX_S,
                   help="translation speed, full-sensor px/s")
    p.add_argument("--omega-deg-frame", type=float, default=DEFAULT_OMEGA_DEG_FRAME)
    p.add_argument("--zoom-rate-frame", type=float, default=DEFAULT_ZOOM_RATE_FRAME)
    p.add_argument("--initial-threshold", type=int, default=INITIAL_THRESHOLD)
    p.add_argument("--max-displacement", type=int, default=None)
    p.add_argument("--ratio-threshold", type=float, default=None)
    p.add_argument("--name", default=None, help="output file basename")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="measure software throughput")
    p.add_argument("--param-set", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seq", default=None)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-threshold", type=int, default=INITIAL_THRESHOLD)
    p.add_argument("--max-displacement", type=int, default=None)
    p.add_argument("--ratio-threshold", type=float, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tracks", help="track statistics of an .ofv stream")
    p.add_argument("--ofv", required=True)
    p.add_argument("--max-gap", type=int, default=4)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tracks)

    p = sub.add_parser("report", help="accuracy report for an .ofv stream")
    p.add_argument("--ofv", required=True)
    p.add_argument("--gt", required=True, help="ground-truth CSV")
    p.add_argument("--max-gap", type=int, default=4)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FlowcamError as exc:
        print(f"flowcam {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"flowcam {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
