"""Command-line entry point: ``monitor``, ``simulate`` and ``evaluate``.

Exit codes: 0 success, 1 configuration error, 2 input error.
Set ``LANEWATCH_LOG_LEVEL`` (e.g. ``DEBUG``) to change log verbosity.
"""
from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from PIL import Image

from lanewatch.errors import ConfigError, EvaluationError, InputError
from lanewatch.formats import (
    DetectionReader,
    detection_to_record,
    lane_config_to_dict,
    load_lane_config,
    read_jsonl,
    write_jsonl,
)
from lanewatch.metrics import evaluate
from lanewatch.pipeline import Pipeline, run, run_params_from_dict
from lanewatch.simulator import PRESETS, generate, render_frames, scenario_from_dict

logger = logging.getLogger("lanewatch")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT = 0, 1, 2

# CLI flag -> parameter key; flags mirror the config ``params`` block.
PARAM_FLAGS = {
    "--conf-threshold": ("conf_threshold", float),
    "--nms-iou-threshold": ("nms_iou_threshold", float),
    "--size-factor": ("size_factor", float),
    "--truck-median-window": ("truck_median_window", int),
    "--pre-thre": ("pre_thre", float),
    "--c-mode": ("c_mode", str),
    "--max-age": ("max_age", int),
    "--n-init": ("n_init", int),
    "--check-interval-frames": ("check_interval_frames", int),
    "--hash-distance-threshold": ("hash_distance_threshold", int),
    "--hash-kind": ("hash_kind", str),
    "--interval-minutes": ("interval_minutes", float),
    "--avg-car-length": ("avg_car_length", float),
    "--ema-alpha": ("ema_alpha", float),
}


class FrameDirectory:
    """Grayscale frames stored as ``<frame_id>.png|.pgm|.npy`` in one directory."""

    def __init__(self, path):
        path = Path(path)
        if not path.is_dir():
            raise ConfigError(f"frames directory not found: {path}")
        self.files: Dict[int, Path] = {}
        for f in sorted(path.iterdir()):
            if f.suffix.lower() in (".png", ".pgm", ".npy") and f.stem.isdigit():
                self.files[int(f.stem)] = f

    def __call__(self, frame_id: int):
        f = self.files.get(frame_id)
        if f is None:
            return None
        try:
            if f.suffix.lower() == ".npy":
                return np.load(f)
            with Image.open(f) as img:
                return np.asarray(img.convert("L"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read frame {f}: {exc}") from exc


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    for flag, (key, typ) in PARAM_FLAGS.items():
        p.add_argument(flag, dest=key, type=typ, default=None)


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w")


def cmd_monitor(args) -> int:
    cfg = load_lane_config(args.config)
    params = dict(cfg.params)
    for _, (key, _) in PARAM_FLAGS.items():
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    params["replay"] = not args.live
    run_params = run_params_from_dict(params)
    relearn = [load_lane_config(p) for p in args.relearn_lanes]
    images = FrameDirectory(args.frames) if args.frames else None

    if args.detections == "-":
        source = contextlib.nullcontext(sys.stdin)
    else:
        if not Path(args.detections).is_file():
            raise InputError(f"detections file not found: {args.detections}")
        source = open(args.detections)

    pipeline = Pipeline(cfg.camera, run_params, cfg)
    with source as fh, _open_out(args.out) as out:
        reader = DetectionReader(fh)
        last = -1
        for event in run(pipeline, reader, images, relearn):
            last = max(last, event["frame_id"])
            write_jsonl([event], out)
        s = pipeline.stats
        write_jsonl([{"kind": "summary", "frame_id": max(last, s.frames),
                      "frames": s.frames, "processed_frames": s.processed,
                      "counts": s.counts, "view_changes": s.view_changes,
                      "malformed_records": reader.malformed,
                      "mode": pipeline.mode.value}], out)
    return EXIT_OK


def _load_scenario(spec: str, seed: Optional[int]):
    path = Path(spec)
    if path.is_file():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    elif spec in PRESETS:
        data = {"preset": spec}
    else:
        raise ConfigError(f"scenario {spec!r} is neither a file nor a preset "
                          f"({', '.join(sorted(PRESETS))})")
    return scenario_from_dict(data, seed)


def cmd_simulate(args) -> int:
    scn = _load_scenario(args.scenario, args.seed)
    out = generate(scn)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    fps = scn.fps

    with open(f"{prefix}.detections.jsonl", "w") as fh:
        for frame in out.frames:
            marker = {"kind": "frame", "frame_id": frame.frame_id,
                      "t_seconds": round(frame.frame_id / fps, 6)}
            if frame.dt is not None:
                marker["dt"] = frame.dt
            write_jsonl([marker], fh)
            write_jsonl((detection_to_record(d, fps) for d in frame.detections), fh)
    with open(f"{prefix}.truth.json", "w") as fh:
        json.dump(out.truth.to_dict(), fh, separators=(",", ":"))
    with open(f"{prefix}.lanes.json", "w") as fh:
        json.dump(lane_config_to_dict(out.lane_config), fh, indent=2)

    if scn.view_script or args.render:
        frames_dir = Path(f"{prefix}_frames")
        frames_dir.mkdir(exist_ok=True)
        for fid, img in render_frames(scn):
            Image.fromarray(img).save(frames_dir / f"{fid:06d}.png")
    logger.info("simulated %d frames, %d ground-truth counts",
                len(out.frames), out.truth.total_count)
    return EXIT_OK


def collect_reports(records: List[dict]):
    """Valid lane reports as ``{lane: {interval: record}}``."""
    by_lane: Dict[int, Dict[int, dict]] = {}
    for rec in records:
        if rec.get("kind") == "lane_report" and rec.get("valid", True):
            by_lane.setdefault(int(rec["lane_id"]), {})[int(rec["interval_index"])] = rec
    return by_lane


def evaluate_files(reports_path, truth_path) -> dict:
    try:
        records = read_jsonl(reports_path)
        truth = json.loads(Path(truth_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from exc
    by_lane = collect_reports(records)
    if not by_lane:
        raise EvaluationError("no valid lane reports to evaluate")
    truth_lanes = {int(k): v for k, v in truth["intervals"].items()}
    if set(by_lane) != set(truth_lanes):
        raise EvaluationError(
            f"lane sets differ: reports {sorted(by_lane)} vs truth {sorted(truth_lanes)}"
        )
    grids = {lane: sorted(v) for lane, v in by_lane.items()}
    grid = next(iter(grids.values()))
    if any(g != grid for g in grids.values()):
        raise EvaluationError(f"lanes report different interval grids: {grids}")
    sys_counts, gt_counts, sys_status, gt_status = {}, {}, {}, {}
    for lane, rows in truth_lanes.items():
        gt_by_idx = {r["interval_index"]: r for r in rows}
        missing = [i for i in grid if i not in gt_by_idx]
        if missing:
            raise EvaluationError(f"lane {lane}: intervals {missing} absent from truth")
        sys_counts[lane] = [by_lane[lane][i]["count"] for i in grid]
        gt_counts[lane] = [gt_by_idx[i]["count"] for i in grid]
        sys_status[lane] = [by_lane[lane][i]["status"] for i in grid]
        gt_status[lane] = [gt_by_idx[i]["status"] for i in grid]
    result = evaluate(sys_counts, gt_counts, float(truth["interval_minutes"]),
                      sys_status, gt_status)
    out = dataclasses.asdict(result)
    out["per_lane"] = {str(k): v for k, v in out["per_lane"].items()}
    out["intervals"] = grid
    return out


def cmd_evaluate(args) -> int:
    result = evaluate_files(args.reports, args.truth)
    with _open_out(args.out) as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanewatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    mon = sub.add_parser("monitor", help="count vehicles and report lane traffic status")
    mon.add_argument("--config", required=True, help="lane configuration JSON")
    mon.add_argument("--detections", default="-", help="detection JSONL file, or - for stdin")
    mon.add_argument("--frames", help="directory of grayscale frames for view checking")
    mon.add_argument("--out", help="event output file (default stdout)")
    mon.add_argument("--relearn-lanes", action="append", default=[], metavar="FILE",
                     help="lane configuration to load after a view change (repeatable)")
    mon.add_argument("--live", action="store_true",
                     help="measure processing time instead of replaying recorded dt")
    _add_param_flags(mon)
    mon.set_defaults(func=cmd_monitor)

    sim = sub.add_parser("simulate", help="generate a synthetic detection stream")
    sim.add_argument("--scenario", required=True, help="scenario JSON file or preset name")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", required=True, help="output path prefix")
    sim.add_argument("--render", action="store_true",
                     help="also write background frames for view checking")
    sim.set_defaults(func=cmd_simulate)

    ev = sub.add_parser("evaluate", help="score lane reports against ground truth")
    ev.add_argument("--reports", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out", help="result file (default stdout)")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("LANEWATCH_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (InputError, EvaluationError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
