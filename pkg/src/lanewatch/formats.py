"""Wire formats: lane configuration, detection records and output events.

Detection streams are newline-delimited JSON, one detection per line::

    {"frame_id": 12, "t_seconds": 0.4, "class": "car", "conf": 0.91,
     "x": 410.5, "y": 300.0, "w": 48.0, "h": 62.0}

Optional frame markers ``{"kind": "frame", "frame_id": 12, "t_seconds": 0.4,
"dt": 0.031}`` declare frames that carry no detections and, in replay mode,
the recorded processing time of that frame.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Dict, Iterable, Iterator, List, Optional, Tuple

from lanewatch.errors import ConfigError
from lanewatch.geometry import BBox, CameraConfig, Detection, LaneGeometry, LaneId, VehicleClass

logger = logging.getLogger(__name__)

# Output events sharing a frame id are written in this order.
EVENT_ORDER = {
    "environment": 0,
    "view_change": 1,
    "lane_report": 2,
    "count": 3,
    "rate": 4,
    "summary": 5,
}


@dataclass
class LaneConfig:
    camera: CameraConfig
    lanes: List[LaneGeometry]
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def rois(self) -> List[Tuple[Tuple[float, float], ...]]:
        seen = []
        for lane in self.lanes:
            if lane.roi not in seen:
                seen.append(lane.roi)
        return seen


def _unit(v) -> Tuple[float, float]:
    x, y = float(v[0]), float(v[1])
    n = math.hypot(x, y)
    if n == 0:
        raise ConfigError("direction vector must be non-zero")
    return (x / n, y / n)


def lane_config_from_dict(data: dict) -> LaneConfig:
    try:
        cam = data["camera"]
        camera = CameraConfig(float(cam["fps"]), int(cam["width"]), int(cam["height"]))
        shared_roi = data.get("roi")
        lanes = []
        for entry in data["lanes"]:
            roi = entry.get("roi", shared_roi)
            if roi is None:
                raise ConfigError(f"lane {entry.get('id')}: no ROI given")
            lanes.append(LaneGeometry(
                lane_id=LaneId(int(entry["id"])),
                left_boundary=entry["left"],
                right_boundary=entry["right"],
                baseline=entry["baseline"],
                direction=_unit(entry["direction"]),
                roi=roi,
            ))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad lane configuration: {exc!r}") from exc
    if not lanes:
        raise ConfigError("lane configuration has no lanes")
    ids = [lane.lane_id for lane in lanes]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate lane ids: {ids}")
    return LaneConfig(camera, lanes, dict(data.get("params", {})))


def lane_config_to_dict(cfg: LaneConfig) -> dict:
    rois = cfg.rois
    out = {
        "camera": {"fps": cfg.camera.fps, "width": cfg.camera.frame_width,
                   "height": cfg.camera.frame_height},
        "lanes": [],
    }
    if len(rois) == 1:
        out["roi"] = [list(p) for p in rois[0]]
    for lane in cfg.lanes:
        entry = {
            "id": int(lane.lane_id),
            "left": [list(p) for p in lane.left_boundary],
            "right": [list(p) for p in lane.right_boundary],
            "baseline": [list(p) for p in lane.baseline],
            "direction": list(lane.direction),
        }
        if len(rois) != 1:
            entry["roi"] = [list(p) for p in lane.roi]
        out["lanes"].append(entry)
    if cfg.params:
        out["params"] = cfg.params
    return out


def load_lane_config(path) -> LaneConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"lane configuration not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return lane_config_from_dict(data)


def detection_to_record(det: Detection, fps: float) -> dict:
    b = det.bbox
    return {
        "frame_id": det.frame_id,
        "t_seconds": round(det.frame_id / fps, 6),
        "class": det.class_label.value,
        "conf": det.confidence,
        "x": b.x, "y": b.y, "w": b.w, "h": b.h,
    }


def detection_from_record(rec: dict) -> Detection:
    """Parse one detection record; raises ValueError/KeyError/TypeError if malformed."""
    box = BBox(float(rec["x"]), float(rec["y"]), float(rec["w"]), float(rec["h"]))
    return Detection(int(rec["frame_id"]), box, VehicleClass(rec.get("class", "car")),
                     float(rec["conf"]))


@dataclass
class FrameInput:
    frame_id: int
    detections: List[Detection] = field(default_factory=list)
    dt: Optional[float] = None


class DetectionReader:
    """Group a detection stream into per-frame batches.

    Malformed or out-of-order lines are skipped with a warning and tallied in
    ``malformed``.
    """

    def __init__(self, lines: Iterable[str]):
        self._lines = lines
        self.malformed = 0

    def _skip(self, lineno: int, reason: str) -> None:
        self.malformed += 1
        logger.warning("line %d skipped: %s", lineno, reason)

    def __iter__(self) -> Iterator[FrameInput]:
        current: Optional[FrameInput] = None
        for lineno, line in enumerate(self._lines, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise TypeError("record is not an object")
                frame_id = int(rec["frame_id"])
                if frame_id < 0:
                    raise ValueError("negative frame id")
                if rec.get("kind") == "frame":
                    det = None
                    dt = rec.get("dt")
                    dt = None if dt is None else float(dt)
                else:
                    det = detection_from_record(rec)
                    dt = None
            except (ValueError, KeyError, TypeError) as exc:
                self._skip(lineno, repr(exc))
                continue
            if current is not None and frame_id < current.frame_id:
                self._skip(lineno, f"frame {frame_id} after frame {current.frame_id}")
                continue
            if current is None or frame_id != current.frame_id:
                if current is not None:
                    yield current
                current = FrameInput(frame_id)
            if det is not None:
                current.detections.append(det)
            if dt is not None:
                current.dt = dt
        if current is not None:
            yield current


def write_jsonl(records: Iterable[dict], fh: IO[str]) -> None:
    for rec in records:
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_jsonl(path) -> List[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
