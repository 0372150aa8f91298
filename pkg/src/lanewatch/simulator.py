"""Synthetic multi-lane traffic with exact ground truth.

Vehicles arrive per lane (Poisson or evenly spaced), drive along the lane
centerline at a jittered constant speed without overtaking, and leave at the
far end of the lane. Every frame each visible vehicle yields a detection
perturbed by the noise model. All randomness comes from one seed split into
named sub-streams, so adding a noise source leaves the others untouched.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lanewatch.errors import ConfigError
from lanewatch.formats import LaneConfig, lane_config_from_dict, lane_config_to_dict
from lanewatch.geometry import (
    BBox,
    CameraConfig,
    Detection,
    LaneGeometry,
    LaneId,
    VehicleClass,
    lanes_for_points,
    point_in_polygon,
)
from lanewatch.status import classify, flow_rate, interval_index

_STREAMS = {
    "arrivals": 0,
    "vehicles": 1,
    "dropout": 2,
    "jitter": 3,
    "false_positives": 4,
    "confidence": 5,
    "render": 6,
}


def _rng(seed: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_STREAMS[name], *extra)))


@dataclass(frozen=True)
class ClassSpec:
    weight: float
    w: float
    h: float
    w_sigma: float = 0.0
    h_sigma: float = 0.0


@dataclass(frozen=True)
class NoiseModel:
    dropout: float = 0.0
    center_jitter: float = 0.0
    size_jitter: float = 0.0
    fp_per_frame: float = 0.0
    conf_range: Tuple[float, float] = (0.6, 0.99)
    fp_conf_range: Tuple[float, float] = (0.3, 0.7)

    def __post_init__(self):
        for name in ("dropout", "center_jitter", "size_jitter", "fp_per_frame"):
            if getattr(self, name) < 0:
                raise ConfigError(f"noise.{name} must be >= 0")
        if self.dropout >= 1:
            raise ConfigError("noise.dropout must be < 1")
        for lo, hi in (self.conf_range, self.fp_conf_range):
            if not 0 <= lo <= hi <= 1:
                raise ConfigError("confidence ranges must satisfy 0 <= lo <= hi <= 1")


DEFAULT_CLASSES = {
    "car": ClassSpec(0.85, 50.0, 70.0, 3.0, 4.0),
    "truck": ClassSpec(0.10, 70.0, 130.0, 3.0, 8.0),
    "bus": ClassSpec(0.05, 72.0, 140.0, 2.0, 6.0),
}


@dataclass
class SimScenario:
    lane_config: LaneConfig
    rates: List[float]  # vehicles/minute, one per lane
    duration_frames: int = 3600
    seed: int = 0
    arrival: str = "poisson"
    speed_mean: float = 6.0
    speed_sigma: float = 0.3
    min_gap: float = 10.0
    classes: Dict[str, ClassSpec] = field(default_factory=lambda: dict(DEFAULT_CLASSES))
    noise: NoiseModel = field(default_factory=NoiseModel)
    warmup_frames: int = 0
    interval_minutes: float = 0.5
    lane_changes: List[dict] = field(default_factory=list)
    processing_dt: object = None  # None, a constant, or [[from_frame, dt], ...]
    view_script: List[dict] = field(default_factory=list)
    render_every: int = 50
    # Ground truth counts a vehicle once its center is this close to the
    # baseline, mirroring the counting rule. None: weight-median class height.
    count_distance: Optional[float] = None

    def __post_init__(self):
        if len(self.rates) != len(self.lane_config.lanes):
            raise ConfigError(
                f"{len(self.rates)} arrival rates for {len(self.lane_config.lanes)} lanes"
            )
        if any(r < 0 for r in self.rates):
            raise ConfigError("arrival rates must be >= 0")
        if self.speed_mean <= 0 or self.speed_sigma < 0:
            raise ConfigError("speed mean must be > 0 and sigma >= 0")
        if self.duration_frames < 1 or self.warmup_frames < 0:
            raise ConfigError("duration must be >= 1 frame and warmup >= 0")
        if self.count_distance is not None and self.count_distance < 0:
            raise ConfigError("count_distance must be >= 0")
        if self.arrival not in ("poisson", "uniform"):
            raise ConfigError(f"unknown arrival process {self.arrival!r}")
        if not self.classes or any(c.weight < 0 for c in self.classes.values()):
            raise ConfigError("vehicle class weights must be >= 0")
        for name in self.classes:
            VehicleClass(name)
        for lane in self.lane_config.lanes:
            lane.centerline()

    @property
    def fps(self) -> float:
        return self.lane_config.camera.fps

    def truth_count_distance(self) -> float:
        if self.count_distance is not None:
            return float(self.count_distance)
        total = sum(c.weight for c in self.classes.values())
        acc = 0.0
        for c in sorted(self.classes.values(), key=lambda c: c.h):
            acc += c.weight
            if acc >= total / 2:
                return c.h
        return max(c.h for c in self.classes.values())

    def dt_for_frame(self, frame_id: int) -> Optional[float]:
        spec = self.processing_dt
        if spec is None:
            return None
        if isinstance(spec, (int, float)):
            return float(spec)
        current = None
        for start, dt in spec:
            if frame_id >= start:
                current = float(dt)
        return current


@dataclass
class SimFrame:
    frame_id: int
    detections: List[Detection]
    sources: List[int]  # vehicle id per detection, -1 for false positives
    dt: Optional[float] = None


@dataclass
class GroundTruth:
    lane_ids: List[int]
    fps: float
    interval_minutes: float
    duration_frames: int
    interval_counts: Dict[int, List[int]]
    flow_rates: Dict[int, List[float]]
    occupancy: Dict[int, List[float]]
    status: Dict[int, List[str]]
    vehicles: List[dict]
    trajectories: Dict[int, List[Tuple[int, float, float]]]

    @property
    def total_count(self) -> int:
        return sum(sum(v) for v in self.interval_counts.values())

    def to_dict(self) -> dict:
        return {
            "lane_ids": self.lane_ids,
            "fps": self.fps,
            "interval_minutes": self.interval_minutes,
            "duration_frames": self.duration_frames,
            "intervals": {
                str(lid): [
                    {"interval_index": i, "count": c, "flow_rate_vph": fr,
                     "occupancy": round(occ, 6), "status": st}
                    for i, (c, fr, occ, st) in enumerate(zip(
                        self.interval_counts[lid], self.flow_rates[lid],
                        self.occupancy[lid], self.status[lid]))
                ]
                for lid in self.lane_ids
            },
            "vehicles": self.vehicles,
            "trajectories": {
                str(vid): [[f, round(x, 2), round(y, 2)] for f, x, y in pts]
                for vid, pts in self.trajectories.items()
            },
        }


@dataclass
class SimOutput:
    frames: List[SimFrame]
    truth: GroundTruth
    lane_config: LaneConfig


class _Path:
    """Arc-length parametrisation of a lane centerline."""

    def __init__(self, points: Sequence[Tuple[float, float]]):
        self.points = np.asarray(points, dtype=float)
        seg = np.diff(self.points, axis=0)
        self.seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.length = float(self.cum[-1])

    def at(self, s: float) -> Tuple[float, float]:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right") - 1)
        i = min(i, len(self.seg_len) - 1)
        t = (s - self.cum[i]) / self.seg_len[i] if self.seg_len[i] else 0.0
        p = self.points[i] + t * (self.points[i + 1] - self.points[i])
        return float(p[0]), float(p[1])

    def project(self, p: Tuple[float, float]) -> float:
        best, best_s = math.inf, 0.0
        for i, length in enumerate(self.seg_len):
            a = self.points[i]
            d = self.points[i + 1] - a
            t = 0.0 if length == 0 else float(np.clip(np.dot(np.asarray(p) - a, d) / length ** 2, 0, 1))
            q = a + t * d
            dist = float(np.hypot(*(np.asarray(p) - q)))
            if dist < best:
                best, best_s = dist, float(self.cum[i] + t * length)
        return best_s


@dataclass
class _Vehicle:
    vid: int
    lane_idx: int
    cls: str
    w: float
    h: float
    speed: float
    s: float = 0.0
    spawn_frame: int = 0
    exit_frame: Optional[int] = None
    crossing_frame: Optional[int] = None
    crossing_lane: Optional[int] = None
    change_to: Optional[int] = None
    change_start: int = 0
    change_duration: int = 1


def _arrival_frames(scn: SimScenario, lane_idx: int, start: int, end: int) -> List[int]:
    rate = scn.rates[lane_idx]
    if rate <= 0:
        return []
    rng = _rng(scn.seed, "arrivals", lane_idx)
    mean_gap = 60.0 * scn.fps / rate
    frames = []
    if scn.arrival == "uniform":
        t = start + rng.uniform(0, mean_gap)
        while t < end:
            frames.append(int(math.floor(t)))
            t += mean_gap
    else:
        t = start + rng.exponential(mean_gap)
        while t < end:
            frames.append(int(math.floor(t)))
            t += rng.exponential(mean_gap)
    return frames


def generate(scn: SimScenario) -> SimOutput:
    """Run the scenario; deterministic for a given seed."""
    cfg = scn.lane_config
    lanes = cfg.lanes
    fps = scn.fps
    paths = [_Path(lane.centerline()) for lane in lanes]
    base_s = [p.project(((lane.baseline[0][0] + lane.baseline[1][0]) / 2,
                         (lane.baseline[0][1] + lane.baseline[1][1]) / 2))
              for p, lane in zip(paths, lanes)]
    roi_list = cfg.rois
    zone = scn.truth_count_distance()
    count_s = [b - zone for b in base_s]
    start, end = -scn.warmup_frames, scn.duration_frames

    arrivals = [sorted(_arrival_frames(scn, i, start, end)) for i in range(len(lanes))]
    pending = [list(a) for a in arrivals]
    veh_rng = _rng(scn.seed, "vehicles")
    drop_rng = _rng(scn.seed, "dropout")
    jit_rng = _rng(scn.seed, "jitter")
    fp_rng = _rng(scn.seed, "false_positives")
    conf_rng = _rng(scn.seed, "confidence")

    class_names = list(scn.classes)
    weights = np.array([scn.classes[c].weight for c in class_names], dtype=float)
    weights = weights / weights.sum()

    changes = sorted(scn.lane_changes, key=lambda c: c["frame"])
    lane_index = {int(lane.lane_id): i for i, lane in enumerate(lanes)}

    active: List[_Vehicle] = []
    finished: List[_Vehicle] = []
    next_vid = 1
    frames: List[SimFrame] = []
    trajectories: Dict[int, List[Tuple[int, float, float]]] = {}
    lane_ids = [int(lane.lane_id) for lane in lanes]
    n_intervals = interval_index(scn.duration_frames, fps, scn.interval_minutes)
    occ_sum = {lid: [0.0] * n_intervals for lid in lane_ids}
    occ_n = [0] * n_intervals
    counts = {lid: [0] * n_intervals for lid in lane_ids}

    def position(v: _Vehicle, frame: int) -> Tuple[float, float]:
        p = paths[v.lane_idx].at(v.s)
        if v.change_to is None:
            return p
        q = paths[v.change_to].at(v.s)
        lam = min(1.0, (frame - v.change_start) / v.change_duration)
        return (p[0] + lam * (q[0] - p[0]), p[1] + lam * (q[1] - p[1]))

    for frame in range(start, end):
        # Spawn at lane entry when the previous vehicle has cleared it.
        for li in range(len(lanes)):
            while pending[li] and pending[li][0] <= frame:
                last = [v for v in active if v.lane_idx == li and v.change_to is None]
                cls = class_names[int(veh_rng.choice(len(class_names), p=weights))]
                spec = scn.classes[cls]
                w = max(4.0, veh_rng.normal(spec.w, spec.w_sigma))
                h = max(4.0, veh_rng.normal(spec.h, spec.h_sigma))
                speed = max(0.05, veh_rng.normal(scn.speed_mean, scn.speed_sigma))
                if last:
                    tail = min(last, key=lambda v: v.s)
                    if tail.s - (tail.h + h) / 2 - scn.min_gap < 0:
                        # Entry blocked: re-draws happen next frame from the same stream.
                        break
                pending[li].pop(0)
                active.append(_Vehicle(next_vid, li, cls, w, h, speed, 0.0, frame))
                next_vid += 1

        while changes and changes[0]["frame"] <= frame:
            ch = changes.pop(0)
            src, dst = lane_index[int(ch["lane"])], lane_index[int(ch["to_lane"])]
            candidates = [v for v in active if v.lane_idx == src and v.change_to is None
                          and v.s < base_s[src]]
            if candidates:
                v = min(candidates, key=lambda v: v.s)
                v.change_to, v.change_start = dst, frame
                v.change_duration = max(1, int(ch.get("duration", 30)))

        # Advance without overtaking: leaders first.
        for li in range(len(lanes)):
            in_lane = sorted((v for v in active if v.lane_idx == li),
                             key=lambda v: -v.s)
            leader = None
            for v in in_lane:
                target = v.s + v.speed
                if leader is not None and v.change_to is None and leader.change_to is None:
                    target = min(target, leader.s - (leader.h + v.h) / 2 - scn.min_gap)
                v.s = max(v.s, target)
                leader = v
        for v in active:
            if v.change_to is not None and frame - v.change_start >= v.change_duration:
                v.lane_idx, v.change_to = v.change_to, None

        still = []
        for v in active:
            if v.s > paths[v.lane_idx].length:
                v.exit_frame = frame
                finished.append(v)
            else:
                still.append(v)
        active = still

        if frame < 0:
            for v in active:
                if v.s >= count_s[v.lane_idx] and v.crossing_frame is None:
                    v.crossing_frame = frame
            continue

        dets, sources = [], []
        heights: Dict[int, float] = {lid: 0.0 for lid in lane_ids}
        iv = interval_index(frame, fps, scn.interval_minutes)
        ordered = sorted(active, key=lambda v: v.vid)
        where = [position(v, frame) for v in ordered]
        for v, (cx, cy), lane in zip(ordered, where, lanes_for_points(where, lanes)):
            trajectories.setdefault(v.vid, []).append((frame, cx, cy))
            if lane is not None:
                heights[int(lane.lane_id)] += v.h
            if v.crossing_frame is None and v.s >= count_s[v.lane_idx]:
                v.crossing_frame = frame
                v.crossing_lane = int(lane.lane_id) if lane else int(lanes[v.lane_idx].lane_id)
                if iv < n_intervals:
                    counts[v.crossing_lane][iv] += 1

            if drop_rng.random() < scn.noise.dropout:
                continue
            jx, jy = jit_rng.normal(0.0, 1.0, 2) * scn.noise.center_jitter
            jw, jh = jit_rng.normal(0.0, 1.0, 2) * scn.noise.size_jitter
            w, h = max(2.0, v.w + jw), max(2.0, v.h + jh)
            lo, hi = scn.noise.conf_range
            conf = round(float(conf_rng.uniform(lo, hi)), 4)
            box = _grid_box(cx + jx, cy + jy, w, h)
            dets.append(Detection(frame, box, VehicleClass(v.cls), conf))
            sources.append(v.vid)

        if fp_rng.random() < scn.noise.fp_per_frame:
            dets.append(_false_positive(fp_rng, frame, roi_list, scn))
            sources.append(-1)

        if iv < n_intervals:
            for lid in lane_ids:
                occ_sum[lid][iv] += heights[lid] / lanes[lane_index[lid]].band_height
            occ_n[iv] += 1
        frames.append(SimFrame(frame, dets, sources, scn.dt_for_frame(frame)))

    finished.extend(active)
    vehicles = [
        {"id": v.vid, "lane": int(lanes[v.lane_idx].lane_id), "class": v.cls,
         "spawn_frame": v.spawn_frame, "exit_frame": v.exit_frame,
         "crossing_frame": v.crossing_frame, "crossing_lane": v.crossing_lane}
        for v in sorted(finished, key=lambda v: v.vid)
    ]
    occupancy = {lid: [occ_sum[lid][i] / occ_n[i] if occ_n[i] else 0.0
                       for i in range(n_intervals)] for lid in lane_ids}
    flows = {lid: [flow_rate(c, scn.interval_minutes) for c in counts[lid]]
             for lid in lane_ids}
    status = {lid: [classify(fr, min(occ, 1.0)).value
                    for fr, occ in zip(flows[lid], occupancy[lid])] for lid in lane_ids}
    truth = GroundTruth(lane_ids, fps, scn.interval_minutes, scn.duration_frames, counts,
                        flows, occupancy, status, vehicles, trajectories)
    return SimOutput(frames, truth, cfg)


def _grid_box(cx: float, cy: float, w: float, h: float) -> BBox:
    # Emitted geometry sits on a 0.01 px grid so serialised streams are stable.
    w, h = round(w, 2), round(h, 2)
    return BBox(round(cx - w / 2, 2), round(cy - h / 2, 2), w, h)


def _false_positive(rng, frame: int, rois, scn: SimScenario) -> Detection:
    roi = rois[int(rng.integers(len(rois)))]
    xs, ys = [p[0] for p in roi], [p[1] for p in roi]
    while True:
        cx, cy = rng.uniform(min(xs), max(xs)), rng.uniform(min(ys), max(ys))
        if point_in_polygon((cx, cy), roi):
            break
    w, h = rng.uniform(20, 80), rng.uniform(20, 80)
    lo, hi = scn.noise.fp_conf_range
    conf = round(float(rng.uniform(lo, hi)), 4)
    return Detection(frame, _grid_box(cx, cy, w, h), VehicleClass.CAR, conf)


# ---------------------------------------------------------------------------
# Frame rendering


def _world(x: np.ndarray, y: np.ndarray, height: int, width: int,
           knots: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Background intensity at world coordinates (pixels of the nominal view).

    The far band is a seeded random field, so horizontally shifted views
    share no structure the way a periodic texture would.
    """
    sky_end, far_end = 0.05 * height, 0.2 * height
    sky = 120.0 + 50.0 * np.clip(x / width, -1.0, 2.0)
    # Bilinear lookup in a coarse random field: knot rows across the band,
    # knot columns spread over a range wider than any pan.
    rows = np.clip((y - sky_end) / (far_end - sky_end), 0.0, 1.0) * (knots.shape[0] - 1)
    cols = np.clip((x + 3.0 * width) / (7.0 * width), 0.0, 1.0) * (knots.shape[1] - 1)
    r0 = np.minimum(rows.astype(int), knots.shape[0] - 2)
    c0 = np.minimum(cols.astype(int), knots.shape[1] - 2)
    fr, fc = rows - r0, cols - c0
    far = ((1 - fr) * ((1 - fc) * knots[r0, c0] + fc * knots[r0, c0 + 1])
           + fr * ((1 - fc) * knots[r0 + 1, c0] + fc * knots[r0 + 1, c0 + 1]))
    road = (85.0 + 12.0 * np.sin(2 * np.pi * x / (0.11 * width) + phases[3])
            + 6.0 * np.sin(2 * np.pi * y / (0.13 * height) + phases[4]))
    return np.where(y < sky_end, sky, np.where(y < far_end, far, road))


def _transform_at(script: Sequence[dict], frame: int) -> dict:
    t = {"shift_x": 0.0, "shift_y": 0.0, "zoom": 1.0, "brightness": 0.0, "sky_churn": 0.0}
    for entry in script:
        if frame >= entry.get("start", 0) and frame < entry.get("end", math.inf):
            for key in t:
                if key in entry:
                    t[key] = float(entry[key])
    return t


def render_frame(camera: CameraConfig, frame: int, script: Sequence[dict] = (),
                 seed: int = 0) -> np.ndarray:
    """One 8-bit grayscale frame of the synthetic background."""
    height, width = camera.frame_height, camera.frame_width
    rng = _rng(seed, "render")
    phases = rng.uniform(0, 2 * np.pi, 5)
    knots = rng.uniform(50.0, 190.0, (6, 71))
    t = _transform_at(script, frame)
    # The view transform is separable: a column of y values and a row of x values.
    v, u = np.arange(height, dtype=float)[:, None], np.arange(width, dtype=float)[None, :]
    cx, cy = width / 2.0, height / 2.0
    x = cx + (u - cx) / t["zoom"] + t["shift_x"] * width
    y = cy + (v - cy) / t["zoom"] + t["shift_y"] * height
    img = np.broadcast_to(_world(x, y, height, width, knots, phases),
                          (height, width)) + t["brightness"]
    if t["sky_churn"] > 0:
        churn_rng = _rng(seed, "render", frame + 1)
        sky_rows = int(0.05 * height)
        coarse = churn_rng.normal(0.0, 1.0, (sky_rows // 8 + 2, width // 8 + 2))
        blobs = np.kron(coarse, np.ones((8, 8)))[:sky_rows, :width]
        img[:sky_rows] += t["sky_churn"] * blobs
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render_frames(scn: SimScenario, frame_ids: Optional[Sequence[int]] = None):
    """Yield ``(frame_id, image)`` for the requested frames (default: every
    ``render_every``-th frame)."""
    if frame_ids is None:
        frame_ids = range(0, scn.duration_frames, scn.render_every)
    for f in frame_ids:
        yield f, render_frame(scn.lane_config.camera, f, scn.view_script, scn.seed)


# ---------------------------------------------------------------------------
# Layouts and presets


def straight_lanes(n_lanes: int = 3, lane_width: float = 120.0, x0: float = 460.0,
                   y_top: float = 100.0, y_bottom: float = 700.0, baseline_y: float = 400.0,
                   roi_margin: float = 20.0, fps: float = 30.0, width: int = 1280,
                   height: int = 720) -> dict:
    """Lane configuration dict for parallel vertical lanes travelling up the image.

    Lane 1 is the leftmost lane from the driver's point of view.
    """
    x_end = x0 + n_lanes * lane_width
    roi = [[x0 - roi_margin, y_bottom], [x_end + roi_margin, y_bottom],
           [x_end + roi_margin, y_top], [x0 - roi_margin, y_top]]
    lanes = []
    for i in range(n_lanes):
        xl, xr = x0 + i * lane_width, x0 + (i + 1) * lane_width
        lanes.append({
            "id": i + 1,
            "left": [[xl, y_bottom], [xl, y_top]],
            "right": [[xr, y_bottom], [xr, y_top]],
            "baseline": [[xl, baseline_y], [xr, baseline_y]],
            "direction": [0.0, -1.0],
        })
    return {"camera": {"fps": fps, "width": width, "height": height},
            "roi": roi, "lanes": lanes}


PRESETS = {
    "clean": {"rates": [8, 10, 12], "noise": {}},
    "sunny": {
        "rates": [8, 10, 12],
        "noise": {"dropout": 0.02, "center_jitter": 1.0, "size_jitter": 1.0,
                  "fp_per_frame": 1 / 200},
    },
    "noisy": {
        "rates": [6, 9, 12],
        "noise": {"dropout": 0.1, "center_jitter": 2.0, "size_jitter": 1.0,
                  "fp_per_frame": 1 / 50},
    },
    "congestion": {
        "rates": [20, 20, 20],
        "speed_mean": 1.5, "speed_sigma": 0.2, "min_gap": -12.0,
        "classes": {"car": {"weight": 0.8, "w": 118, "h": 72, "w_sigma": 6, "h_sigma": 4},
                    "truck": {"weight": 0.2, "w": 124, "h": 140, "w_sigma": 4, "h_sigma": 8}},
        "noise": {"dropout": 0.15, "center_jitter": 3.0, "size_jitter": 3.0,
                  "fp_per_frame": 1 / 30},
        "warmup_frames": 1200,
    },
}


def scenario_from_dict(data: dict, seed: Optional[int] = None) -> SimScenario:
    """Build a scenario; ``preset`` names a base that other keys override."""
    data = copy.deepcopy(data)
    base = {}
    if "preset" in data:
        name = data.pop("preset")
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        base = copy.deepcopy(PRESETS[name])
    base.update(data)
    data = base
    if seed is not None:
        data["seed"] = seed
    layout = data.pop("layout", None)
    if "lanes" in data:
        lane_dict = {k: data.pop(k) for k in ("camera", "roi", "lanes") if k in data}
    else:
        lane_dict = straight_lanes(**(layout or {}))
    try:
        lane_cfg = lane_config_from_dict(lane_dict)
        rates = data.pop("rates")
        if isinstance(rates, (int, float)):
            rates = [float(rates)] * len(lane_cfg.lanes)
        classes = data.pop("classes", None)
        classes = ({k: ClassSpec(**v) for k, v in classes.items()}
                   if classes else dict(DEFAULT_CLASSES))
        noise = data.pop("noise", {}) or {}
        for key in ("conf_range", "fp_conf_range"):
            if key in noise:
                noise[key] = tuple(noise[key])
        return SimScenario(lane_config=lane_cfg, rates=[float(r) for r in rates],
                           classes=classes, noise=NoiseModel(**noise), **data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario: {exc!r}") from exc


def scenario_to_lane_dict(scn: SimScenario) -> dict:
    return lane_config_to_dict(scn.lane_config)
