"""Per-stream monitoring loop: rate control, filtering, tracking, counting,
interval reports and camera view checks.

The loop owns every piece of mutable state. Each input frame goes through
``process_frame`` which returns the output events for that frame, already
in output order.
"""
from __future__ import annotations

import enum
import itertools
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

from lanewatch.association import CiouParams
from lanewatch.counting import LaneCounter
from lanewatch.detection_filter import FilterParams, TruckMedian, filter_valid, in_any_roi, nms
from lanewatch.errors import ConfigError
from lanewatch.formats import EVENT_ORDER, FrameInput, LaneConfig
from lanewatch.geometry import CameraConfig
from lanewatch.rate_sync import RateState
from lanewatch.status import (
    IntervalAccumulator,
    LaneReport,
    interval_index,
    interval_start_frame,
)
from lanewatch.tracking import Tracker, TrackerParams
from lanewatch.view_change import ViewCheckParams, ViewMonitor

logger = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    AWAITING_ENVIRONMENT = "AWAITING_ENVIRONMENT"
    MONITORING = "MONITORING"


@dataclass(frozen=True)
class RunParams:
    filter: FilterParams = FilterParams()
    tracker: TrackerParams = TrackerParams()
    view: ViewCheckParams = ViewCheckParams()
    interval_minutes: float = 0.5
    avg_car_length: Optional[float] = None
    ema_alpha: float = 0.2
    replay: bool = True


def run_params_from_dict(d: dict) -> RunParams:
    """Flat parameter dict (config ``params`` block or CLI flags) to RunParams."""
    known = {
        "conf_threshold", "nms_iou_threshold", "size_factor", "truck_median_window",
        "pre_thre", "c_mode", "max_age", "n_init", "check_interval_frames",
        "hash_distance_threshold", "hash_kind", "interval_minutes", "avg_car_length",
        "ema_alpha", "replay",
    }
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown parameters: {sorted(unknown)}")
    defaults = RunParams()
    f, t, v = defaults.filter, defaults.tracker, defaults.view
    try:
        return RunParams(
            filter=FilterParams(
                conf_threshold=float(d.get("conf_threshold", f.conf_threshold)),
                nms_iou_threshold=float(d.get("nms_iou_threshold", f.nms_iou_threshold)),
                size_factor=float(d.get("size_factor", f.size_factor)),
                truck_median_window=int(d.get("truck_median_window", f.truck_median_window)),
            ),
            tracker=TrackerParams(
                max_age=int(d.get("max_age", t.max_age)),
                n_init=int(d.get("n_init", t.n_init)),
                ciou=CiouParams(float(d.get("pre_thre", t.ciou.pre_thre)),
                                d.get("c_mode", t.ciou.c_mode)),
            ),
            view=ViewCheckParams(
                check_interval_frames=int(d.get("check_interval_frames",
                                                v.check_interval_frames)),
                hash_distance_threshold=int(d.get("hash_distance_threshold",
                                                  v.hash_distance_threshold)),
                hash_kind=d.get("hash_kind", v.hash_kind),
            ),
            interval_minutes=float(d.get("interval_minutes", defaults.interval_minutes)),
            avg_car_length=(None if d.get("avg_car_length") is None
                            else float(d["avg_car_length"])),
            ema_alpha=float(d.get("ema_alpha", defaults.ema_alpha)),
            replay=bool(d.get("replay", defaults.replay)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _r(x: Optional[float], nd: int) -> Optional[float]:
    return None if x is None else round(x, nd)


def report_event(rep: LaneReport, frame_id: int, rate: RateState) -> dict:
    return {
        "kind": "lane_report",
        "frame_id": frame_id,
        "lane_id": int(rep.lane_id),
        "interval_index": rep.interval_index,
        "interval_minutes": rep.interval_minutes,
        "count": rep.count,
        "flow_rate_vph": round(rep.flow_rate_vph, 2),
        "occupancy_raw": round(rep.occupancy_raw, 4),
        "occupancy": round(rep.occupancy, 4),
        "status": rep.status.value,
        "valid": rep.valid,
        "K": rate.K,
        "delta_t_ema": _r(rate.delta_t_ema, 6),
    }


@dataclass
class PipelineStats:
    frames: int = 0
    processed: int = 0
    view_changes: int = 0
    counts: int = 0


class Pipeline:
    """One camera stream. Starts in ``AWAITING_ENVIRONMENT`` unless lanes are given."""

    def __init__(self, camera: CameraConfig, params: RunParams = RunParams(),
                 lanes: Optional[LaneConfig] = None,
                 clock: Callable[[], float] = time.perf_counter):
        self.camera = camera
        self.params = params
        self.clock = clock
        self.mode = Mode.AWAITING_ENVIRONMENT
        self.rate = RateState(camera.fps, params.ema_alpha)
        # One id source for the whole run so ids survive resets.
        self._track_ids = itertools.count(1)
        self.tracker = Tracker(params.tracker, self._track_ids)
        self.view = ViewMonitor(params.view)
        self.truck_median = TruckMedian(params.filter.truck_median_window)
        self.lane_config: Optional[LaneConfig] = None
        self.counter: Optional[LaneCounter] = None
        self.intervals: Optional[IntervalAccumulator] = None
        self.stats = PipelineStats()
        self._pending: List[dict] = []
        if lanes is not None:
            self.load_environment(lanes, frame_id=0)

    # -- state machine ---------------------------------------------------

    def load_environment(self, lanes: LaneConfig, frame_id: int) -> None:
        """Install a lane configuration and (re)start monitoring at ``frame_id``."""
        if lanes.camera.fps != self.camera.fps:
            raise ConfigError("lane configuration fps differs from the stream fps")
        self.lane_config = lanes
        self.counter = LaneCounter(lanes.lanes, self.params.tracker.max_age,
                                   self.params.avg_car_length)
        self.intervals = IntervalAccumulator(lanes.lanes, self.params.interval_minutes)
        idx = self._interval_of(frame_id)
        # A partially covered first interval is reported but flagged invalid.
        starts_clean = self._interval_start(idx) == frame_id
        self.intervals.start(idx, valid=starts_clean)
        self.tracker.reset()
        self.view.reset()
        self.truck_median = TruckMedian(self.params.filter.truck_median_window)
        self.mode = Mode.MONITORING
        self._pending.append({"kind": "environment", "frame_id": frame_id,
                              "lanes": [int(l.lane_id) for l in lanes.lanes],
                              "mode": self.mode.value})

    def on_view_changed(self, frame_id: int, distance: int) -> List[dict]:
        events = [{"kind": "view_change", "frame_id": frame_id, "distance": distance}]
        if self.intervals is not None and self.intervals.current is not None:
            for rep in self.intervals.emit(valid=False):
                events.append(report_event(rep, frame_id, self.rate))
        self.tracker.reset()
        self.counter = None
        self.intervals = None
        self.view.reset()
        self.mode = Mode.AWAITING_ENVIRONMENT
        self.stats.view_changes += 1
        return events

    # -- per frame ---------------------------------------------------------

    def _interval_of(self, frame_id: int) -> int:
        return interval_index(frame_id, self.camera.fps, self.params.interval_minutes)

    def _interval_start(self, idx: int) -> int:
        return interval_start_frame(idx, self.camera.fps, self.params.interval_minutes)

    def _close_intervals(self, frame_id: int) -> List[dict]:
        """Emit reports for every interval that ended before ``frame_id``."""
        events = []
        idx = self._interval_of(frame_id)
        while self.intervals.current < idx:
            for rep in self.intervals.emit():
                events.append(report_event(rep, frame_id, self.rate))
            self.intervals.start(self.intervals.current + 1)
        return events

    def process_frame(self, frame: FrameInput, image=None) -> List[dict]:
        events, self._pending = self._pending, []
        self.stats.frames += 1
        fid = frame.frame_id
        if self.mode is Mode.AWAITING_ENVIRONMENT:
            return self._sorted(events)

        events.extend(self._close_intervals(fid))

        if image is not None and self.view.due(fid):
            change = self.view.observe(fid, image)
            if change is not None:
                events.extend(self.on_view_changed(fid, change.distance))
                return self._sorted(events)

        if not self.rate.should_process(fid):
            return self._sorted(events)

        started = self.clock()
        events.extend(self._track_and_count(frame))
        if self.params.replay:
            dt = frame.dt if frame.dt is not None else 1.0 / self.camera.fps
        else:
            dt = self.clock() - started
        previous_k = self.rate.K
        self.rate.record_and_update(dt)
        self.stats.processed += 1
        if self.rate.K != previous_k:
            events.append({"kind": "rate", "frame_id": fid, "K": self.rate.K,
                           "delta_t_ema": _r(self.rate.delta_t_ema, 6)})
        return self._sorted(events)

    def _track_and_count(self, frame: FrameInput) -> List[dict]:
        fid = frame.frame_id
        fp = self.params.filter
        rois = self.lane_config.rois
        valid = filter_valid(frame.detections, rois, self.truck_median.median, fp)
        valid = nms(valid, fp.nms_iou_threshold)
        det_in_roi = in_any_roi([d.bbox.center for d in frame.detections], rois)
        self.truck_median.update(
            d for d, ok in zip(frame.detections, det_in_roi)
            if ok and d.confidence >= fp.conf_threshold
        )
        confirmed = self.tracker.step(valid, self.rate.K)
        trk_in_roi = in_any_roi([t.bbox.center for t in confirmed], rois)
        in_roi = [t for t, ok in zip(confirmed, trk_in_roi) if ok]
        idx = self.intervals.current
        count_events = self.counter.process(in_roi, fid, idx)
        self.counter.forget({t.id for t in self.tracker.tracks})

        heights: Dict[int, List[float]] = {}
        for t in in_roi:
            a = self.counter.assignments.get(t.id)
            if a is not None and a.lane_id is not None:
                heights.setdefault(a.lane_id, []).append(t.bbox.h)
        self.intervals.add_occupancy(heights)

        out = []
        for ev in count_events:
            self.intervals.add_count(ev.lane_id)
            self.stats.counts += 1
            out.append({"kind": "count", "frame_id": ev.frame_id, "lane_id": int(ev.lane_id),
                        "track_id": int(ev.track_id), "interval_index": idx})
        return out

    def finish(self, end_frame: int) -> List[dict]:
        """Flush at end of stream; ``end_frame`` is one past the last frame."""
        events, self._pending = self._pending, []
        if self.mode is Mode.MONITORING:
            events.extend(self._close_intervals(end_frame))
            # An interval cut short by the end of the stream is flagged invalid.
            if self._interval_start(self.intervals.current) < end_frame:
                for rep in self.intervals.emit(valid=False):
                    events.append(report_event(rep, end_frame, self.rate))
        return self._sorted(events)

    @staticmethod
    def _sorted(events: List[dict]) -> List[dict]:
        return sorted(events, key=lambda e: (e["frame_id"], EVENT_ORDER[e["kind"]]))


def iter_frames(frames: Iterable[FrameInput], end_frame: Optional[int] = None):
    """Fill gaps so every frame id from 0 up to the stream end is visited."""
    expected = 0
    for frame in frames:
        while expected < frame.frame_id:
            yield FrameInput(expected)
            expected += 1
        yield frame
        expected = frame.frame_id + 1
    if end_frame is not None:
        while expected < end_frame:
            yield FrameInput(expected)
            expected += 1


def run(pipeline: Pipeline, frames: Iterable[FrameInput],
        images: Optional[Callable[[int], object]] = None,
        next_environments: Optional[List[LaneConfig]] = None,
        end_frame: Optional[int] = None) -> Iterable[dict]:
    """Drive ``pipeline`` over a frame stream, yielding output events in order.

    ``images(frame_id)`` returns the frame image or None. After a view change,
    the next configuration in ``next_environments`` (if any) is loaded on the
    following frame, standing in for the external environment learning step.
    """
    queue = list(next_environments or [])
    last = -1
    for frame in iter_frames(frames, end_frame):
        if pipeline.mode is Mode.AWAITING_ENVIRONMENT and queue:
            pipeline.load_environment(queue.pop(0), frame.frame_id)
        image = images(frame.frame_id) if images is not None else None
        yield from pipeline.process_frame(frame, image)
        last = frame.frame_id
    yield from pipeline.finish(last + 1)
