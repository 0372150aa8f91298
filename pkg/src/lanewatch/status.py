"""Per-lane flow rate, occupancy and traffic status over fixed intervals."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from lanewatch.errors import ConfigError
from lanewatch.geometry import LaneGeometry, LaneId


class TrafficStatus(str, enum.Enum):
    NORMAL = "Normal"
    SLOW = "Slow"
    JAM = "Jam"


@dataclass(frozen=True)
class LaneReport:
    lane_id: LaneId
    interval_index: int
    interval_minutes: float
    count: int
    flow_rate_vph: float
    occupancy_raw: float
    occupancy: float
    status: TrafficStatus
    valid: bool = True


def flow_rate(count: int, interval_minutes: float) -> float:
    if not interval_minutes > 0:
        raise ConfigError(f"interval length must be positive, got {interval_minutes}")
    return count * 60 / interval_minutes


def occupancy(heights: Iterable[float], lane_height: float) -> Tuple[float, float]:
    """Summed box heights over the lane's pixel height: ``(raw, clamped)``."""
    if not lane_height > 0:
        raise ConfigError(f"lane height must be positive, got {lane_height}")
    raw = sum(heights) / lane_height
    return raw, min(raw, 1.0)


def classify(flow_vph: float, occ: float) -> TrafficStatus:
    # Strict inequalities: boundary values fall through to Normal.
    if flow_vph < 600 and occ > 0.6:
        return TrafficStatus.JAM
    if 600 < flow_vph < 900 and 0.4 < occ < 0.6:
        return TrafficStatus.SLOW
    return TrafficStatus.NORMAL


def interval_index(frame_id: int, fps: float, interval_minutes: float) -> int:
    """Interval holding ``frame_id`` on the stream clock ``frame_id / fps``."""
    frames_per_interval = fps * interval_minutes * 60
    return math.floor(frame_id / frames_per_interval + 1e-9)


def interval_start_frame(index: int, fps: float, interval_minutes: float) -> int:
    """First frame id belonging to interval ``index``."""
    frames_per_interval = fps * interval_minutes * 60
    return math.ceil(index * frames_per_interval - 1e-9)


class IntervalAccumulator:
    """Counts and occupancy samples for the interval in progress."""

    def __init__(self, lanes: Sequence[LaneGeometry], interval_minutes: float = 0.5):
        if not interval_minutes > 0:
            raise ConfigError(f"interval length must be positive, got {interval_minutes}")
        self.lanes = list(lanes)
        self.interval_minutes = interval_minutes
        self.current: Optional[int] = None
        self.valid = True
        self._reset_counters()

    def _reset_counters(self) -> None:
        self.counts: Dict[LaneId, int] = {lane.lane_id: 0 for lane in self.lanes}
        self.occ_sum: Dict[LaneId, float] = {lane.lane_id: 0.0 for lane in self.lanes}
        self.samples = 0

    def start(self, index: int, valid: bool = True) -> None:
        self.current = index
        self.valid = valid
        self._reset_counters()

    def add_count(self, lane_id: LaneId) -> None:
        self.counts[lane_id] += 1

    def add_occupancy(self, heights_by_lane: Dict[LaneId, List[float]]) -> None:
        for lane in self.lanes:
            raw, _ = occupancy(heights_by_lane.get(lane.lane_id, ()), lane.band_height)
            self.occ_sum[lane.lane_id] += raw
        self.samples += 1

    def emit(self, valid: Optional[bool] = None) -> List[LaneReport]:
        """Close the current interval and return one report per lane."""
        valid = self.valid if valid is None else (valid and self.valid)
        reports = []
        for lane in self.lanes:
            lid = lane.lane_id
            count = self.counts[lid]
            fr = flow_rate(count, self.interval_minutes)
            raw = self.occ_sum[lid] / self.samples if self.samples else 0.0
            occ = min(raw, 1.0)
            reports.append(LaneReport(lid, self.current, self.interval_minutes, count, fr,
                                      raw, occ, classify(fr, occ), valid))
        self._reset_counters()
        return reports
