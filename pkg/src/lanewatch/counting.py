"""Lane assignment and once-only baseline counting of tracked vehicles."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from lanewatch.errors import ConfigError
from lanewatch.geometry import (
    LaneGeometry,
    LaneId,
    TrackId,
    lane_for_point,
    lanes_for_points,
    point_in_lane_band,
    point_segment_distance,
)
from lanewatch.tracking import Track


@dataclass(frozen=True)
class LaneAssignment:
    track_id: TrackId
    lane_id: Optional[LaneId]
    assigned_at_frame: int
    # Consecutive processed frames the center has been outside every band.
    misses: int = 0


@dataclass(frozen=True)
class CountEvent:
    lane_id: LaneId
    track_id: TrackId
    frame_id: int


@dataclass
class CountLedger:
    counted: Set[TrackId] = field(default_factory=set)
    per_lane_counts: Dict[LaneId, int] = field(default_factory=dict)
    per_interval_counts: Dict[Tuple[LaneId, int], int] = field(default_factory=dict)

    def record(self, event: CountEvent, interval_index: int) -> None:
        self.counted.add(event.track_id)
        self.per_lane_counts[event.lane_id] = self.per_lane_counts.get(event.lane_id, 0) + 1
        key = (event.lane_id, interval_index)
        self.per_interval_counts[key] = self.per_interval_counts.get(key, 0) + 1


class CarLength:
    """Average vehicle length in pixels.

    A fixed value when configured, otherwise the rolling median of confirmed
    track box heights.
    """

    def __init__(self, fixed: Optional[float] = None, window: int = 500):
        if fixed is not None and not fixed > 0:
            raise ConfigError(f"avg_car_length must be positive, got {fixed}")
        self.fixed = fixed
        self._heights = deque(maxlen=window)

    def observe(self, height: float) -> None:
        self._heights.append(height)

    def value(self, fallback: float) -> float:
        if self.fixed is not None:
            return self.fixed
        if not self._heights:
            return fallback
        return float(np.median(self._heights))


_LOOKUP = object()


def assign_lane(track: Track, lanes: Sequence[LaneGeometry],
                previous: Optional[LaneAssignment], frame_id: int,
                max_age: int = 30, found=_LOOKUP) -> LaneAssignment:
    """Lane whose band holds the track center, compared only with the last step.

    A center that falls outside every band keeps the previous lane for up to
    ``max_age`` consecutive processed frames.
    """
    lane = lane_for_point(track.bbox.center, lanes) if found is _LOOKUP else found
    if lane is not None:
        return LaneAssignment(track.id, lane.lane_id, frame_id)
    if previous is not None and previous.lane_id is not None and previous.misses < max_age:
        return LaneAssignment(track.id, previous.lane_id, previous.assigned_at_frame,
                              previous.misses + 1)
    return LaneAssignment(track.id, None, frame_id)


def try_count(track: Track, assignment: LaneAssignment, lanes: Dict[LaneId, LaneGeometry],
              ledger: CountLedger, car_length: float, frame_id: int,
              interval_index: int, in_band: Optional[bool] = None) -> Optional[CountEvent]:
    """Count the track once, for its lane, when its center sits in the lane
    band within ``car_length`` of the lane baseline."""
    if assignment.lane_id is None or track.id in ledger.counted:
        return None
    lane = lanes[assignment.lane_id]
    center = track.bbox.center
    if in_band is None:
        in_band = point_in_lane_band(center, lane)
    if not in_band:
        return None
    if point_segment_distance(center, *lane.baseline) > car_length:
        return None
    event = CountEvent(lane.lane_id, track.id, frame_id)
    ledger.record(event, interval_index)
    return event


class LaneCounter:
    """Per-stream lane assignment state plus the count ledger."""

    def __init__(self, lanes: Sequence[LaneGeometry], max_age: int = 30,
                 avg_car_length: Optional[float] = None):
        ids = [lane.lane_id for lane in lanes]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate lane ids: {ids}")
        self.lanes = list(lanes)
        self.lanes_by_id = {lane.lane_id: lane for lane in lanes}
        self.max_age = max_age
        self.car_length = CarLength(avg_car_length)
        self.ledger = CountLedger()
        self.assignments: Dict[TrackId, LaneAssignment] = {}

    def process(self, tracks: Sequence[Track], frame_id: int,
                interval_index: int) -> List[CountEvent]:
        for track in tracks:
            self.car_length.observe(track.bbox.h)
        events = []
        length = self.car_length.value(0.0)
        found = lanes_for_points([t.bbox.center for t in tracks], self.lanes)
        for track, lane in zip(tracks, found):
            assignment = assign_lane(track, self.lanes, self.assignments.get(track.id),
                                     frame_id, self.max_age, found=lane)
            self.assignments[track.id] = assignment
            event = try_count(track, assignment, self.lanes_by_id, self.ledger, length,
                              frame_id, interval_index, in_band=lane is not None)
            if event is not None:
                events.append(event)
        return events

    def forget(self, live_ids: Set[TrackId]) -> None:
        """Drop lane assignments of tracks the tracker no longer holds."""
        for tid in [t for t in self.assignments if t not in live_ids]:
            del self.assignments[tid]
