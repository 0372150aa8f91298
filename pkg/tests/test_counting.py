import itertools

import numpy as np
import pytest

from lanewatch.counting import (
    CarLength,
    CountLedger,
    LaneAssignment,
    LaneCounter,
    assign_lane,
    try_count,
)
from lanewatch.errors import ConfigError
from lanewatch.formats import lane_config_from_dict
from lanewatch.geometry import BBox, Detection
from lanewatch.simulator import straight_lanes
from lanewatch.tracking import KalmanState, Track, TrackStatus, measurement_from_bbox

LANES = lane_config_from_dict(straight_lanes()).lanes
BY_ID = {lane.lane_id: lane for lane in LANES}
_ids = itertools.count(1)


def track_at(cx, cy, h=60.0, tid=None):
    box = BBox.from_center(cx, cy, 50.0, h)
    return Track(tid if tid is not None else next(_ids),
                 KalmanState.initiate(measurement_from_bbox(box)), n_init=3, max_age=30,
                 status=TrackStatus.CONFIRMED)


def test_assign_lane_examples():
    t = track_at(640, 500)
    a = assign_lane(t, LANES, None, 10)
    assert a.lane_id == 2 and a.misses == 0
    t3 = track_at(760, 480, tid=t.id)
    b = assign_lane(t3, LANES, a, 11)
    assert b.lane_id == 3 and b.assigned_at_frame == 11


def test_assign_lane_retention_and_expiry():
    t = track_at(640, 500)
    a = assign_lane(t, LANES, None, 0)
    outside = track_at(300, 500, tid=t.id)
    for k in range(1, 31):
        a = assign_lane(outside, LANES, a, k, max_age=30)
        assert a.lane_id == 2 and a.misses == k
    a = assign_lane(outside, LANES, a, 31, max_age=30)
    assert a.lane_id is None
    assert assign_lane(outside, LANES, None, 0).lane_id is None


def test_try_count_rules():
    ledger = CountLedger()
    t = track_at(640, 430)
    a = LaneAssignment(t.id, 2, 0)
    ev = try_count(t, a, BY_ID, ledger, 60.0, 5, 0)
    assert ev is not None and (ev.lane_id, ev.track_id, ev.frame_id) == (2, t.id, 5)
    for f in range(6, 26):
        assert try_count(t, a, BY_ID, ledger, 60.0, f, 0) is None
    assert ledger.per_lane_counts == {2: 1}
    assert ledger.per_interval_counts == {(2, 0): 1}

    far = track_at(640, 470)                      # 70 px from the baseline
    assert try_count(far, LaneAssignment(far.id, 2, 0), BY_ID, ledger, 60.0, 1, 0) is None
    assert try_count(far, LaneAssignment(far.id, None, 0), BY_ID, ledger, 60.0, 1, 0) is None
    # Assigned to lane 2 by retention but the center is outside its band.
    off = track_at(300, 400)
    assert try_count(off, LaneAssignment(off.id, 2, 0, misses=3), BY_ID, ledger, 60.0, 1, 0) \
        is None


def test_car_length():
    assert CarLength(50.0).value(10.0) == 50.0
    cl = CarLength(window=3)
    assert cl.value(42.0) == 42.0
    for h in (10, 20, 30, 100):
        cl.observe(h)
    assert cl.value(0.0) == 30.0
    with pytest.raises(ConfigError):
        CarLength(0.0)


def test_counter_rejects_duplicate_lanes():
    with pytest.raises(ConfigError):
        LaneCounter([LANES[0], LANES[0]])


def drive(counter, starts, speed, K=0, frames=400, lane_x=(520, 640, 760)):
    """Vehicles travel up the image at ``speed`` px/frame, observed every K+1 frames."""
    events = []
    tracks = {}
    for f in range(0, frames, K + 1):
        live = []
        for i, (lane, y0) in enumerate(starts):
            y = y0 - speed * f
            if 100 < y < 700:
                tracks.setdefault(i, next(_ids))
                live.append(track_at(lane_x[lane - 1], y, tid=tracks[i]))
        events += counter.process(live, f, 0)
    return events, tracks


def test_each_vehicle_counted_once_per_lane():
    counter = LaneCounter(LANES)
    starts = [(1, 690), (1, 900), (2, 695), (3, 1000), (3, 1200)]
    events, tracks = drive(counter, starts, speed=3.0)
    assert sorted(e.lane_id for e in events) == [1, 1, 2, 3, 3]
    assert len({e.track_id for e in events}) == len(events) <= len(tracks)
    for lane in (1, 2, 3):
        frames = [e.frame_id for e in events if e.lane_id == lane]
        assert frames == sorted(frames)


def test_large_skip_can_jump_the_counting_zone():
    # Zone is y in [340, 460]; at 30 px/frame with K=4 the processed positions
    # are 480 then 330, so the vehicle is never seen inside it.
    counter = LaneCounter(LANES, avg_car_length=60.0)
    events, _ = drive(counter, [(2, 480)], speed=30.0, K=4, frames=20)
    assert events == []
    counter = LaneCounter(LANES, avg_car_length=60.0)
    events, _ = drive(counter, [(2, 480)], speed=30.0, K=0, frames=20)
    assert len(events) == 1


def test_jitter_outside_bands_keeps_lane_and_count():
    counter = LaneCounter(LANES, avg_car_length=60.0)
    tid = next(_ids)
    rng = np.random.default_rng(0)
    events = []
    for f, y in enumerate(range(600, 200, -4)):
        # Every fifth frame the center jumps just left of all lanes.
        x = 455.0 if f % 5 == 4 else 520.0 + rng.normal(0, 1)
        events += counter.process([track_at(x, y, tid=tid)], f, 0)
        assert counter.assignments[tid].lane_id == 1
    assert [e.lane_id for e in events] == [1]


def test_forget_drops_dead_tracks():
    counter = LaneCounter(LANES)
    t = track_at(640, 500)
    counter.process([t], 0, 0)
    counter.forget(set())
    assert counter.assignments == {}
