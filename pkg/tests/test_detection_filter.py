import itertools
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanewatch.association import iou
from lanewatch.detection_filter import FilterParams, TruckMedian, filter_valid, nms
from lanewatch.errors import ConfigError
from lanewatch.geometry import BBox, Detection, VehicleClass

ROI = [(0, 0), (100, 0), (100, 100), (0, 100)]


def d(x, y, w=10, h=10, conf=0.9, cls=VehicleClass.CAR):
    return Detection(0, BBox(x, y, w, h), cls, conf)


def truck(area):
    return d(0, 0, area, 1, cls=VehicleClass.TRUCK)


def test_truck_median_warm_up_and_value():
    tm = TruckMedian(window=500)
    assert tm.median is None
    tm.update([d(0, 0), d(5, 5)])
    assert len(tm) == 0
    tm.update(truck(a) for a in (100, 200, 300))
    assert tm.median is None            # below the 20-sample warm-up
    small = TruckMedian(window=500, min_samples=3)
    small.update(truck(a) for a in (100, 200, 300))
    assert small.median == 200


def test_truck_median_window_eviction():
    rng = np.random.default_rng(3)
    areas = rng.uniform(50, 5000, size=900).round(2).tolist()
    tm = TruckMedian(window=500)
    for i, a in enumerate(areas):
        tm.update([truck(a)])
        kept = areas[max(0, i - 499):i + 1]
        expected = statistics.median(sorted(kept)) if len(kept) >= 20 else None
        assert tm.median == (pytest.approx(expected) if expected is not None else None)
    assert len(tm) == 500


def test_filter_valid_rules():
    median = 100.0
    dets = [
        d(10, 10, 5, 50),                     # area 250 = 2.5 x median
        d(10, 10, 10, 20),                    # area 200 = exactly 2 x median, kept
        d(200, 200),                          # center outside the ROI
        d(10, 10, conf=0.24),
        d(10, 10, conf=0.25),
        d(95, 95),                            # center (100, 100) on the ROI corner
    ]
    kept = filter_valid(dets, [ROI], median)
    assert kept == [dets[1], dets[4], dets[5]]
    # Size rule is inactive without a median.
    assert dets[0] in filter_valid(dets, [ROI], None)
    other_roi = [(190, 190), (260, 190), (260, 260), (190, 260)]
    assert dets[2] in filter_valid(dets, [ROI, other_roi], None)
    with pytest.raises(ConfigError):
        filter_valid(dets, [], None)


def test_filter_params_validation():
    for bad in [dict(conf_threshold=0), dict(nms_iou_threshold=1.5), dict(size_factor=1.0),
                dict(truck_median_window=0)]:
        with pytest.raises(ConfigError):
            FilterParams(**bad)


detections = st.lists(
    st.builds(lambda x, y, w, h, c: d(x, y, w, h, conf=c),
              st.floats(-20, 120), st.floats(-20, 120), st.floats(1, 60), st.floats(1, 60),
              st.floats(0, 1)),
    max_size=25)


@settings(max_examples=200, deadline=None)
@given(detections, st.one_of(st.none(), st.floats(10, 2000)))
def test_filter_idempotent_and_monotone(dets, median):
    once = filter_valid(dets, [ROI], median)
    assert filter_valid(once, [ROI], median) == once
    strict = filter_valid(dets, [ROI], median, FilterParams(conf_threshold=0.6))
    assert set(map(id, strict)) <= set(map(id, once))


def test_nms_examples():
    a, b = d(0, 0, conf=0.9), d(0, 0, conf=0.8)
    assert nms([b, a]) == [a]
    c = d(50, 50, conf=0.3)
    assert nms([a, c]) == [a, c]


def test_nms_chain():
    A = d(0, 0, 10, 10, conf=0.9)
    B = d(0, 0, 20, 10, conf=0.8)
    C = d(10, 0, 10, 10, conf=0.7)
    assert iou(A.bbox, B.bbox) == 0.5 and iou(B.bbox, C.bbox) == 0.5
    assert iou(A.bbox, C.bbox) == 0.0
    kept = nms([C, B, A], 0.45)
    assert kept == [A, C]

    # Brute force: the feasible subset of maximum total confidence.
    boxes = [A, B, C]
    best = max(
        (s for r in range(4) for s in itertools.combinations(boxes, r)
         if all(iou(p.bbox, q.bbox) <= 0.45 for p, q in itertools.combinations(s, 2))),
        key=lambda s: sum(x.confidence for x in s))
    assert set(map(id, best)) == set(map(id, kept))


def test_nms_ties_keep_input_order():
    a, b = d(0, 0, conf=0.5), d(1, 0, conf=0.5)
    assert nms([a, b]) == [a]
    assert nms([b, a]) == [b]


@settings(max_examples=200, deadline=None)
@given(detections, st.floats(0.05, 1.0))
def test_nms_properties(dets, thr):
    kept = nms(dets, thr)
    ids = [id(x) for x in dets]
    assert all(id(k) in ids for k in kept)
    for p, q in itertools.combinations(kept, 2):
        assert iou(p.bbox, q.bbox) <= thr
    if dets:
        top = max(dets, key=lambda x: x.confidence)
        assert any(k.confidence == top.confidence for k in kept)
    # Every dropped box overlaps some kept box of at least its confidence.
    for x in dets:
        if all(x is not k for k in kept):
            assert any(iou(x.bbox, k.bbox) > thr and k.confidence >= x.confidence for k in kept)
