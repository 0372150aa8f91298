"""Drop invalid detections before tracking."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from lanewatch.association import iou_matrix
from lanewatch.errors import ConfigError
from lanewatch.geometry import Detection, Point, VehicleClass, points_in_polygon

# Truck samples needed before the oversize filter switches on.
MIN_TRUCK_SAMPLES = 20


@dataclass(frozen=True)
class FilterParams:
    conf_threshold: float = 0.25
    nms_iou_threshold: float = 0.45
    size_factor: float = 2.0
    truck_median_window: int = 500

    def __post_init__(self):
        for name in ("conf_threshold", "nms_iou_threshold"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {v}")
        if not self.size_factor > 1.0:
            raise ConfigError(f"size_factor must be > 1, got {self.size_factor}")
        if self.truck_median_window < 1:
            raise ConfigError("truck_median_window must be >= 1")


class TruckMedian:
    """Rolling median of truck box areas over the most recent samples."""

    def __init__(self, window: int = 500, min_samples: int = MIN_TRUCK_SAMPLES):
        self._areas = deque(maxlen=window)
        self.min_samples = min_samples

    def __len__(self):
        return len(self._areas)

    def update(self, detections: Iterable[Detection]) -> Optional[float]:
        for det in detections:
            if det.class_label is VehicleClass.TRUCK:
                self._areas.append(det.bbox.area)
        return self.median

    @property
    def median(self) -> Optional[float]:
        if len(self._areas) < self.min_samples:
            return None
        return float(np.median(self._areas))


def in_any_roi(points: Sequence[Point], rois: Sequence[Sequence[Point]]) -> List[bool]:
    """Per point, whether it lies in at least one ROI polygon."""
    if not points:
        return []
    hit = np.zeros(len(points), dtype=bool)
    for roi in rois:
        hit |= points_in_polygon(points, roi)
    return hit.tolist()


def filter_valid(detections: Sequence[Detection], rois: Sequence[Sequence[Point]],
                 truck_median_area: Optional[float],
                 params: FilterParams = FilterParams()) -> List[Detection]:
    if not rois:
        raise ConfigError("at least one ROI is required")
    inside = in_any_roi([det.bbox.center for det in detections], rois)
    kept = []
    for det, ok in zip(detections, inside):
        if det.confidence < params.conf_threshold or not ok:
            continue
        if (truck_median_area is not None
                and det.bbox.area > params.size_factor * truck_median_area):
            continue
        kept.append(det)
    return kept


def nms(detections: Sequence[Detection], iou_threshold: float = 0.45) -> List[Detection]:
    """Greedy class-agnostic suppression in descending confidence order.

    Ties in confidence keep input order, so output is deterministic.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    overlaps = iou_matrix([d.bbox for d in detections], [d.bbox for d in detections])
    kept: List[int] = []
    for i in order:
        if not kept or np.all(overlaps[i, kept] <= iou_threshold):
            kept.append(i)
    return [detections[i] for i in kept]
