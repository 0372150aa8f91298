"""Shared geometric and domain vocabulary.

Image convention throughout: origin at the top-left corner, x grows to the
right, y grows downward, all values in pixels.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NewType, Sequence, Tuple

import numpy as np
from shapely.geometry import Polygon

from lanewatch.errors import ConfigError

Point = Tuple[float, float]

TrackId = NewType("TrackId", int)
LaneId = NewType("LaneId", int)

# Points closer than this (pixels) to a boundary line count as lying on it.
_ON_LINE_TOL = 1e-9


class VehicleClass(str, enum.Enum):
    CAR = "car"
    TRUCK = "truck"
    BUS = "bus"
    MOTORCYCLE = "motorcycle"
    OTHER = "other"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box stored as top-left corner plus size."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError(f"non-finite box coordinates: {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size: {self}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> Point:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def translated(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x + dx, self.y + dy, self.w, self.h)


@dataclass(frozen=True)
class Detection:
    frame_id: int
    bbox: BBox
    class_label: VehicleClass = VehicleClass.CAR
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")
        if self.frame_id < 0:
            raise ValueError(f"negative frame id: {self.frame_id}")


@dataclass(frozen=True)
class CameraConfig:
    fps: float
    frame_width: int
    frame_height: int

    def __post_init__(self):
        if not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ConfigError("frame dimensions must be positive")


def point_in_polygon(p: Point, poly: Sequence[Point]) -> bool:
    """Even-odd containment test; points on an edge count as inside."""
    n = len(poly)
    if n < 3:
        raise ConfigError(f"polygon needs at least 3 vertices, got {n}")
    px, py = p
    inside = False
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        if _on_segment(px, py, ax, ay, bx, by):
            return True
        if (ay > py) != (by > py):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_cross:
                inside = not inside
    return inside


def points_in_polygon(points, poly: Sequence[Point]) -> np.ndarray:
    """Vectorised ``point_in_polygon`` over an (N, 2) array of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(poly) < 3:
        raise ConfigError(f"polygon needs at least 3 vertices, got {len(poly)}")
    a = np.asarray(poly, dtype=float)
    b = np.roll(a, -1, axis=0)
    px, py = pts[:, :1], pts[:, 1:]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    seg_len = np.hypot(bx - ax, by - ay)
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    with np.errstate(invalid="ignore", divide="ignore"):
        near_line = np.where(seg_len > 0, np.abs(cross) / seg_len <= _ON_LINE_TOL,
                             (px == ax) & (py == ay))
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    on_edge = (near_line
               & (px >= np.minimum(ax, bx) - _ON_LINE_TOL)
               & (px <= np.maximum(ax, bx) + _ON_LINE_TOL)
               & (py >= np.minimum(ay, by) - _ON_LINE_TOL)
               & (py <= np.maximum(ay, by) + _ON_LINE_TOL))
    crossings = ((ay > py) != (by > py)) & (px < x_cross)
    return on_edge.any(axis=1) | (crossings.sum(axis=1) % 2 == 1)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    seg_len = math.hypot(bx - ax, by - ay)
    if seg_len == 0.0:
        return px == ax and py == ay
    if abs(cross) / seg_len > _ON_LINE_TOL:
        return False
    return (min(ax, bx) - _ON_LINE_TOL <= px <= max(ax, bx) + _ON_LINE_TOL
            and min(ay, by) - _ON_LINE_TOL <= py <= max(ay, by) + _ON_LINE_TOL)


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    """Euclidean distance from ``p`` to the closed segment ``ab``."""
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _signed_offset(p: Point, polyline: Sequence[Point], direction: Point) -> float:
    """Signed distance of ``p`` from the nearest segment of ``polyline``.

    Segments are oriented along the direction of travel, so a positive value
    means ``p`` lies to the driver's right of the line (image coordinates).
    """
    best = None
    for a, b in zip(polyline[:-1], polyline[1:]):
        d = point_segment_distance(p, a, b)
        if best is None or d < best[0]:
            best = (d, a, b)
    _, a, b = best
    sx, sy = b[0] - a[0], b[1] - a[1]
    if sx * direction[0] + sy * direction[1] < 0:
        a, b = b, a
        sx, sy = -sx, -sy
    cross = sx * (p[1] - a[1]) - sy * (p[0] - a[0])
    return cross / math.hypot(sx, sy)


def _signed_offsets(points: np.ndarray, polyline: Sequence[Point],
                    direction: Point) -> np.ndarray:
    """Vectorised ``_signed_offset`` over an (N, 2) array of points."""
    poly = np.asarray(polyline, dtype=float)
    a, b = poly[:-1], poly[1:]
    seg = b - a
    flip = seg @ np.asarray(direction, dtype=float) < 0
    rel = points[:, None, :] - a[None, :, :]
    seg2 = (seg ** 2).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.clip((rel * seg[None]).sum(axis=2) / seg2[None], 0.0, 1.0)
    t = np.where(seg2[None] == 0.0, 0.0, t)
    near = rel - t[..., None] * seg[None]
    nearest = np.argmin(np.hypot(near[..., 0], near[..., 1]), axis=1)
    s = seg[nearest]
    # Orient the chosen segment along travel; flipping swaps its start point.
    start = np.where(flip[nearest, None], b[nearest], a[nearest])
    s = np.where(flip[nearest, None], -s, s)
    d = points - start
    return (s[:, 0] * d[:, 1] - s[:, 1] * d[:, 0]) / np.hypot(s[:, 0], s[:, 1])


@dataclass(frozen=True)
class LaneGeometry:
    """One lane: boundaries, counting baseline and travel direction.

    ``left_boundary`` and ``right_boundary`` are named from the driver's point
    of view. A lane owns its right boundary, so a point on the line shared by
    two neighbouring lanes belongs to the lane on the left.
    """

    lane_id: LaneId
    left_boundary: Tuple[Point, ...]
    right_boundary: Tuple[Point, ...]
    baseline: Tuple[Point, Point]
    direction: Point
    roi: Tuple[Point, ...]
    _band_height: float = field(default=0.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        # Normalise containers so lanes built from lists stay hashable.
        for name in ("left_boundary", "right_boundary", "baseline", "roi"):
            object.__setattr__(
                self, name, tuple((float(x), float(y)) for x, y in getattr(self, name))
            )
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))
        if len(self.left_boundary) < 2 or len(self.right_boundary) < 2:
            raise ConfigError(f"lane {self.lane_id}: boundaries need >= 2 points")
        if len(self.baseline) != 2:
            raise ConfigError(f"lane {self.lane_id}: baseline must have 2 points")
        if len(self.roi) < 3:
            raise ConfigError(f"lane {self.lane_id}: ROI needs >= 3 vertices")
        if abs(math.hypot(*self.direction) - 1.0) > 1e-9:
            raise ConfigError(f"lane {self.lane_id}: direction must be a unit vector")
        for end in self.baseline:
            if not point_in_polygon(end, self.roi):
                raise ConfigError(f"lane {self.lane_id}: baseline end {end} outside ROI")
        band = Polygon(list(self.left_boundary) + list(reversed(self.right_boundary)))
        if not band.is_valid:
            raise ConfigError(f"lane {self.lane_id}: lane band self-intersects")
        clipped = band.intersection(Polygon(self.roi))
        height = 0.0 if clipped.is_empty else clipped.bounds[3] - clipped.bounds[1]
        object.__setattr__(self, "_band_height", float(height))

    @property
    def band_height(self) -> float:
        """Vertical pixel extent of the lane band clipped to the ROI."""
        return self._band_height

    def centerline(self) -> Tuple[Point, ...]:
        if len(self.left_boundary) != len(self.right_boundary):
            raise ConfigError(
                f"lane {self.lane_id}: centerline needs equal-length boundaries"
            )
        return tuple(
            ((lx + rx) / 2.0, (ly + ry) / 2.0)
            for (lx, ly), (rx, ry) in zip(self.left_boundary, self.right_boundary)
        )


def point_in_lane_band(p: Point, lane: LaneGeometry) -> bool:
    if not point_in_polygon(p, lane.roi):
        return False
    left = _signed_offset(p, lane.left_boundary, lane.direction)
    right = _signed_offset(p, lane.right_boundary, lane.direction)
    return left > _ON_LINE_TOL and right <= _ON_LINE_TOL


def points_in_lane_band(points, lane: LaneGeometry) -> np.ndarray:
    """Vectorised ``point_in_lane_band`` over an (N, 2) array of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    left = _signed_offsets(pts, lane.left_boundary, lane.direction)
    right = _signed_offsets(pts, lane.right_boundary, lane.direction)
    return points_in_polygon(pts, lane.roi) & (left > _ON_LINE_TOL) & (right <= _ON_LINE_TOL)


def lanes_for_points(points, lanes: Sequence[LaneGeometry]) -> list:
    """``lane_for_point`` for every point; entries are lanes or None."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    found = [None] * len(pts)
    for lane in lanes:
        for i in np.flatnonzero(points_in_lane_band(pts, lane)):
            if found[i] is None:
                found[i] = lane
    return found


def lane_for_point(p: Point, lanes: Sequence[LaneGeometry]):
    """Return the lane whose band contains ``p``, or None."""
    for lane in lanes:
        if point_in_lane_band(p, lane):
            return lane
    return None
