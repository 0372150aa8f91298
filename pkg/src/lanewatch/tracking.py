"""Constant-velocity Kalman tracking with skip-aware prediction.

State layout is ``(cx, cy, a, h, v_cx, v_cy, v_a, v_h)`` with ``a = w / h``;
velocities are per input frame. Process and measurement noise scale with the
box height as in DeepSort.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence

import numpy as np
import scipy.linalg

from lanewatch.association import CiouParams, cascade_match
from lanewatch.errors import ConfigError
from lanewatch.geometry import BBox, Detection, TrackId

STD_WEIGHT_POSITION = 1.0 / 20
STD_WEIGHT_VELOCITY = 1.0 / 160
_MIN_SIZE = 1e-3

_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.eye(4, 8)


def measurement_from_bbox(box: BBox) -> np.ndarray:
    cx, cy = box.center
    return np.array([cx, cy, box.w / box.h, box.h])


def process_noise(h: float) -> np.ndarray:
    std = [
        STD_WEIGHT_POSITION * h, STD_WEIGHT_POSITION * h, 1e-2, STD_WEIGHT_POSITION * h,
        STD_WEIGHT_VELOCITY * h, STD_WEIGHT_VELOCITY * h, 1e-5, STD_WEIGHT_VELOCITY * h,
    ]
    return np.diag(np.square(std))


def measurement_noise(h: float) -> np.ndarray:
    std = [STD_WEIGHT_POSITION * h, STD_WEIGHT_POSITION * h, 1e-1, STD_WEIGHT_POSITION * h]
    return np.diag(np.square(std))


@dataclass
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @classmethod
    def initiate(cls, measurement: np.ndarray) -> "KalmanState":
        h = measurement[3]
        mean = np.concatenate([measurement, np.zeros(4)]).astype(float)
        std = [
            2 * STD_WEIGHT_POSITION * h, 2 * STD_WEIGHT_POSITION * h, 1e-2,
            2 * STD_WEIGHT_POSITION * h,
            10 * STD_WEIGHT_VELOCITY * h, 10 * STD_WEIGHT_VELOCITY * h, 1e-5,
            10 * STD_WEIGHT_VELOCITY * h,
        ]
        return cls(mean, np.diag(np.square(std)))

    def predict(self, steps: int = 1) -> None:
        """Advance ``steps`` frames, adding process noise once per frame."""
        for _ in range(steps):
            q = process_noise(self.mean[3])
            self.mean = _F @ self.mean
            self.covariance = _F @ self.covariance @ _F.T + q
        self.covariance = 0.5 * (self.covariance + self.covariance.T)

    def update(self, measurement: np.ndarray) -> None:
        proj_mean = _H @ self.mean
        s = _H @ self.covariance @ _H.T + measurement_noise(self.mean[3])
        chol = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
        gain = scipy.linalg.cho_solve(
            chol, (self.covariance @ _H.T).T, check_finite=False
        ).T
        self.mean = self.mean + gain @ (measurement - proj_mean)
        self.covariance = self.covariance - gain @ s @ gain.T
        self.covariance = 0.5 * (self.covariance + self.covariance.T)

    def to_bbox(self) -> BBox:
        cx, cy, a, h = self.mean[:4]
        h = max(h, _MIN_SIZE)
        w = max(a * h, _MIN_SIZE)
        return BBox.from_center(cx, cy, w, h)


class TrackStatus(str, enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


@dataclass(frozen=True)
class TrackerParams:
    max_age: int = 30
    n_init: int = 3
    ciou: CiouParams = CiouParams()

    def __post_init__(self):
        if self.max_age < 1 or self.n_init < 1:
            raise ConfigError("max_age and n_init must both be >= 1")


@dataclass
class Track:
    id: TrackId
    state: KalmanState
    n_init: int
    max_age: int
    hits: int = 1
    age: int = 1
    time_since_update: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    class_label: Optional[str] = None
    _box: Optional[BBox] = field(default=None, repr=False, compare=False)

    @property
    def bbox(self) -> BBox:
        # Cached until the next predict/update.
        if self._box is None:
            self._box = self.state.to_bbox()
        return self._box

    @property
    def is_confirmed(self) -> bool:
        return self.status is TrackStatus.CONFIRMED

    @property
    def is_deleted(self) -> bool:
        return self.status is TrackStatus.DELETED

    def predict(self, steps: int = 1) -> None:
        if self.is_deleted:
            raise ValueError(f"track {self.id} is deleted")
        if steps < 1:
            raise ValueError(f"steps must be >= 1, got {steps}")
        self.state.predict(steps)
        self._box = None
        self.age += steps
        self.time_since_update += 1

    def update(self, det: Detection) -> None:
        self.state.update(measurement_from_bbox(det.bbox))
        self._box = None
        self.hits += 1
        self.time_since_update = 0
        self.class_label = det.class_label.value
        if self.status is TrackStatus.TENTATIVE and self.hits >= self.n_init:
            self.status = TrackStatus.CONFIRMED

    def mark_missed(self) -> None:
        if self.status is TrackStatus.TENTATIVE:
            self.status = TrackStatus.DELETED
        elif self.time_since_update > self.max_age:
            self.status = TrackStatus.DELETED


class Tracker:
    """Multi-object tracker: one instance per stream.

    Track ids come from ``ids``; pass the same iterator to a replacement
    tracker (or call ``reset``) to keep ids unique across pipeline resets.
    """

    def __init__(self, params: TrackerParams = TrackerParams(),
                 ids: Optional[Iterator[int]] = None):
        self.params = params
        self.tracks: List[Track] = []
        self._ids = ids if ids is not None else itertools.count(1)

    def reset(self) -> None:
        self.tracks = []

    def initiate(self, det: Detection) -> Track:
        track = Track(
            id=TrackId(next(self._ids)),
            state=KalmanState.initiate(measurement_from_bbox(det.bbox)),
            n_init=self.params.n_init,
            max_age=self.params.max_age,
            class_label=det.class_label.value,
        )
        if track.hits >= track.n_init:
            track.status = TrackStatus.CONFIRMED
        self.tracks.append(track)
        return track

    def step(self, detections: Sequence[Detection], skipped: int = 0) -> List[Track]:
        """Advance all tracks by ``skipped + 1`` frames and associate.

        Returns the confirmed tracks updated by this step's detections.
        """
        for track in self.tracks:
            track.predict(skipped + 1)

        result = cascade_match(
            [t.bbox for t in self.tracks],
            [t.time_since_update for t in self.tracks],
            [d.bbox for d in detections],
            self.params.ciou,
            skipped,
        )
        for ti, di in result.matches:
            self.tracks[ti].update(detections[di])
        for ti in result.unmatched_tracks:
            self.tracks[ti].mark_missed()
        for di in result.unmatched_detections:
            self.initiate(detections[di])
        self.tracks = [t for t in self.tracks if not t.is_deleted]
        return [t for t in self.tracks if t.is_confirmed and t.time_since_update == 0]
