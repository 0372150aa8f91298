"""Camera view change detection with 64-bit perceptual hashes.

Only the top fifth of the frame (sky and the far side of the road) is
hashed, so traffic in the lower part of the image never moves the hash.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from lanewatch.errors import ConfigError, InputError

_LUMA = np.array([0.299, 0.587, 0.114])


class HashKind(str, enum.Enum):
    AVERAGE = "average_hash"
    DIFFERENCE = "difference_hash"


@dataclass(frozen=True)
class ViewCheckParams:
    check_interval_frames: int = 50
    hash_distance_threshold: int = 12
    hash_kind: HashKind = HashKind.DIFFERENCE

    def __post_init__(self):
        if not 1 <= self.hash_distance_threshold <= 64:
            raise ConfigError("hash_distance_threshold must be in [1, 64]")
        if self.check_interval_frames < 1:
            raise ConfigError("check_interval_frames must be >= 1")
        object.__setattr__(self, "hash_kind", HashKind(self.hash_kind))


@dataclass(frozen=True)
class FrameHash:
    bits: int
    frame_id: int
    region: Tuple[int, int, int, int]  # x, y, w, h of the hashed crop


@dataclass(frozen=True)
class ViewChanged:
    frame_id: int
    distance: int


def to_gray(image) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., :3] @ _LUMA
    if img.ndim != 2:
        raise InputError(f"expected a 2-D or colour image, got shape {img.shape}")
    return img


def block_mean(img: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Downscale by averaging over a ``rows`` x ``cols`` grid of pixel blocks."""
    h, w = img.shape
    r_edges = np.linspace(0, h, rows + 1).round().astype(int)
    c_edges = np.linspace(0, w, cols + 1).round().astype(int)
    # Row/column prefix sums make each block mean O(1).
    integral = np.zeros((h + 1, w + 1))
    integral[1:, 1:] = img.cumsum(0).cumsum(1)
    out = np.empty((rows, cols))
    for i in range(rows):
        r0, r1 = r_edges[i], r_edges[i + 1]
        for j in range(cols):
            c0, c1 = c_edges[j], c_edges[j + 1]
            total = integral[r1, c1] - integral[r0, c1] - integral[r1, c0] + integral[r0, c0]
            out[i, j] = total / ((r1 - r0) * (c1 - c0))
    return out


def _pack(bits: np.ndarray) -> int:
    value = 0
    for b in bits.ravel():
        value = (value << 1) | int(b)
    return value


def hash_frame(image, params: ViewCheckParams = ViewCheckParams(),
               frame_id: int = 0) -> FrameHash:
    gray = to_gray(image)
    crop_h = gray.shape[0] // 5
    cols = 9 if params.hash_kind is HashKind.DIFFERENCE else 8
    if crop_h < 8 or gray.shape[1] < cols:
        raise InputError(f"image {gray.shape} too small to hash its top fifth")
    crop = gray[:crop_h]
    small = block_mean(crop, 8, cols)
    if params.hash_kind is HashKind.DIFFERENCE:
        bits = small[:, 1:] > small[:, :-1]
    else:
        bits = small > small.mean()
    return FrameHash(_pack(bits), frame_id, (0, 0, gray.shape[1], crop_h))


def hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


def check(reference: FrameHash, image, params: ViewCheckParams = ViewCheckParams(),
          frame_id: int = 0) -> Optional[ViewChanged]:
    """Compare a frame against the reference; a ``ViewChanged`` when the
    Hamming distance exceeds the threshold, otherwise None."""
    current = hash_frame(image, params, frame_id)
    distance = hamming(reference.bits, current.bits)
    if distance > params.hash_distance_threshold:
        return ViewChanged(frame_id, distance)
    return None


class ViewMonitor:
    """Holds the reference hash and decides when a check is due."""

    def __init__(self, params: ViewCheckParams = ViewCheckParams()):
        self.params = params
        self.reference: Optional[FrameHash] = None

    def reset(self) -> None:
        self.reference = None

    def due(self, frame_id: int) -> bool:
        if self.reference is None:
            return True
        elapsed = frame_id - self.reference.frame_id
        return elapsed > 0 and elapsed % self.params.check_interval_frames == 0

    def observe(self, frame_id: int, image) -> Optional[ViewChanged]:
        if self.reference is None:
            self.reference = hash_frame(image, self.params, frame_id)
            return None
        return check(self.reference, image, self.params, frame_id)
