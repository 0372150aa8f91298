"""Box distances (IOU / CIOU) and detection-to-track assignment."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from lanewatch.errors import ConfigError
from lanewatch.geometry import BBox

_FOUR_OVER_PI2 = 4.0 / math.pi ** 2
_GATE_EPS = 1e-5


class CenterNorm(str, enum.Enum):
    """What the squared center distance is normalised by."""

    TRACK_DIAGONAL = "track_diagonal"
    ENCLOSING_DIAGONAL = "enclosing_diagonal"


@dataclass(frozen=True)
class CiouParams:
    pre_thre: float = 0.35
    c_mode: CenterNorm = CenterNorm.TRACK_DIAGONAL

    def __post_init__(self):
        if not 0.0 < self.pre_thre <= 2.0:
            raise ConfigError(f"pre_thre must be in (0, 2], got {self.pre_thre}")
        object.__setattr__(self, "c_mode", CenterNorm(self.c_mode))


@dataclass
class MatchResult:
    matches: List[Tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_detections: List[int] = field(default_factory=list)


def iou(a: BBox, b: BBox) -> float:
    if a == b:
        # x + w - x need not round back to w.
        return 1.0
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_distance(a: BBox, b: BBox) -> float:
    return 1.0 - iou(a, b)


def center_distance(det: BBox, trk: BBox,
                    c_mode: CenterNorm = CenterNorm.TRACK_DIAGONAL) -> float:
    """Squared center distance over a squared diagonal.

    ``TRACK_DIAGONAL`` divides by the track box diagonal; the standard
    ``ENCLOSING_DIAGONAL`` uses the smallest box enclosing both.
    """
    (dx, dy), (tx, ty) = det.center, trk.center
    rho2 = (dx - tx) ** 2 + (dy - ty) ** 2
    if CenterNorm(c_mode) is CenterNorm.TRACK_DIAGONAL:
        c2 = trk.w ** 2 + trk.h ** 2
    else:
        cw = max(det.x2, trk.x2) - min(det.x, trk.x)
        ch = max(det.y2, trk.y2) - min(det.y, trk.y)
        c2 = cw ** 2 + ch ** 2
    if c2 <= 0:
        raise ConfigError("zero-diagonal box in center distance")
    return rho2 / c2


def aspect_consistency(det: BBox, trk: BBox) -> float:
    return _FOUR_OVER_PI2 * (math.atan(det.w / det.h) - math.atan(trk.w / trk.h)) ** 2


def ciou_distance(det: BBox, trk: BBox, params: CiouParams = CiouParams()) -> float:
    """``1 - IOU + D + alpha * V``.

    alpha follows the usual CIOU trade-off ``V / ((1 - IOU) + V)`` and is zero
    whenever IOU < 0.5.
    """
    overlap = iou(det, trk)
    d = center_distance(det, trk, params.c_mode)
    v = aspect_consistency(det, trk)
    alpha = 0.0
    if overlap >= 0.5 and v > 0.0:
        alpha = v / ((1.0 - overlap) + v)
    return 1.0 - overlap + d + alpha * v


def adaptive_threshold(pre_thre: float, skipped: int) -> float:
    if skipped < 0:
        raise ValueError(f"skipped frame count must be >= 0, got {skipped}")
    return pre_thre * (skipped + 1)


def solve_assignment(costs, gate: float) -> MatchResult:
    """Minimum-cost one-to-one assignment; matched pairs costing more than
    ``gate`` are split back into unmatched rows and columns.

    Costs above the gate are clamped to just over it before solving, so one
    far-away pair cannot pull the optimum onto otherwise bad pairings.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2:
        costs = costs.reshape(0, 0)
    n_rows, n_cols = costs.shape
    if n_rows == 0 or n_cols == 0:
        return MatchResult([], list(range(n_rows)), list(range(n_cols)))
    if not np.all(np.isfinite(costs)):
        raise ValueError("cost matrix must be finite")

    solve_costs = costs
    if math.isfinite(gate):
        solve_costs = np.minimum(costs, gate + _GATE_EPS)
    rows, cols = linear_sum_assignment(solve_costs)
    result = MatchResult()
    matched_rows, matched_cols = set(), set()
    for r, c in zip(rows.tolist(), cols.tolist()):
        if costs[r, c] > gate:
            continue
        result.matches.append((r, c))
        matched_rows.add(r)
        matched_cols.add(c)
    result.unmatched_tracks = [r for r in range(n_rows) if r not in matched_rows]
    result.unmatched_detections = [c for c in range(n_cols) if c not in matched_cols]
    return result


def _box_array(boxes: Sequence[BBox]) -> np.ndarray:
    return np.array([[b.x, b.y, b.w, b.h] for b in boxes], dtype=float).reshape(-1, 4)


def iou_matrix(a_boxes: Sequence[BBox], b_boxes: Sequence[BBox]) -> np.ndarray:
    """Pairwise ``iou`` between two box lists."""
    a = _box_array(a_boxes)[:, None, :]
    b = _box_array(b_boxes)[None, :, :]
    iw = np.clip(np.minimum(a[..., 0] + a[..., 2], b[..., 0] + b[..., 2])
                 - np.maximum(a[..., 0], b[..., 0]), 0.0, None)
    ih = np.clip(np.minimum(a[..., 1] + a[..., 3], b[..., 1] + b[..., 3])
                 - np.maximum(a[..., 1], b[..., 1]), 0.0, None)
    inter = iw * ih
    out = inter / (a[..., 2] * a[..., 3] + b[..., 2] * b[..., 3] - inter)
    return np.where(np.all(a == b, axis=-1), 1.0, out)


def ciou_cost_matrix(track_boxes: Sequence[BBox], det_boxes: Sequence[BBox],
                     params: CiouParams = CiouParams()) -> np.ndarray:
    """``ciou_distance`` for every (track, detection) pair, vectorised."""
    t = _box_array(track_boxes)[:, None, :]
    d = _box_array(det_boxes)[None, :, :]
    tx, ty, tw, th = t[..., 0], t[..., 1], t[..., 2], t[..., 3]
    dx, dy, dw, dh = d[..., 0], d[..., 1], d[..., 2], d[..., 3]

    overlap = iou_matrix(track_boxes, det_boxes)

    rho2 = (dx + dw / 2 - tx - tw / 2) ** 2 + (dy + dh / 2 - ty - th / 2) ** 2
    if params.c_mode is CenterNorm.TRACK_DIAGONAL:
        c2 = tw ** 2 + th ** 2 + 0.0 * dw
    else:
        cw = np.maximum(tx + tw, dx + dw) - np.minimum(tx, dx)
        ch = np.maximum(ty + th, dy + dh) - np.minimum(ty, dy)
        c2 = cw ** 2 + ch ** 2
    dist = rho2 / c2

    v = _FOUR_OVER_PI2 * (np.arctan(dw / dh) - np.arctan(tw / th)) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where((overlap >= 0.5) & (v > 0), v / ((1.0 - overlap) + v), 0.0)
    return 1.0 - overlap + dist + alpha * v


def cascade_match(track_boxes: Sequence[BBox], track_ages: Sequence[int],
                  det_boxes: Sequence[BBox], params: CiouParams,
                  skipped: int) -> MatchResult:
    """Match detections to tracks, most recently updated tracks first.

    ``track_ages`` holds each track's ``time_since_update``. Each age group is
    solved against the detections left over by younger groups, all under the
    gate ``adaptive_threshold(params.pre_thre, skipped)``.
    """
    if len(track_boxes) != len(track_ages):
        raise ValueError("track_boxes and track_ages differ in length")
    gate = adaptive_threshold(params.pre_thre, skipped)
    remaining = list(range(len(det_boxes)))
    matches: List[Tuple[int, int]] = []
    unmatched_tracks: List[int] = []

    groups: Dict[int, List[int]] = {}
    for idx, age in enumerate(track_ages):
        groups.setdefault(age, []).append(idx)

    for age in sorted(groups):
        group = groups[age]
        if not remaining:
            unmatched_tracks.extend(group)
            continue
        costs = ciou_cost_matrix([track_boxes[i] for i in group],
                                 [det_boxes[j] for j in remaining], params)
        res = solve_assignment(costs, gate)
        matches.extend((group[r], remaining[c]) for r, c in res.matches)
        unmatched_tracks.extend(group[r] for r in res.unmatched_tracks)
        remaining = [remaining[c] for c in res.unmatched_detections]

    return MatchResult(sorted(matches), sorted(unmatched_tracks), remaining)
