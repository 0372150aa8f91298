"""Counting accuracy, mean estimation accuracy (MEA) and flow-rate RMSE."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence

from lanewatch.errors import EvaluationError


@dataclass
class EvalResult:
    counting_accuracy: float
    mea: float
    rmse: float
    m: int
    system_total: int
    truth_total: int
    per_lane: Dict[int, dict] = field(default_factory=dict)
    status_accuracy: float = None


def counting_accuracy(system_total: float, gt_total: float) -> float:
    """Smaller count over the larger; 1.0 when both are zero."""
    if system_total < 0 or gt_total < 0:
        raise EvaluationError("counts must be non-negative")
    hi = max(system_total, gt_total)
    if hi == 0:
        return 1.0
    return min(system_total, gt_total) / hi


def _check_lanes(system: Mapping, truth: Mapping) -> None:
    if set(system) != set(truth):
        raise EvaluationError(
            f"lane sets differ: system {sorted(system)} vs truth {sorted(truth)}"
        )


def mea(system_rates: Mapping, truth_rates: Mapping) -> float:
    _check_lanes(system_rates, truth_rates)
    sys_sum = sum(system_rates.values())
    gt_sum = sum(truth_rates.values())
    if gt_sum <= 0:
        raise EvaluationError("ground-truth flow rates sum to zero")
    return min(sys_sum, gt_sum) / max(sys_sum, gt_sum)


def rmse(system_rates: Mapping, truth_rates: Mapping) -> float:
    _check_lanes(system_rates, truth_rates)
    m = len(truth_rates)
    if m == 0:
        raise EvaluationError("no lanes to evaluate")
    sq = sum((system_rates[k] - truth_rates[k]) ** 2 for k in truth_rates)
    return math.sqrt(sq / m)


def evaluate(system_counts: Mapping[int, Sequence[int]],
             truth_counts: Mapping[int, Sequence[int]],
             interval_minutes: float,
             system_status: Mapping[int, Sequence[str]] = None,
             truth_status: Mapping[int, Sequence[str]] = None) -> EvalResult:
    """Score per-lane interval counts against ground truth.

    Each lane's flow rate is taken over the whole evaluated window, i.e. the
    mean of its interval flow rates.
    """
    _check_lanes(system_counts, truth_counts)
    for lane in truth_counts:
        if len(system_counts[lane]) != len(truth_counts[lane]):
            raise EvaluationError(
                f"lane {lane}: {len(system_counts[lane])} system intervals vs "
                f"{len(truth_counts[lane])} truth intervals"
            )
    per_lane = {}
    sys_rates, gt_rates = {}, {}
    for lane in sorted(truth_counts):
        s, g = system_counts[lane], truth_counts[lane]
        minutes = interval_minutes * len(g)
        sys_rates[lane] = sum(s) * 60 / minutes if minutes else 0.0
        gt_rates[lane] = sum(g) * 60 / minutes if minutes else 0.0
        per_lane[lane] = {
            "system_count": int(sum(s)),
            "truth_count": int(sum(g)),
            "counting_accuracy": counting_accuracy(sum(s), sum(g)),
            "system_flow_vph": sys_rates[lane],
            "truth_flow_vph": gt_rates[lane],
            "interval_system_counts": list(s),
            "interval_truth_counts": list(g),
        }
    sys_total = sum(sum(v) for v in system_counts.values())
    gt_total = sum(sum(v) for v in truth_counts.values())

    status_acc = None
    if system_status is not None and truth_status is not None:
        pairs = [(a, b) for lane in truth_status
                 for a, b in zip(system_status[lane], truth_status[lane])]
        if pairs:
            status_acc = sum(a == b for a, b in pairs) / len(pairs)

    return EvalResult(
        counting_accuracy=counting_accuracy(sys_total, gt_total),
        mea=mea(sys_rates, gt_rates),
        rmse=rmse(sys_rates, gt_rates),
        m=len(truth_counts),
        system_total=int(sys_total),
        truth_total=int(gt_total),
        per_lane=per_lane,
        status_accuracy=status_acc,
    )
