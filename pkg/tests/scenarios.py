"""Scenario builders shared by the test modules."""
import math

from lanewatch.formats import FrameInput
from lanewatch.pipeline import Pipeline, RunParams, run
from lanewatch.simulator import generate, scenario_from_dict

CAR_ONLY = {"car": {"weight": 1.0, "w": 50.0, "h": 60.0}}
LANE_LENGTH = 600.0


def exact_count_scenario(seed, rates=(4, 8, 12)):
    return scenario_from_dict({"rates": list(rates), "duration_frames": 3600}, seed)


def noisy_scenario(seed):
    return scenario_from_dict({"preset": "noisy", "duration_frames": 3600}, seed)


def status_scenario(rate, speed, label, seed=0):
    """Evenly spaced single-class traffic holding one regime on all 3 lanes."""
    return scenario_from_dict({
        "rates": [rate] * 3,
        "arrival": "uniform",
        "speed_mean": speed,
        "speed_sigma": 0.0,
        "min_gap": 2.0,
        "classes": CAR_ONLY,
        "noise": {"dropout": 0.02, "center_jitter": 0.5},
        "warmup_frames": int(math.ceil((LANE_LENGTH + 50) / speed)),
        "duration_frames": 3600,
    }, seed)


# (name, vehicles/min per lane, px/frame, expected label). Spacing between
# vehicles is speed * 1800 / rate px, so occupancy ~ 60 / spacing. Vehicles
# already inside the counting zone at frame 0 inflate the first interval by
# up to two, so Jam and Slow rates keep that much margin from the thresholds.
STATUS_SCENARIOS = [
    ("normal_light", 10, 6.0, "Normal"),
    ("normal_busy", 24, 4.0, "Normal"),
    ("normal_dense_fast", 20, 4 / 3, "Normal"),      # occ ~0.5 but 1200 vph
    ("slow_045", 12, 0.8 / 0.9, "Slow"),             # 720 vph, occ ~0.45
    ("slow_050", 12, 0.8, "Slow"),                   # occ ~0.50
    ("slow_055", 12, 0.8 / 1.1, "Slow"),             # occ ~0.55
    ("jam_070", 4, 60 / 0.7 / 450, "Jam"),           # 240 vph, occ ~0.70
    ("jam_080", 4, 60 / 0.8 / 450, "Jam"),           # occ ~0.80
    ("jam_090", 4, 60 / 0.9 / 450, "Jam"),           # 240 vph, occ ~0.90
]


def run_pipeline(out, params=RunParams()):
    pipe = Pipeline(out.lane_config.camera, params, out.lane_config)
    frames = [FrameInput(f.frame_id, f.detections, f.dt) for f in out.frames]
    return list(run(pipe, frames, end_frame=out.truth.duration_frames))


def valid_reports(events):
    return [e for e in events if e["kind"] == "lane_report" and e["valid"]]


def per_lane(reports, key, lanes):
    return {lane: [r[key] for r in sorted(reports, key=lambda r: r["interval_index"])
                   if r["lane_id"] == lane] for lane in lanes}
