import json
import subprocess
import sys

import pytest

from lanewatch.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, main


def simulate(tmp_path, scenario, seed=7, name="run", extra=()):
    spec = tmp_path / f"{name}.scenario.json"
    spec.write_text(json.dumps(scenario))
    prefix = tmp_path / name
    assert main(["simulate", "--scenario", str(spec), "--seed", str(seed),
                 "--out", str(prefix), *extra]) == EXIT_OK
    return prefix


def monitor(prefix, out, *extra):
    return main(["monitor", "--config", f"{prefix}.lanes.json",
                 "--detections", f"{prefix}.detections.jsonl", "--out", str(out), *extra])


def events(path, kind=None):
    recs = [json.loads(line) for line in open(path)]
    return [r for r in recs if kind is None or r["kind"] == kind]


def test_simulate_monitor_evaluate_round_trip(tmp_path):
    prefix = simulate(tmp_path, {"preset": "clean", "duration_frames": 3600})
    out = tmp_path / "events.jsonl"
    assert monitor(prefix, out) == EXIT_OK
    reports = events(out, "lane_report")
    assert len(reports) == 12 and all(r["valid"] for r in reports)
    truth = json.loads(open(f"{prefix}.truth.json").read())
    for r in reports:
        row = truth["intervals"][str(r["lane_id"])][r["interval_index"]]
        assert r["count"] == row["count"]
        assert f"{r['flow_rate_vph']:.2f}" == f"{row['flow_rate_vph']:.2f}"

    result = tmp_path / "eval.json"
    assert main(["evaluate", "--reports", str(out), "--truth", f"{prefix}.truth.json",
                 "--out", str(result)]) == EXIT_OK
    res = json.loads(result.read_text())
    assert res["counting_accuracy"] == 1.0 and res["mea"] == 1.0 and res["rmse"] == 0.0
    assert res["intervals"] == [0, 1, 2, 3] and res["m"] == 3


def test_outputs_are_event_ordered(tmp_path):
    prefix = simulate(tmp_path, {"preset": "noisy", "duration_frames": 1800})
    out = tmp_path / "events.jsonl"
    assert monitor(prefix, out) == EXIT_OK
    frames = [e["frame_id"] for e in events(out)]
    assert frames == sorted(frames)
    assert events(out)[-1]["kind"] == "summary"


def test_determinism_byte_identical(tmp_path):
    scenario = {"preset": "noisy", "duration_frames": 1800, "processing_dt": [[0, 0.02],
                                                                             [600, 0.08]]}
    a = simulate(tmp_path, scenario, seed=7, name="a")
    b = simulate(tmp_path, scenario, seed=7, name="b")
    for suffix in (".detections.jsonl", ".truth.json", ".lanes.json"):
        assert open(f"{a}{suffix}", "rb").read() == open(f"{b}{suffix}", "rb").read()
    assert monitor(a, tmp_path / "e1.jsonl") == EXIT_OK
    assert monitor(a, tmp_path / "e2.jsonl") == EXIT_OK
    first = (tmp_path / "e1.jsonl").read_bytes()
    assert first == (tmp_path / "e2.jsonl").read_bytes()
    # The recorded dt drives frame skipping: K rises once dt reaches 0.08 s.
    assert max(r["K"] for r in events(tmp_path / "e1.jsonl", "lane_report")) == 18


def test_scripted_pan_flags_intervals(tmp_path):
    prefix = simulate(tmp_path, {"preset": "clean", "duration_frames": 1800,
                                 "view_script": [{"start": 500, "shift_x": 0.25}]})
    out = tmp_path / "events.jsonl"
    assert monitor(prefix, out, "--frames", f"{prefix}_frames") == EXIT_OK
    changes = events(out, "view_change")
    assert [c["frame_id"] for c in changes] == [500]
    reports = events(out, "lane_report")
    assert {(r["interval_index"], r["valid"]) for r in reports} == {(0, False)}
    assert events(out, "summary")[0]["mode"] == "AWAITING_ENVIRONMENT"
    assert not [e for e in events(out, "count") if e["frame_id"] > 500]

    # With a relearned configuration the pipeline resumes; the interval it
    # re-enters part-way is invalid and later ones are valid.
    out2 = tmp_path / "events2.jsonl"
    assert monitor(prefix, out2, "--frames", f"{prefix}_frames",
                   "--relearn-lanes", f"{prefix}.lanes.json") == EXIT_OK
    reps = events(out2, "lane_report")
    assert {(r["interval_index"], r["valid"]) for r in reps} == {(0, False), (1, True)}
    assert [e["frame_id"] for e in events(out2, "environment")] == [0, 501]


def test_empty_detections_give_normal_zero_reports(tmp_path):
    prefix = simulate(tmp_path, {"rates": 0, "duration_frames": 1800})
    out = tmp_path / "events.jsonl"
    assert monitor(prefix, out) == EXIT_OK
    reports = events(out, "lane_report")
    assert len(reports) == 6
    assert all(r["count"] == 0 and r["status"] == "Normal" for r in reports)


def test_malformed_lines_are_skipped_and_tallied(tmp_path):
    prefix = simulate(tmp_path, {"preset": "clean", "duration_frames": 900})
    src = open(f"{prefix}.detections.jsonl").read().splitlines()
    bad = src[:50] + ["{not json", '{"frame_id": 3}', "[1, 2]", '{"frame_id": 0, "x": 1}'] \
        + src[50:]
    det = tmp_path / "bad.jsonl"
    det.write_text("\n".join(bad) + "\n")
    out = tmp_path / "events.jsonl"
    assert main(["monitor", "--config", f"{prefix}.lanes.json", "--detections", str(det),
                 "--out", str(out)]) == EXIT_OK
    assert events(out, "summary")[0]["malformed_records"] == 4
    clean = tmp_path / "clean.jsonl"
    monitor(prefix, clean)
    assert events(out, "lane_report") == events(clean, "lane_report")


def test_exit_codes(tmp_path):
    prefix = simulate(tmp_path, {"preset": "clean", "duration_frames": 300})
    assert main(["monitor", "--config", str(tmp_path / "nope.json"),
                 "--detections", f"{prefix}.detections.jsonl"]) == EXIT_CONFIG
    assert main(["monitor", "--config", f"{prefix}.lanes.json",
                 "--detections", str(tmp_path / "nope.jsonl")]) == EXIT_INPUT
    assert main(["monitor", "--config", f"{prefix}.lanes.json",
                 "--detections", f"{prefix}.detections.jsonl", "--max-age", "0"]) == EXIT_CONFIG
    bad_lanes = tmp_path / "bad.json"
    bad_lanes.write_text('{"camera": {"fps": 30}, "lanes": []}')
    assert main(["monitor", "--config", str(bad_lanes),
                 "--detections", f"{prefix}.detections.jsonl"]) == EXIT_CONFIG
    assert main(["simulate", "--scenario", "foggy", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["simulate", "--scenario", str(broken),
                 "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_evaluate_misaligned_is_input_error(tmp_path):
    a = simulate(tmp_path, {"preset": "clean", "duration_frames": 1800}, name="a")
    b = simulate(tmp_path, {"preset": "clean", "duration_frames": 900}, name="b")
    out = tmp_path / "events.jsonl"
    monitor(a, out)
    assert main(["evaluate", "--reports", str(out), "--truth", f"{b}.truth.json"]) == EXIT_INPUT
    two = simulate(tmp_path, {"rates": 5, "layout": {"n_lanes": 2},
                              "duration_frames": 1800}, name="two")
    assert main(["evaluate", "--reports", str(out),
                 "--truth", f"{two}.truth.json"]) == EXIT_INPUT
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["evaluate", "--reports", str(empty), "--truth", f"{a}.truth.json"]) \
        == EXIT_INPUT


def test_param_flags_and_stdin(tmp_path):
    prefix = simulate(tmp_path, {"preset": "clean", "duration_frames": 1800})
    proc = subprocess.run(
        [sys.executable, "-m", "lanewatch.cli", "monitor", "--config", f"{prefix}.lanes.json",
         "--interval-minutes", "0.25"],
        stdin=open(f"{prefix}.detections.jsonl"), capture_output=True, text=True, check=True)
    recs = [json.loads(line) for line in proc.stdout.splitlines()]
    reports = [r for r in recs if r["kind"] == "lane_report"]
    assert {r["interval_index"] for r in reports} == {0, 1, 2, 3}
    assert all(r["interval_minutes"] == 0.25 for r in reports)


def test_presets_on_command_line(tmp_path):
    for preset in ("sunny", "congestion"):
        assert main(["simulate", "--scenario", preset, "--seed", "1",
                     "--out", str(tmp_path / preset)]) == EXIT_OK
    dense = open(tmp_path / "congestion.detections.jsonl").read().count('"conf"')
    light = open(tmp_path / "sunny.detections.jsonl").read().count('"conf"')
    assert dense > 3 * light


def test_help_runs():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
