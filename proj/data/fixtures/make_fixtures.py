#!/usr/bin/env python3
"""Regenerates the bundled session-log fixtures.

well_formed.jsonl   two trials (one accepted, one rejected), 16 fps frames,
                    50 Hz IMU, orientation samples; validates cleanly.
corrupted.jsonl     same session with the first target's window reversed.
"""
import json
import pathlib

MS = 1_000_000
HERE = pathlib.Path(__file__).parent


def line(obj):
    return json.dumps(obj, separators=(",", ":")) + "\n"


def build(corrupt=False):
    meta = {
        "t": "meta",
        "session_id": "fixture-0001",
        "created_utc": "2026-01-15T10:00:00Z",
        "schema_version": "gazecode-log/1",
        "geometry": {"w_px": 1080, "h_px": 1920, "dpi": 432.0, "cam_x_in": 1.25, "cam_y_in": -0.2},
        "config": {"code_length": 4, "seed": 7},
    }
    records = []
    # Orientation held in portrait from 100 ms on.
    for k in range(12):
        records.append((100 * MS + k * 50 * MS, 0, {"t": "orient", "ts": 100 * MS + k * 50 * MS, "mode": "portrait"}))
    # IMU at 50 Hz for 5 s.
    for k in range(250):
        ts = k * 20 * MS
        records.append((ts, 1, {"t": "imu", "ts": ts, "sensor": "accel", "x": 0.05, "y": -9.79, "z": 0.4}))
    # Frames at 16 fps for 5 s.
    for k in range(80):
        ts = k * 62_500_000
        records.append((ts, 2, {"t": "frame", "ts": ts, "idx": k, "media": "front.mp4"}))
    trials = [
        (0, [4, 7, 1, 1], [4, 7, 1, 1], True, 1000),
        (1, [0, 2, 9, 5], [0, 2, 9, 6], False, 3500),
    ]
    for trial, code, entered, accepted, start_ms in trials:
        for i, digit in enumerate(code):
            appear = (start_ms + i * 500) * MS
            disappear = appear + 300 * MS
            if corrupt and trial == 0 and i == 0:
                appear, disappear = disappear, appear
            records.append((max(appear, disappear), 3, {
                "t": "target", "trial": trial, "idx": i, "digit": digit,
                "u": round(0.2 + 0.15 * i, 3), "v": round(0.3 + 0.1 * i, 3), "opacity": 0.1,
                "ts_appear": appear, "ts_disappear": disappear}))
        entry_ts = (start_ms + 2000) * MS
        records.append((entry_ts, 4, {"t": "entry", "trial": trial, "entered": entered, "ts": entry_ts,
                                      "accepted": accepted}))
    records.sort(key=lambda r: (r[0], r[1]))
    return line(meta) + "".join(line(r[2]) for r in records)


if __name__ == "__main__":
    (HERE / "well_formed.jsonl").write_text(build())
    (HERE / "corrupted.jsonl").write_text(build(corrupt=True))
