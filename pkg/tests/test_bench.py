"""Episode runner, suite harness, calibration, and report files."""

import json

import pytest

import coexplore.bench as bench
from coexplore.bench import (CalibrationTimeout, ConfigError, IoError,
                             calibrate_episode_length, emit_report, episode_seed,
                             export_trace, parse_config, record_as_dict,
                             resolve_scene, run_episode, run_suite)
from coexplore.scenes import GeneratorParams, generate_scene, scene_to_text

from util import scene_from_rows

BOX = scene_from_rows(["#" * 40] + ["#" + "." * 38 + "#"] * 38 + ["#" * 40],
                      name="box")


def write_box(path, width=40, extra=""):
    rows = ["#" * width] + ["#" + "." * (width - 2) + "#"] * 38 + ["#" * width]
    path.write_text(f"resolution_m=0.05\n{extra}" + "\n".join(rows) + "\n")


def suite_config(tmp_path, body):
    (tmp_path / "a.scene").exists() or write_box(tmp_path / "a.scene")
    write_box(tmp_path / "b.scene", width=56)
    cfg = tmp_path / "suite.ini"
    cfg.write_text(body.format(root=tmp_path))
    return parse_config(cfg)


# ---------------------------------------------------------------- episodes

def test_run_episode_is_deterministic():
    a = run_episode(BOX, "nearest", "2", seed=77, length=45)
    b = run_episode(BOX, "nearest", "2", seed=77, length=45)
    assert record_as_dict(a) == record_as_dict(b)


def test_run_episode_rejects_bad_length():
    with pytest.raises(ConfigError):
        run_episode(BOX, "random", "1", seed=1, length=0)
    with pytest.raises(ConfigError):
        run_episode(BOX, "random", "1", seed=1, length=-15)


def test_run_episode_record_contents():
    rec = run_episode(BOX, "nearest", "2", seed=77, length=45)
    d = record_as_dict(rec)
    assert set(d) == {"scene", "planner", "schedule", "seed", "final_coverage",
                      "steps_to_90", "mutual_overlap", "coverage_trace",
                      "reward_log"}
    assert d["scene"] == "box" and d["planner"] == "nearest"
    assert d["schedule"] == "2" and d["seed"] == 77
    assert len(d["coverage_trace"]) == 45
    assert len(d["reward_log"]) == 3
    assert 0.0 <= d["final_coverage"] <= 1.0
    assert 1 <= d["steps_to_90"] <= 45
    assert d["mutual_overlap"] is not None       # two agents hit 90% in a box


def test_run_episode_speed(timer=None):
    import time
    small = GeneratorParams(rooms=(2, 3), side=(60, 60), room_side=(12, 24))
    scene = generate_scene(3, small)
    start = time.perf_counter()
    run_episode(scene, "random", "1", seed=1, length=300)
    assert time.perf_counter() - start < 2.0


def test_export_trace_lines(tmp_path):
    rec = run_episode(BOX, "nearest", "2", seed=77, length=45)
    path = tmp_path / "trace.jsonl"
    export_trace(rec, path)
    lines = [json.loads(s) for s in path.read_text().splitlines()]
    assert [line["t"] for line in lines] == [0, 15, 30]
    for line in lines:
        assert set(line) == {"t", "goals", "reward", "coverage"}
        assert set(line["goals"]) == {"0", "1"}
    assert lines[-1]["coverage"] == rec.final_coverage


# ------------------------------------------------------------------- seeds

def test_episode_seed_is_stable_and_sensitive():
    assert episode_seed(0, "a", "b", "c", 0) == 16783117776363296936
    assert episode_seed(7, "boxa", "nearest", "2", 3) == 3550429249500993537
    base = episode_seed(1, "s", "p", "1", 0)
    assert base != episode_seed(2, "s", "p", "1", 0)
    assert base != episode_seed(1, "t", "p", "1", 0)
    assert base != episode_seed(1, "s", "q", "1", 0)
    assert base != episode_seed(1, "s", "p", "2", 0)
    assert base != episode_seed(1, "s", "p", "1", 1)
    assert 0 <= base < 2 ** 64


def test_resolve_scene_tokens(tmp_path):
    name, scene = resolve_scene(BOX)
    assert name == "box" and scene is BOX
    gname, gen = resolve_scene("12")
    assert gname == "gen12" and gen.shape == generate_scene(12).shape
    write_box(tmp_path / "mybox.scene")
    fname, loaded = resolve_scene(str(tmp_path / "mybox.scene"))
    assert fname == "mybox" and loaded.shape == (40, 40)


# ------------------------------------------------------------------ config

def test_parse_config_defaults_merge(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("""
[defaults]
scene = 12
episodes = 2
length = 30

[cell:a]
planner = nearest

[cell:b]
planner = random
schedule = 2
base_seed = 5
""")
    suite = parse_config(cfg)
    assert sorted(suite.cells) == ["a", "b"]
    a, b = suite.cells["a"], suite.cells["b"]
    assert (a.scene, a.planner, a.schedule, a.episodes, a.length, a.base_seed) \
        == ("12", "nearest", "1", 2, 30, 0)
    assert (b.schedule, b.base_seed) == ("2", 5)


def test_parse_config_errors(tmp_path):
    missing = tmp_path / "missing.ini"
    with pytest.raises(ConfigError):
        parse_config(missing)

    empty = tmp_path / "empty.ini"
    empty.write_text("")
    with pytest.raises(ConfigError):
        parse_config(empty)

    for body, msg in [
        ("[cell:a]\nscene = 12\n", "missing keys"),
        ("[cell:a]\nscene = 12\nplanner = spiral\n", "unknown planner"),
        ("[cell:a]\nscene = 12\nplanner = random\nepisodes = 0\n", "episodes"),
        ("[cell:a]\nscene = 12\nplanner = random\nlength = 0\n", "length"),
        ("[cell:a]\nscene = 12\nplanner = random\nschedule = 2:3\n", None),
    ]:
        bad = tmp_path / "bad.ini"
        bad.write_text(body)
        with pytest.raises(ConfigError, match=msg):
            parse_config(bad)


def test_parse_config_accepts_calibrate(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[cell:a]\nscene = 12\nplanner = random\nlength = calibrate\n")
    assert parse_config(cfg).cells["a"].length == "calibrate"


# ------------------------------------------------------------------ suites

SUITE_BODY = """
[defaults]
episodes = 5
length = 30
schedule = 2

[cell:a-near]
scene = {root}/a.scene
planner = nearest

[cell:a-rand]
scene = {root}/a.scene
planner = random

[cell:a-util]
scene = {root}/a.scene
planner = utility

[cell:b-near]
scene = {root}/b.scene
planner = nearest

[cell:b-rand]
scene = {root}/b.scene
planner = random

[cell:b-util]
scene = {root}/b.scene
planner = utility
"""


def test_run_suite_counts_and_aggregate_rows(tmp_path):
    report = run_suite(suite_config(tmp_path, SUITE_BODY))
    assert len(report["episodes"]) == 30            # 2 scenes x 3 planners x 5
    assert report["failures"] == []
    assert len(report["cells"]) == 18               # 6 cells x 3 metrics
    groups = {(r["scene"], r["planner"], r["schedule"]) for r in report["cells"]}
    assert len(groups) == 6
    keys = [(r["scene"], r["planner"], r["schedule"], r["metric"])
            for r in report["cells"]]
    assert keys == sorted(keys)
    for row in report["cells"]:
        if row["metric"] == "mutual_overlap":
            # only episodes that reached the 90% event contribute
            assert 0 < row["n"] <= 5
        else:
            assert row["n"] == 5
        assert row["mean"] is not None and row["std"] is not None


def test_run_suite_single_agent_has_no_overlap(tmp_path):
    cfg = suite_config(tmp_path, """
[cell:solo]
scene = {root}/a.scene
planner = nearest
episodes = 2
length = 30
""")
    report = run_suite(cfg)
    row = next(r for r in report["cells"] if r["metric"] == "mutual_overlap")
    assert row["n"] == 0 and row["mean"] is None and row["std"] is None


def test_run_suite_reruns_byte_identical(tmp_path):
    cfg = suite_config(tmp_path, SUITE_BODY)
    for i, report in enumerate([run_suite(cfg), run_suite(cfg)]):
        emit_report(report, "csv", tmp_path / f"r{i}.csv")
        emit_report(report, "json", tmp_path / f"r{i}.json")
    assert (tmp_path / "r0.csv").read_bytes() == (tmp_path / "r1.csv").read_bytes()
    assert (tmp_path / "r0.json").read_bytes() == (tmp_path / "r1.json").read_bytes()


def test_run_suite_parallel_matches_serial(tmp_path):
    cfg = suite_config(tmp_path, """
[defaults]
episodes = 2
length = 30
schedule = 2

[cell:x]
scene = {root}/a.scene
planner = nearest

[cell:y]
scene = {root}/a.scene
planner = random
""")
    serial = run_suite(cfg, jobs=1)
    parallel = run_suite(cfg, jobs=2)
    assert json.dumps(serial, sort_keys=True) == json.dumps(parallel, sort_keys=True)


def test_run_suite_isolates_episode_failures(tmp_path):
    write_box(tmp_path / "tight.scene", extra="spawn=1,1,1,1\n")
    cfg = suite_config(tmp_path, """
[defaults]
length = 30

[cell:bad]
scene = {root}/tight.scene
planner = nearest
schedule = 2
episodes = 2

[cell:good]
scene = {root}/a.scene
planner = nearest
episodes = 3
""")
    report = run_suite(cfg)
    assert len(report["failures"]) == 2             # one-cell spawn, two agents
    for f in report["failures"]:
        assert f["cell"] == "bad"
        assert "seed" in f and "error" in f
    assert len(report["episodes"]) == 3
    good = [r for r in report["cells"] if r["scene"] == "a"]
    assert all(r["n"] == 3 for r in good if r["metric"] != "mutual_overlap")
    bad = [r for r in report["cells"] if r["scene"] == "tight"]
    assert all(r["n"] == 0 and r["mean"] is None for r in bad)


# ----------------------------------------------------------------- reports

def test_emit_report_formats(tmp_path):
    cfg = suite_config(tmp_path, """
[cell:solo]
scene = {root}/a.scene
planner = nearest
episodes = 2
length = 30
schedule = 2
""")
    report = run_suite(cfg)
    csv_path, json_path = tmp_path / "r.csv", tmp_path / "r.json"
    emit_report(report, "csv", csv_path)
    emit_report(report, "json", json_path)

    text = csv_path.read_text()
    lines = text.splitlines()
    assert lines[0] == "scene,planner,schedule,metric,mean,std,n"
    assert len(lines) == 4
    assert text.endswith("\n") and not text.endswith("\n\n")
    cov = next(s for s in lines if ",coverage," in s)
    mean, std, n = cov.split(",")[4:]
    assert "." in mean and len(mean.split(".")[1]) == 2
    assert "." in std and len(std.split(".")[1]) == 2
    assert n == "2"

    jtext = json_path.read_text()
    assert jtext.endswith("\n")
    loaded = json.loads(jtext)
    assert loaded == json.loads(json.dumps(report, sort_keys=True))
    assert set(loaded) == {"cells", "episodes", "failures"}


def test_emit_report_refuses_empty(tmp_path):
    target = tmp_path / "empty.csv"
    with pytest.raises(IoError):
        emit_report({"cells": [], "episodes": [], "failures": []}, "csv", target)
    assert not target.exists()
    with pytest.raises(IoError):
        emit_report({"cells": [], "episodes": [{}], "failures": []}, "tsv",
                    tmp_path / "r.tsv")


# ------------------------------------------------------------- calibration

def test_calibrate_returns_replan_multiple():
    n = calibrate_episode_length(BOX)
    assert n == calibrate_episode_length(BOX)
    assert n > 0 and n % 15 == 0


def test_calibrate_timeout_carries_partial(monkeypatch):
    maze = generate_scene(4, GeneratorParams(rooms=(4, 5), side=(90, 90),
                                             room_side=(16, 24)))
    monkeypatch.setattr(bench, "CALIBRATION_CAP", 30)
    with pytest.raises(CalibrationTimeout) as err:
        calibrate_episode_length(maze)
    assert isinstance(err.value.partial, list)
