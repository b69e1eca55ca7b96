"""Benchmark harness: seeded episodes, suites, calibration, and reports.

Every episode seed is derived by hashing the suite base seed with the cell
identifiers and the episode index, so cells are statistically independent
and any single episode can be reproduced from the report alone. Reports
carry no timestamps or host details; two runs of the same config produce
byte-identical files, whether episodes run serially or in a worker pool.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import Episode
from .mapping import OccGrid
from .metrics import EpisodeRecord, SingleAgent, mutual_overlap, steps_to_threshold
from .planners import PLANNER_NAMES, Planner
from .rl_env import compute_reward, team_reward
from .scenes import Scene, generate_scene, load_scene
from .simulator import TeamSchedule

DEFAULT_LENGTH = 300
CALIBRATION_CAP = 3000
CALIBRATION_SEEDS = 5
METRIC_NAMES = ("coverage", "steps", "mutual_overlap")
CSV_HEADER = ("scene", "planner", "schedule", "metric", "mean", "std", "n")


class IoError(Exception):
    pass


class ConfigError(Exception):
    pass


class CalibrationTimeout(Exception):
    """Single-agent calibration never hit 95% within the step cap."""

    def __init__(self, message: str, partial: list[int]):
        super().__init__(message)
        self.partial = partial


class EpisodeFailure(Exception):
    """A module error wrapped with the episode coordinates that hit it."""


def episode_seed(base_seed: int, scene_name: str, planner: str,
                 schedule: str, index: int) -> int:
    key = f"{base_seed}:{scene_name}:{planner}:{schedule}:{index}"
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def resolve_scene(token) -> tuple[str, Scene]:
    """A scene token is a generator seed (integer text) or a file path."""
    if isinstance(token, Scene):
        return token.name, token
    text = str(token).strip()
    if text.lstrip("-").isdigit():
        seed = int(text)
        return f"gen{seed}", generate_scene(seed)
    return Path(text).stem, load_scene(text)


# ------------------------------------------------------------------ episodes

def run_episode(scene, planner: str, schedule, seed: int,
                length: int = DEFAULT_LENGTH, sensor=None, noise=None) -> EpisodeRecord:
    """Run one full episode and return its record. Deterministic in arguments."""
    if length <= 0:
        raise ConfigError(f"episode length must be positive, got {length}")
    scene_name, scene = resolve_scene(scene)
    if isinstance(schedule, str):
        schedule = TeamSchedule.parse(schedule)
    try:
        ep = Episode(scene, schedule, seed, length=length, sensor=sensor, noise=noise)
        pl = Planner(planner)
        reward_log = []
        while not ep.done:
            prev, snap = ep.macro_step(pl.plan(ep.planner_context()))
            reward_log.append(team_reward(compute_reward(prev, snap)).as_dict())
    except Exception as e:
        raise EpisodeFailure(
            f"scene={scene_name} planner={planner} schedule={schedule} "
            f"seed={seed}: {e}") from e

    trace = list(ep.coverage_trace)
    record = EpisodeRecord(
        scene_name=scene_name,
        planner=planner,
        schedule=str(schedule),
        seed=seed,
        coverage_trace=trace,
        steps_to_90=0,
        final_coverage=trace[-1] if trace else 0.0,
        overlap_at_90=None,
        goal_log=list(ep.goal_log),
        reward_log=reward_log,
        snapshot_explored=ep.event90,
    )
    record.steps_to_90 = steps_to_threshold(record, 0.9)
    if ep.event90 is not None and len(ep.event90) >= 2:
        grids = [OccGrid(explored=mask.astype(float),
                         obstacle=np.zeros(mask.shape),
                         origin_cell=(0, 0), resolution=scene.resolution)
                 for _, mask in sorted(ep.event90.items())]
        try:
            record.overlap_at_90 = mutual_overlap(grids, scene)
        except SingleAgent:
            record.overlap_at_90 = None
    return record


def record_as_dict(record: EpisodeRecord) -> dict:
    """JSON-ready view of a record: scalars and traces, no grids."""
    return {
        "scene": record.scene_name,
        "planner": record.planner,
        "schedule": record.schedule,
        "seed": record.seed,
        "final_coverage": record.final_coverage,
        "steps_to_90": record.steps_to_90,
        "mutual_overlap": record.overlap_at_90,
        "coverage_trace": record.coverage_trace,
        "reward_log": record.reward_log,
    }


def export_trace(record: EpisodeRecord, path) -> None:
    """Write the macro-step trace as JSON lines: t, goals, reward, coverage."""
    trace = record.coverage_trace
    with open(path, "w") as fh:
        for i, (t, goals) in enumerate(record.goal_log):
            end = min(t + 15, len(trace)) - 1
            line = {
                "t": t,
                "goals": {str(k): [float(x), float(y)] for k, (x, y) in sorted(goals.items())},
                "reward": record.reward_log[i] if i < len(record.reward_log) else None,
                "coverage": trace[end] if 0 <= end < len(trace) else None,
            }
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def calibrate_episode_length(scene, seeds: int = CALIBRATION_SEEDS) -> int:
    """Median single-agent steps-to-95% with the strongest sampling planner,
    rounded up to a whole replan period."""
    scene_name, scene = resolve_scene(scene)
    results = []
    for i in range(seeds):
        seed = episode_seed(0, scene_name, "rrt", "calibrate", i)
        ep = Episode(scene, TeamSchedule.fixed(1), seed, length=CALIBRATION_CAP)
        pl = Planner("rrt")
        while not ep.done and ep.ratio() < 0.95:
            ep.macro_step(pl.plan(ep.planner_context()))
        if ep.ratio() < 0.95:
            raise CalibrationTimeout(
                f"scene {scene_name} seed {seed} below 95% after "
                f"{CALIBRATION_CAP} steps", partial=results)
        steps = next(i + 1 for i, r in enumerate(ep.coverage_trace) if r >= 0.95)
        results.append(steps)
    med = math.ceil(statistics.median(results))
    return ((med + 14) // 15) * 15


# -------------------------------------------------------------------- suites

@dataclass
class CellSpec:
    name: str
    scene: str
    planner: str
    schedule: str
    episodes: int
    length: object          # positive int or the string "calibrate"
    base_seed: int

    def validate(self) -> None:
        if self.planner not in PLANNER_NAMES:
            raise ConfigError(f"[{self.name}] unknown planner {self.planner!r}")
        if self.episodes < 1:
            raise ConfigError(f"[{self.name}] episodes must be >= 1")
        if self.length != "calibrate" and int(self.length) <= 0:
            raise ConfigError(f"[{self.name}] length must be positive")
        try:
            TeamSchedule.parse(self.schedule)
        except ValueError as e:
            raise ConfigError(f"[{self.name}] {e}") from e


@dataclass
class SuiteConfig:
    cells: dict             # name -> CellSpec, iterated in sorted order


def parse_config(path) -> SuiteConfig:
    """INI layout: one [cell:NAME] section per suite cell, [defaults] shared."""
    cp = ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config {path}")
    defaults = dict(cp["defaults"]) if cp.has_section("defaults") else {}
    cells = {}
    for section in cp.sections():
        if not section.startswith("cell:"):
            continue
        name = section[len("cell:"):]
        merged = {**defaults, **dict(cp[section])}
        missing = [k for k in ("scene", "planner") if k not in merged]
        if missing:
            raise ConfigError(f"[{section}] missing keys: {missing}")
        length = merged.get("length", str(DEFAULT_LENGTH))
        spec = CellSpec(
            name=name,
            scene=merged["scene"],
            planner=merged["planner"],
            schedule=merged.get("schedule", "1"),
            episodes=int(merged.get("episodes", "1")),
            length="calibrate" if length == "calibrate" else int(length),
            base_seed=int(merged.get("base_seed", "0")),
        )
        spec.validate()
        cells[name] = spec
    if not cells:
        raise ConfigError(f"no [cell:...] sections in {path}")
    return SuiteConfig(cells=cells)


def _episode_job(args) -> dict:
    """Worker body: rebuild the scene from its token so jobs pickle small."""
    cell_name, scene_token, planner, schedule, seed, length = args
    try:
        rec = run_episode(scene_token, planner, schedule, seed, length)
        out = record_as_dict(rec)
        out["cell"] = cell_name
        return out
    except Exception as e:                  # noqa: BLE001 - isolation contract
        return {"cell": cell_name, "seed": seed, "error": str(e)}


def run_suite(config: SuiteConfig, jobs: int = 1) -> dict:
    """Run every cell and aggregate. Parallel and serial results are equal:
    job order is fixed by sorted cell name, and the executor map preserves it."""
    job_list = []
    for name in sorted(config.cells):
        spec = config.cells[name]
        length = spec.length
        if length == "calibrate":
            length = calibrate_episode_length(spec.scene)
        scene_name, _ = resolve_scene(spec.scene)
        for i in range(spec.episodes):
            seed = episode_seed(spec.base_seed, scene_name, spec.planner,
                                spec.schedule, i)
            job_list.append((name, spec.scene, spec.planner, spec.schedule,
                             seed, length))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_episode_job, job_list))
    else:
        results = [_episode_job(j) for j in job_list]

    episodes = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]

    rows = []
    for name in sorted(config.cells):
        spec = config.cells[name]
        cell_eps = [r for r in episodes if r["cell"] == name]
        values = {
            "coverage": [r["final_coverage"] for r in cell_eps],
            "steps": [float(r["steps_to_90"]) for r in cell_eps],
            "mutual_overlap": [r["mutual_overlap"] for r in cell_eps
                               if r["mutual_overlap"] is not None],
        }
        scene_name, _ = resolve_scene(spec.scene)
        for metric in METRIC_NAMES:
            v = values[metric]
            rows.append({
                "scene": scene_name,
                "planner": spec.planner,
                "schedule": spec.schedule,
                "metric": metric,
                "mean": statistics.mean(v) if v else None,
                "std": statistics.pstdev(v) if v else None,
                "n": len(v),
            })
    rows.sort(key=lambda r: (r["scene"], r["planner"], r["schedule"], r["metric"]))
    return {"cells": rows, "episodes": episodes, "failures": failures}


# ------------------------------------------------------------------- reports

def emit_report(report: dict, fmt: str, path) -> None:
    """Write aggregates as CSV or the full report as JSON. Deterministic bytes."""
    if not report.get("episodes") and not report.get("failures"):
        raise IoError("refusing to write a report with no episode records")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in report["cells"]:
            writer.writerow([
                row["scene"], row["planner"], row["schedule"], row["metric"],
                "" if row["mean"] is None else f"{row['mean']:.2f}",
                "" if row["std"] is None else f"{row['std']:.2f}",
                row["n"],
            ])
        Path(path).write_text(buf.getvalue())
    elif fmt == "json":
        Path(path).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    else:
        raise IoError(f"unknown report format {fmt!r}")
