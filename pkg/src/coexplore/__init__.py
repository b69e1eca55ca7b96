"""Deterministic multi-agent exploration: simulator, planners, and benchmarks."""

from .bench import (
    calibrate_episode_length,
    emit_report,
    episode_seed,
    export_trace,
    parse_config,
    record_as_dict,
    resolve_scene,
    run_episode,
    run_suite,
)
from .engine import Episode
from .mapping import OccGrid, merge_maps
from .metrics import EpisodeRecord, coverage_ratio, mutual_overlap, steps_to_threshold
from .planners import PLANNER_NAMES, Planner
from .scenes import Scene, generate_scene, load_scene
from .simulator import NoiseParams, SensorParams, TeamSchedule

__all__ = [
    "EpisodeRecord",
    "Episode",
    "NoiseParams",
    "OccGrid",
    "PLANNER_NAMES",
    "Planner",
    "Scene",
    "SensorParams",
    "TeamSchedule",
    "calibrate_episode_length",
    "coverage_ratio",
    "emit_report",
    "episode_seed",
    "export_trace",
    "generate_scene",
    "load_scene",
    "merge_maps",
    "mutual_overlap",
    "parse_config",
    "record_as_dict",
    "resolve_scene",
    "run_episode",
    "run_suite",
    "steps_to_threshold",
]
