"""Learner-facing environment surface.

Feature channels, the hierarchical region+point goal encoding, the
team reward decomposition, and a goal-driven macro-step wrapper around
the episode engine. Forward interfaces only; no optimization here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from .engine import Episode, EpisodeDone, MacroSnapshot
from .mapping import OccGrid
from .nav import dilate_obstacles
from .planners import nearest_traversable
from .scenes import Scene
from .simulator import NoiseParams, Pose, SensorParams, TeamSchedule

FEATURE_SIZE = 240
TRAJECTORY_DECAY = 0.9
GOAL_REGIONS = 8             # goals pick one of GOAL_REGIONS^2 map regions

CHANNEL_NAMES = ("obstacle", "explored", "position", "trajectory",
                 "previous_goal", "goal_history")


class NonMonotoneArea(Exception):
    """Team explored area shrank between snapshots; mapping is broken."""


# ------------------------------------------------------------------- goals

@dataclass(frozen=True)
class GlobalGoal:
    """Region index pair plus a continuous point inside that region."""

    region: tuple[int, int]      # (g_x, g_y), each in {0..7}
    point: tuple[float, float]   # (p_x, p_y), each in [0, 1]

    def __post_init__(self):
        gx, gy = self.region
        px, py = self.point
        if not (0 <= gx < GOAL_REGIONS and 0 <= gy < GOAL_REGIONS):
            raise ValueError(f"region {self.region} outside the {GOAL_REGIONS}x{GOAL_REGIONS} lattice")
        if not (0.0 <= px <= 1.0 and 0.0 <= py <= 1.0):
            raise ValueError(f"point {self.point} outside the unit square")

    @property
    def decoded(self) -> tuple[float, float]:
        """Normalized map coordinates (x_l, y_l) = (g + p) / 8."""
        return ((self.region[0] + self.point[0]) / GOAL_REGIONS,
                (self.region[1] + self.point[1]) / GOAL_REGIONS)


def encode_goal(x_l: float, y_l: float) -> GlobalGoal:
    """Inverse of GlobalGoal.decoded: region = floor(8x), point = frac(8x).

    Exact round trip: 8x is a power-of-two scaling and the integer split
    loses no bits, so encode(decode(g)) reproduces the coordinates bit for
    bit. Coordinates at 1.0 fold into region 7, point 1.0.
    """
    def split(v):
        s = v * GOAL_REGIONS
        g = min(int(np.floor(s)), GOAL_REGIONS - 1)
        return g, s - g

    gx, px = split(x_l)
    gy, py = split(y_l)
    return GlobalGoal(region=(gx, gy), point=(px, py))


def decode_goal(goal: GlobalGoal, merged: OccGrid,
                traversable: np.ndarray | None = None) -> tuple[int, int]:
    """Map-frame cell for a goal, snapped to the nearest traversable cell."""
    x_l, y_l = goal.decoded
    h, w = merged.shape
    r = min(int(np.floor(y_l * h)), h - 1)
    c = min(int(np.floor(x_l * w)), w - 1)
    if traversable is None:
        traversable = dilate_obstacles(merged)
    return nearest_traversable(traversable, (r, c))


# ------------------------------------------------------------------ rewards

@dataclass
class RewardParams:
    coverage_coef: float = 0.02          # per m2, team and individual alike
    success_hi_bonus: float = 1.0        # x ratio, at first crossing of 0.95
    success_lo_bonus: float = 0.5        # x ratio, at first crossing of 0.90
    ratio_lo: float = 0.90
    ratio_hi: float = 0.95
    ratio_cut: float = 0.97
    overlap_coef_lo: float = 0.01        # ratio < 0.90
    overlap_coef_hi: float = 0.006       # 0.90 <= ratio < 0.95
    time_lo: float = 0.002
    time_mid: float = 0.001
    time_hi: float = 0.0002
    overlap_prob_sum: float = 1.2


@dataclass(frozen=True)
class RewardBreakdown:
    team_coverage: float
    individual_coverage: float
    success: float
    overlap_penalty: float
    time_penalty: float

    @property
    def total(self) -> float:
        return (self.team_coverage + self.individual_coverage + self.success
                + self.overlap_penalty + self.time_penalty)

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


def _mean_pair_overlap(pairs: dict) -> float:
    """Average overlap area over ordered agent pairs; 0 with fewer than 2 agents."""
    if not pairs:
        return 0.0
    return sum(pairs.values()) / len(pairs)


def compute_reward(prev: MacroSnapshot, new: MacroSnapshot,
                   params: RewardParams | None = None) -> dict[int, RewardBreakdown]:
    """Per-agent reward over one macro step, from its bracketing snapshots.

    Only the individual coverage term differs between agents; the other four
    terms are team-shared. Success bonuses fire on the macro step whose new
    ratio first crosses each threshold (coverage is monotone, so once each).
    """
    p = params or RewardParams()
    if new.team_area_m2 < prev.team_area_m2 - 1e-12:
        raise NonMonotoneArea(f"{prev.team_area_m2} -> {new.team_area_m2}")

    team_cov = p.coverage_coef * (new.team_area_m2 - prev.team_area_m2)

    success = 0.0
    if prev.ratio < p.ratio_hi <= new.ratio:
        success += p.success_hi_bonus * new.ratio
    if prev.ratio < p.ratio_lo <= new.ratio:
        success += p.success_lo_bonus * new.ratio

    if new.ratio < p.ratio_lo:
        overlap_coef = p.overlap_coef_lo
    elif new.ratio < p.ratio_hi:
        overlap_coef = p.overlap_coef_hi
    else:
        overlap_coef = 0.0
    d_overlap = _mean_pair_overlap(new.pair_overlap_m2) - _mean_pair_overlap(prev.pair_overlap_m2)
    # a team-size switch can shrink the pair average; the penalty floors at 0
    overlap_pen = -max(d_overlap, 0.0) * overlap_coef

    if new.ratio < p.ratio_lo:
        time_pen = -p.time_lo
    elif new.ratio < p.ratio_hi:
        time_pen = -p.time_mid
    elif new.ratio < p.ratio_cut:
        time_pen = -p.time_hi
    else:
        time_pen = 0.0

    out = {}
    for k in sorted(new.agent_explored):
        novel = np.count_nonzero(new.agent_explored[k] & ~prev.team_explored)
        out[k] = RewardBreakdown(
            team_coverage=team_cov,
            individual_coverage=p.coverage_coef * novel * new.cell_area_m2,
            success=success,
            overlap_penalty=overlap_pen,
            time_penalty=time_pen)
    return out


def team_reward(per_agent: dict[int, RewardBreakdown]) -> RewardBreakdown:
    """Field-wise mean of the per-agent breakdowns."""
    if not per_agent:
        return RewardBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
    vals = list(per_agent.values())
    n = len(vals)
    return RewardBreakdown(*(sum(getattr(b, f.name) for b in vals) / n
                             for f in fields(RewardBreakdown)))


# ----------------------------------------------------------------- features

@dataclass
class FeatureStack:
    channels: np.ndarray                 # (6, size, size)
    origin_cell: tuple[int, int]         # frame of the source map
    resolution: float
    source_shape: tuple[int, int]
    size: int


def _map_cell(cell, source_shape, size) -> tuple[int, int]:
    h, w = source_shape
    return (min(cell[0] * size // h, size - 1),
            min(cell[1] * size // w, size - 1))


def build_feature_channels(merged: OccGrid, trajectory: list[Pose],
                           prev_goal, goal_history,
                           size: int = FEATURE_SIZE,
                           decay: float = TRAJECTORY_DECAY) -> FeatureStack:
    """Six channels: obstacle, explored, position, decaying trajectory,
    previous goal, goal history.

    The map channels are nearest-neighbor resamples of the merged map; the
    one-hot channels mark the same cells mapped through that resampling.
    The trajectory channel holds decay^(age) where age counts the agent's
    own steps since it last stood on the cell (1 on the current cell).
    """
    h, w = merged.shape
    ch = np.zeros((6, size, size))
    ridx = np.arange(size) * h // size
    cidx = np.arange(size) * w // size
    ch[0] = merged.obstacle[np.ix_(ridx, cidx)]
    ch[1] = merged.explored[np.ix_(ridx, cidx)]

    last_seen: dict[tuple[int, int], int] = {}
    for i, pose in enumerate(trajectory):
        cell = merged.world_to_index(pose.x, pose.y)
        if 0 <= cell[0] < h and 0 <= cell[1] < w:
            last_seen[_map_cell(cell, (h, w), size)] = i
    now = len(trajectory) - 1
    for cell, i in last_seen.items():
        ch[3][cell] = decay ** (now - i)
    if trajectory:
        cur = merged.world_to_index(trajectory[-1].x, trajectory[-1].y)
        if 0 <= cur[0] < h and 0 <= cur[1] < w:
            ch[2][_map_cell(cur, (h, w), size)] = 1.0
    if prev_goal is not None:
        ch[4][_map_cell(prev_goal, (h, w), size)] = 1.0
    for g in goal_history or ():
        ch[5][_map_cell(g, (h, w), size)] = 1.0
    return FeatureStack(channels=ch, origin_cell=merged.origin_cell,
                        resolution=merged.resolution, source_shape=(h, w), size=size)


# -------------------------------------------------------------- environment

class ExplorationEnv:
    """Macro-step environment: goals in, features and team reward out.

    Each step decodes one GlobalGoal per active agent, drives 15 simulator
    steps of local navigation, and scores the transition. With `trace_path`
    set, one JSON line per macro step records the decoded world goals, the
    team reward breakdown, and the coverage ratio.
    """

    def __init__(self, scene: Scene, schedule: TeamSchedule, seed: int,
                 length: int = 300, size: int = FEATURE_SIZE,
                 sensor: SensorParams | None = None,
                 noise: NoiseParams | None = None,
                 reward_params: RewardParams | None = None,
                 trace_path: str | None = None):
        self.episode = Episode(scene, schedule, seed, length, sensor, noise)
        self.size = size
        self.reward_params = reward_params or RewardParams()
        self._trace_path = trace_path
        if trace_path:
            open(trace_path, "w").close()     # truncate previous trace

    @property
    def done(self) -> bool:
        return self.episode.done

    def active_ids(self) -> list[int]:
        return self.episode.state.active_ids()

    def features(self) -> dict[int, FeatureStack]:
        ep = self.episode
        merged = ep.merged_refined()
        agents = {a.agent_id: a for a in ep.state.agents}
        return {k: build_feature_channels(
                    merged, agents[k].trajectory,
                    ep.prev_goals.get(k), ep.goal_history.get(k, []),
                    size=self.size)
                for k in ep.state.active_ids()}

    def step(self, goals: dict[int, GlobalGoal]):
        """Returns (features per agent, team RewardBreakdown, done, info)."""
        if self.done:
            raise EpisodeDone("episode already finished")
        ep = self.episode
        merged = ep.merged_refined()
        trav = dilate_obstacles(merged)
        cells = {k: decode_goal(g, merged, trav) for k, g in goals.items()}
        prev, snap = ep.macro_step(cells)
        per_agent = compute_reward(prev, snap, self.reward_params)
        team = team_reward(per_agent)
        if self._trace_path:
            world = {str(k): list(merged.index_to_world(*c)) for k, c in cells.items()}
            line = {"t": snap.t, "goals": world, "reward": team.as_dict(),
                    "coverage": snap.ratio}
            with open(self._trace_path, "a") as fh:
                fh.write(json.dumps(line) + "\n")
        info = {"per_agent": per_agent, "snapshot": snap, "coverage": snap.ratio}
        return self.features(), team, self.done, info
