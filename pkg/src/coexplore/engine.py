"""Episode engine tying simulator, mapping, and local navigation together.

One Episode owns the simulator state and the per-agent maps, advances in
macro steps of 15 simulator steps toward fixed goal cells, and produces
the area/overlap snapshots that reward computation and metrics consume.
All per-tick map work happens on one fixed refined frame (the scene box
padded by the refine margin), so agent maps always merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simulator as sim
from .mapping import OccGrid, integrate_scan, merge_maps, refine_map
from .nav import (NoPath, carve_access, dilate_obstacles, fmm_field,
                  local_controller, next_subgoal, plan_path)
from .planners import PlannerContext
from .scenes import Scene
from .simulator import Action, NoiseParams, SensorParams, TeamSchedule

REPLAN_PERIOD = 15
REFINE_MARGIN = 5


def _open_start(mask: np.ndarray, cell: tuple[int, int], radius: int = 2) -> None:
    """Force a box around a planning start traversable, ignoring obstacle marks.

    Odometry drift can deposit stale obstacle paint on the cell the agent is
    demonstrably standing in; a field solved on the raw mask then never reaches
    the start. Physical collisions remain the simulator's problem.
    """
    h, w = mask.shape
    r = min(max(int(cell[0]), 0), h - 1)
    c = min(max(int(cell[1]), 0), w - 1)
    mask[max(0, r - radius):min(h, r + radius + 1),
         max(0, c - radius):min(w, c + radius + 1)] = True


class EpisodeDone(Exception):
    pass


@dataclass
class MacroSnapshot:
    """Area accounting at one macro-step boundary (scene frame, Free cells only)."""

    t: int
    ratio: float
    team_area_m2: float
    agent_area_m2: dict
    pair_overlap_m2: dict               # (k, u) ordered pair -> m2, vs. u's previous map
    team_explored: np.ndarray           # bool (H, W)
    agent_explored: dict                # agent -> bool (H, W)
    cell_area_m2: float = 0.0


class Episode:
    def __init__(self, scene: Scene, schedule: TeamSchedule, seed: int,
                 length: int = 300,
                 sensor: SensorParams | None = None,
                 noise: NoiseParams | None = None):
        if length <= 0:
            raise ValueError("episode length must be positive")
        ss_sim, ss_plan = np.random.SeedSequence(seed).spawn(2)
        self.scene = scene
        self.schedule = schedule
        self.length = int(length)
        self.rng_plan = np.random.default_rng(ss_plan)
        self.state = sim.reset(scene, schedule, int(ss_sim.generate_state(1)[0]),
                               sensor, noise)

        res = scene.resolution
        h, w = scene.shape
        n_total = schedule.max_agents
        self.maps = {k: OccGrid.empty(res) for k in range(n_total)}
        self.birth_poses = {a.agent_id: a.true_pose.copy() for a in self.state.agents}
        self.refine_bounds = (0, 0, h - 1, w - 1)      # (rmin, cmin, rmax, cmax)
        self.free = scene.free_mask
        self.free_total = int(np.count_nonzero(self.free))
        self.team_explored = np.zeros(scene.shape, dtype=bool)
        self.agent_explored = {k: np.zeros(scene.shape, dtype=bool) for k in range(n_total)}
        self._team_count = 0
        self.coverage_trace: list[float] = []
        self.goal_log: list = []
        self.goal_history: dict[int, list] = {k: [] for k in range(n_total)}
        self.prev_goals: dict[int, tuple | None] = {k: None for k in range(n_total)}
        self.known_active = set(self.state.active_ids())
        self.event90: dict | None = None
        self._merged_cache: tuple[int, OccGrid] | None = None
        self._merge_stamp = 0
        self._stalled: dict[int, bool] = {}
        self._escape: dict[int, int] = {}

        for k in self.state.active_ids():
            self._integrate(k, sim.sense(self.state, k))
        self.last_snapshot = MacroSnapshot(
            t=0, ratio=0.0, team_area_m2=0.0,
            agent_area_m2={}, pair_overlap_m2={},
            team_explored=np.zeros(scene.shape, dtype=bool), agent_explored={},
            cell_area_m2=res ** 2)
        self._check_event()

    # ------------------------------------------------------------ accounting

    @property
    def done(self) -> bool:
        return self.state.t >= self.length

    def ratio(self) -> float:
        return self._team_count / self.free_total

    def _integrate(self, k: int, scan) -> None:
        est = next(a.est_pose for a in self.state.agents if a.agent_id == k)
        new_cells = integrate_scan(self.maps[k], scan, est)
        self._merge_stamp += 1
        if len(new_cells) == 0:
            return
        rr, cc = new_cells[:, 0], new_cells[:, 1]
        # Odometry drift can push marks past the scene box; widen the shared
        # crop so every agent still refines onto one frame.
        b = self.refine_bounds
        self.refine_bounds = (min(b[0], int(rr.min())), min(b[1], int(cc.min())),
                              max(b[2], int(rr.max())), max(b[3], int(cc.max())))
        h, w = self.scene.shape
        inb = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        rr, cc = rr[inb], cc[inb]
        free = self.free[rr, cc]
        rr, cc = rr[free], cc[free]
        self.agent_explored[k][rr, cc] = True
        fresh = ~self.team_explored[rr, cc]
        self.team_explored[rr, cc] = True
        self._team_count += int(np.count_nonzero(fresh))

    def _check_event(self) -> None:
        if self.event90 is None and self.ratio() >= 0.9:
            self.event90 = {k: self.agent_explored[k].copy()
                            for k in sorted(self.known_active)}

    def merged_refined(self) -> OccGrid:
        if self._merged_cache is not None and self._merged_cache[0] == self._merge_stamp:
            return self._merged_cache[1]
        births = list(self.birth_poses.values())
        refined = [refine_map(self.maps[k], births, bounds=self.refine_bounds,
                              margin=REFINE_MARGIN)
                   for k in sorted(self.maps)]
        merged = merge_maps(refined)
        self._merged_cache = (self._merge_stamp, merged)
        return merged

    def agent_refined(self, k: int) -> OccGrid:
        return refine_map(self.maps[k], list(self.birth_poses.values()),
                          bounds=self.refine_bounds, margin=REFINE_MARGIN)

    def _make_snapshot(self, prev: MacroSnapshot) -> MacroSnapshot:
        cell_area = self.scene.resolution ** 2
        ids = sorted(self.known_active)
        agent_expl = {k: self.agent_explored[k].copy() for k in ids}
        pair = {}
        for k in ids:
            for u in ids:
                if u == k:
                    continue
                prev_u = prev.agent_explored.get(u)
                if prev_u is None:
                    pair[(k, u)] = 0.0
                else:
                    n = np.count_nonzero(agent_expl[k] & prev_u)
                    pair[(k, u)] = n * cell_area
        return MacroSnapshot(
            t=self.state.t,
            ratio=self.ratio(),
            team_area_m2=self._team_count * cell_area,
            agent_area_m2={k: int(np.count_nonzero(agent_expl[k])) * cell_area
                           for k in ids},
            pair_overlap_m2=pair,
            team_explored=self.team_explored.copy(),
            agent_explored=agent_expl,
            cell_area_m2=cell_area)

    # ------------------------------------------------------------ planning IO

    def planner_context(self) -> PlannerContext:
        merged = self.merged_refined()
        agents = {a.agent_id: a for a in self.state.agents}
        active = self.state.active_ids()
        return PlannerContext(
            merged=merged,
            poses={k: agents[k].est_pose.copy() for k in active},
            trajectories={k: [p.copy() for p in agents[k].trajectory] for k in active},
            previous_goals={k: self.prev_goals.get(k) for k in active},
            rng=self.rng_plan,
            timestep=self.state.t)

    # ------------------------------------------------------------- macro step

    def macro_step(self, goals: dict[int, tuple[int, int]],
                   n_steps: int = REPLAN_PERIOD) -> tuple[MacroSnapshot, MacroSnapshot]:
        """Drive every agent toward its goal cell for n_steps simulator steps.

        Goal cells are in the merged refined frame. Returns the snapshots
        bracketing the macro step (previous, new).
        """
        if self.done:
            raise EpisodeDone(f"t={self.state.t} >= length={self.length}")
        merged = self.merged_refined()
        res = merged.resolution
        trav = dilate_obstacles(merged)
        agents = {a.agent_id: a for a in self.state.agents}
        fields = {}
        for k, cell in goals.items():
            cell = (int(cell[0]), int(cell[1]))
            goals[k] = cell
            mask = trav.copy()
            carve_access(mask, merged.obstacle, cell)
            mask[cell] = True
            pose = agents[k].est_pose
            _open_start(mask, merged.world_to_index(pose.x, pose.y))
            fields[k] = fmm_field(mask, cell, res)
        self.goal_log.append((self.state.t,
                              {k: merged.index_to_world(*c) for k, c in goals.items()}))
        for k, c in goals.items():
            self.prev_goals[k] = c
            self.goal_history[k].append(c)
        replanned: set[int] = set()

        for _ in range(n_steps):
            if self.done:
                break
            actions = {k: self._nav_action(k, goals, fields, merged, replanned)
                       for k in self.state.active_ids()}
            before = {a.agent_id: (a.est_pose.x, a.est_pose.y) for a in self.state.agents}
            self.state, scans = sim.step(self.state, actions)
            for a in self.state.agents:
                k = a.agent_id
                self._stalled[k] = (actions.get(k) == Action.FORWARD
                                    and (a.est_pose.x, a.est_pose.y) == before[k])
            for k, scan in scans.items():
                self._integrate(k, scan)
            for k in self.state.active_ids():     # catch-up scan on activation
                if k not in self.known_active:
                    self.known_active.add(k)
                    self._integrate(k, sim.sense(self.state, k))
            self.coverage_trace.append(self.ratio())
            self._check_event()

        prev = self.last_snapshot
        snap = self._make_snapshot(prev)
        self.last_snapshot = snap
        return prev, snap

    def _nav_action(self, k: int, goals, fields, merged, replanned) -> Action:
        agent = next(a for a in self.state.agents if a.agent_id == k)
        pose = agent.est_pose
        r, c = merged.world_to_index(pose.x, pose.y)
        h, w = merged.shape
        cell = (min(max(r, 0), h - 1), min(max(c, 0), w - 1))
        field = fields.get(k)
        if field is None:                 # activated mid-macro: sweep in place
            return Action.TURN_LEFT
        try:
            path = plan_path(field, cell)
        except NoPath:
            if k in replanned:
                return Action.TURN_LEFT
            replanned.add(k)              # rebuild once per macro step
            fresh = self.merged_refined()
            # Minimal clearance on the retry: the comfortable dilation radius
            # can pinch shut narrow frontier openings and strand the field.
            mask = dilate_obstacles(fresh, radius_cells=1)
            carve_access(mask, fresh.obstacle, goals[k])
            mask[goals[k]] = True
            _open_start(mask, cell)
            fields[k] = fmm_field(mask, goals[k], fresh.resolution)
            try:
                path = plan_path(fields[k], cell)
            except NoPath:
                return Action.TURN_LEFT
        sub = next_subgoal(path, merged.resolution, origin_cell=merged.origin_cell,
                           free_mask=merged.obstacle < 0.5)
        action = local_controller(pose, sub)
        # Wedged recovery: a blocked forward move starts an escape in which the
        # agent alternates left turns with forward attempts until one lands,
        # instead of letting the controller steer straight back into the wall.
        if self._stalled.get(k):
            self._escape[k] = self._escape.get(k, 0) + 1
            return Action.TURN_LEFT
        if self._escape.get(k, 0) > 0:
            self._escape[k] = 0
            return Action.FORWARD
        return action
