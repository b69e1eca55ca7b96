"""Synchronous multi-agent kinematics and ray sensing on a scene grid.

Agents are points with discrete actions (turn +-10 degrees, forward 0.25 m).
Each carries a ground-truth pose and an estimated pose; actuation and odometry
noise are independent zero-mean Gaussians and vanish when the sigmas are zero,
in which case the two poses stay bitwise equal. Sensing casts evenly spaced
rays across a forward field of view against the true scene and reports
bearings relative to the heading, so integration can replay them in the
estimated frame.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import scenes
from .grids import cell_center, wrap_to_pi

FORWARD_STEP_M = 0.25
TURN_STEP_RAD = np.deg2rad(10.0)
MIN_SPAWN_SEPARATION_M = 0.5

HIT_MAXRANGE = 0
HIT_OBSTACLE = 1


class Action(enum.IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2


class SpawnFailure(Exception):
    """Could not place the team in the spawn region with required separation."""


@dataclass
class SensorParams:
    fov_deg: float = 90.0
    n_rays: int = 90
    max_range_m: float = 3.5


@dataclass
class NoiseParams:
    sigma_t: float = 0.005        # metres, actuation/odometry translation
    sigma_r_deg: float = 0.3      # degrees, actuation/odometry rotation

    @classmethod
    def off(cls) -> "NoiseParams":
        return cls(0.0, 0.0)


@dataclass
class Pose:
    x: float
    y: float
    theta: float

    def cell(self, resolution: float) -> tuple[int, int]:
        return int(np.floor(self.y / resolution)), int(np.floor(self.x / resolution))

    def copy(self) -> "Pose":
        return Pose(self.x, self.y, self.theta)


@dataclass
class TeamSchedule:
    """Active head-count switches from n_start to n_after at switch_step."""

    n_start: int
    n_after: int
    switch_step: int = 90

    @classmethod
    def fixed(cls, n: int) -> "TeamSchedule":
        return cls(n, n, 0)

    @classmethod
    def parse(cls, text: str) -> "TeamSchedule":
        """Parse "N" (fixed) or "N:M@S" (N agents switching to M at step S)."""
        text = text.strip()
        if ":" not in text:
            return cls.fixed(int(text))
        head, tail = text.split(":", 1)
        if "@" not in tail:
            raise ValueError(f"schedule {text!r} needs N:M@S with a switch step")
        mid, step = tail.split("@", 1)
        return cls(int(head), int(mid), int(step))

    @property
    def max_agents(self) -> int:
        return max(self.n_start, self.n_after)

    def active_count(self, t: int) -> int:
        return self.n_after if t >= self.switch_step else self.n_start

    def __str__(self) -> str:
        if self.n_start == self.n_after:
            return str(self.n_start)
        return f"{self.n_start}:{self.n_after}@{self.switch_step}"


@dataclass
class LocalScan:
    """One sensing sweep. Bearings are relative to the heading at capture."""

    origin: Pose
    bearings: np.ndarray      # (K,) rad, strictly increasing across the FOV
    ranges: np.ndarray        # (K,) m, in (0, max_range]
    hits: np.ndarray          # (K,) int8 of HIT_OBSTACLE / HIT_MAXRANGE
    max_range_m: float

    def rays(self):
        return list(zip(self.bearings.tolist(), self.ranges.tolist(), self.hits.tolist()))


@dataclass
class AgentState:
    agent_id: int
    true_pose: Pose
    est_pose: Pose
    active: bool
    trajectory: list = field(default_factory=list)


@dataclass
class SimState:
    scene: scenes.Scene
    schedule: TeamSchedule
    agents: list
    t: int
    rng: np.random.Generator
    sensor: SensorParams
    noise: NoiseParams

    def active_ids(self) -> list[int]:
        return [a.agent_id for a in self.agents if a.active]


def reset(
    scene: scenes.Scene,
    schedule: TeamSchedule,
    seed: int,
    sensor: SensorParams | None = None,
    noise: NoiseParams | None = None,
) -> SimState:
    """Place max(n_start, n_after) agents on spawn cells >= 0.5 m apart.

    Extra agents of a growing schedule exist immediately but stay inactive
    (pose frozen, no sensing) until the switch step.
    """
    rng = np.random.default_rng(seed)
    n_total = schedule.max_agents
    candidates = np.argwhere(scene.spawn_mask)
    if len(candidates) == 0:
        raise SpawnFailure(f"{scene.name}: empty spawn region")

    placed: list[tuple[float, float]] = []
    for _ in range(20):
        placed.clear()
        order = rng.permutation(len(candidates))
        for idx in order:
            r, c = candidates[idx]
            x, y = cell_center(int(r), int(c), scene.resolution)
            if all(np.hypot(x - px, y - py) >= MIN_SPAWN_SEPARATION_M for px, py in placed):
                placed.append((x, y))
                if len(placed) == n_total:
                    break
        if len(placed) == n_total:
            break
    if len(placed) < n_total:
        raise SpawnFailure(
            f"{scene.name}: cannot place {n_total} agents {MIN_SPAWN_SEPARATION_M} m apart"
        )

    n_active = schedule.active_count(0)
    agents = []
    for i, (x, y) in enumerate(placed):
        theta = float(rng.uniform(0.0, 2.0 * np.pi))
        birth = Pose(x, y, theta)
        agents.append(
            AgentState(
                agent_id=i,
                true_pose=birth.copy(),
                est_pose=birth.copy(),
                active=i < n_active,
                trajectory=[birth.copy()],
            )
        )
    return SimState(
        scene=scene,
        schedule=schedule,
        agents=agents,
        t=0,
        rng=rng,
        sensor=sensor or SensorParams(),
        noise=noise or NoiseParams(),
    )


def _segment_blocked(scene: scenes.Scene, x0, y0, x1, y1) -> bool:
    # Sample the swept segment at half-cell pitch; any non-free cell blocks.
    res = scene.resolution
    length = float(np.hypot(x1 - x0, y1 - y0))
    n = max(int(np.ceil(length / (res * 0.5))), 1)
    ts = np.linspace(0.0, 1.0, n + 1)
    xs = x0 + (x1 - x0) * ts
    ys = y0 + (y1 - y0) * ts
    rows = np.floor(ys / res).astype(np.int64)
    cols = np.floor(xs / res).astype(np.int64)
    h, w = scene.shape
    oob = (rows < 0) | (rows >= h) | (cols < 0) | (cols >= w)
    if oob.any():
        return True
    return bool((scene.cells[rows, cols] != scenes.FREE).any())


def apply_action(state: SimState, agent_id: int, action: Action) -> SimState:
    """Advance one agent. Forward moves 0.25 m unless the sweep hits a
    non-free cell, in which case neither pose changes (the wheel never turned).
    """
    agent = state.agents[agent_id]
    tp, ep = agent.true_pose, agent.est_pose
    sig_t, sig_r = state.noise.sigma_t, np.deg2rad(state.noise.sigma_r_deg)

    if action == Action.FORWARD:
        d_true = FORWARD_STEP_M + (state.rng.normal(0.0, sig_t) if sig_t > 0 else 0.0)
        d_est = FORWARD_STEP_M + (state.rng.normal(0.0, sig_t) if sig_t > 0 else 0.0)
        nx = tp.x + d_true * np.cos(tp.theta)
        ny = tp.y + d_true * np.sin(tp.theta)
        if not _segment_blocked(state.scene, tp.x, tp.y, nx, ny):
            tp.x, tp.y = float(nx), float(ny)
            ep.x += float(d_est * np.cos(ep.theta))
            ep.y += float(d_est * np.sin(ep.theta))
    else:
        sign = 1.0 if action == Action.TURN_LEFT else -1.0
        dt_true = sign * TURN_STEP_RAD + (state.rng.normal(0.0, sig_r) if sig_r > 0 else 0.0)
        dt_est = sign * TURN_STEP_RAD + (state.rng.normal(0.0, sig_r) if sig_r > 0 else 0.0)
        tp.theta = float((tp.theta + dt_true) % (2.0 * np.pi))
        ep.theta = float((ep.theta + dt_est) % (2.0 * np.pi))
    return state


def sense(state: SimState, agent_id: int) -> LocalScan:
    """Cast K evenly spaced rays across the FOV from the agent's true pose."""
    agent = state.agents[agent_id]
    scene, sensor = state.scene, state.sensor
    res = scene.resolution
    pose = agent.true_pose

    half = np.deg2rad(sensor.fov_deg) / 2.0
    rel = np.linspace(-half, half, sensor.n_rays)
    abs_bearings = pose.theta + rel

    step = res * 0.5
    n_steps = int(np.ceil(sensor.max_range_m / step))
    ts = np.arange(1, n_steps + 1) * step
    ts = np.minimum(ts, sensor.max_range_m)

    xs = pose.x + np.cos(abs_bearings)[:, None] * ts[None, :]
    ys = pose.y + np.sin(abs_bearings)[:, None] * ts[None, :]
    rows = np.floor(ys / res).astype(np.int64)
    cols = np.floor(xs / res).astype(np.int64)

    h, w = scene.shape
    oob = (rows < 0) | (rows >= h) | (cols < 0) | (cols >= w)
    kind = np.full(rows.shape, scenes.EXTERIOR, dtype=np.int8)
    inb = ~oob
    kind[inb] = scene.cells[rows[inb], cols[inb]]

    blocked = kind != scenes.FREE
    any_block = blocked.any(axis=1)
    first = np.argmax(blocked, axis=1)

    ranges = np.full(sensor.n_rays, sensor.max_range_m)
    hits = np.full(sensor.n_rays, HIT_MAXRANGE, dtype=np.int8)

    obstacle_hit = any_block & (kind[np.arange(sensor.n_rays), first] == scenes.OBSTACLE)
    exterior_hit = any_block & ~obstacle_hit
    ranges[obstacle_hit] = ts[first[obstacle_hit]]
    hits[obstacle_hit] = HIT_OBSTACLE
    # Exterior stops the ray one sample short and is never reported as a hit.
    ranges[exterior_hit] = np.maximum(ts[first[exterior_hit]] - step, step * 0.5)

    return LocalScan(
        origin=pose.copy(),
        bearings=rel,
        ranges=ranges,
        hits=hits,
        max_range_m=sensor.max_range_m,
    )


def step(state: SimState, actions) -> tuple[SimState, dict[int, LocalScan]]:
    """Apply all active agents' actions simultaneously, then sense.

    `actions` maps agent id -> Action and must cover every active agent;
    entries for inactive agents are ignored. The head-count schedule applies to
    the step's start time, so a switch at step s first affects the step taken
    at t == s.
    """
    active = state.active_ids()
    missing = [a for a in active if a not in actions]
    if missing:
        raise ValueError(f"actions missing for active agents {missing}")

    for agent_id in active:
        apply_action(state, agent_id, actions[agent_id])
    state.t += 1

    n_active = state.schedule.active_count(state.t)
    for agent in state.agents:
        agent.active = agent.agent_id < n_active

    scans: dict[int, LocalScan] = {}
    for agent_id in active:
        scans[agent_id] = sense(state, agent_id)
        state.agents[agent_id].trajectory.append(state.agents[agent_id].est_pose.copy())
    return state, scans
