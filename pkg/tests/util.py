"""Shared builders for hand-made scenes, grids, and planner contexts."""

from __future__ import annotations

import numpy as np

from coexplore.mapping import OccGrid
from coexplore.planners import PlannerContext
from coexplore.scenes import FREE, OBSTACLE, EXTERIOR, GeneratorParams, Scene
from coexplore.simulator import Pose

GLYPHS = {".": FREE, "#": OBSTACLE, "X": EXTERIOR}

# Small, fast layouts for episode-driving tests.
TINY_PARAMS = GeneratorParams(rooms=(2, 3), side=(48, 64), room_side=(16, 28))


def scene_from_rows(rows, resolution: float = 0.05, spawn=None, name: str = "test") -> Scene:
    grid = np.array([[GLYPHS[ch] for ch in row] for row in rows], dtype=np.int8)
    spawn_mask = (grid == FREE) if spawn is None else np.asarray(spawn, dtype=bool)
    scene = Scene(grid, resolution, spawn_mask, name=name)
    scene.validate()
    return scene


def grid_of(explored, obstacle=None, resolution: float = 0.05, origin=(0, 0)) -> OccGrid:
    explored = np.asarray(explored, dtype=float)
    if obstacle is None:
        obstacle = np.zeros_like(explored)
    return OccGrid(explored=explored, obstacle=np.asarray(obstacle, dtype=float),
                   origin_cell=tuple(origin), resolution=resolution)


def random_grid(rng, shape=(50, 50), p_explored=0.5, p_obstacle=0.15,
                resolution: float = 0.05) -> OccGrid:
    """Partially explored map with obstacles only on explored cells."""
    explored = (rng.random(shape) < p_explored).astype(float)
    obstacle = ((rng.random(shape) < p_obstacle) & (explored >= 0.5)).astype(float)
    return grid_of(explored, obstacle, resolution=resolution)


def make_ctx(merged: OccGrid, poses_xy, seed: int = 0, timestep: int = 0) -> PlannerContext:
    poses = {k: Pose(float(x), float(y), 0.0) for k, (x, y) in enumerate(poses_xy)}
    return PlannerContext(
        merged=merged,
        poses=poses,
        trajectories={k: [p.copy()] for k, p in poses.items()},
        previous_goals={k: None for k in poses},
        rng=np.random.default_rng(seed),
        timestep=timestep)
