"""Episode records and the three headline exploration metrics.

Coverage counts a Free scene cell as explored once any agent's sensing
covered it. The overlap metric is normalized by the scene's explorable
area, so values are comparable only between runs of this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mapping import FrameMismatch, OccGrid
from .scenes import Scene, explorable_area

OVERLAP_PROB_SUM = 1.2      # pair of explored probabilities counts as overlap above this


class SingleAgent(Exception):
    """Mutual overlap needs at least two agents."""


@dataclass
class EpisodeRecord:
    scene_name: str
    planner: str
    schedule: str
    seed: int
    coverage_trace: list[float]             # team ratio after sim steps 1..L
    steps_to_90: int
    final_coverage: float
    overlap_at_90: float | None             # None when a single agent ran
    goal_log: list = field(default_factory=list)     # (step, {agent: (x, y)})
    reward_log: list = field(default_factory=list)   # one breakdown dict per macro step
    snapshot_explored: dict | None = None   # agent -> explored grid at the 90% event


def _scene_window(grid: OccGrid, scene_shape):
    """Slices of the overlap between grid arrays and the scene frame.

    Returns (scene_slices, grid_slices) or None when disjoint.
    """
    r0, c0 = grid.origin_cell
    h, w = grid.shape
    sh, sw = scene_shape
    gr0, gc0 = max(r0, 0), max(c0, 0)
    gr1, gc1 = min(r0 + h, sh), min(c0 + w, sw)
    if gr0 >= gr1 or gc0 >= gc1:
        return None
    scene_sl = (slice(gr0, gr1), slice(gc0, gc1))
    grid_sl = (slice(gr0 - r0, gr1 - r0), slice(gc0 - c0, gc1 - c0))
    return scene_sl, grid_sl


def coverage_ratio(merged: OccGrid, scene: Scene) -> float:
    """Explored Free cells / all Free cells."""
    free = scene.free_mask
    total = int(np.count_nonzero(free))
    win = _scene_window(merged, scene.shape)
    if win is None or total == 0:
        return 0.0
    scene_sl, grid_sl = win
    covered = np.count_nonzero((merged.explored[grid_sl] >= 0.5) & free[scene_sl])
    return covered / total


def steps_to_threshold(record: EpisodeRecord, threshold: float = 0.9) -> int:
    """First 1-based step with coverage >= threshold; episode length if never."""
    for i, ratio in enumerate(record.coverage_trace):
        if ratio >= threshold:
            return i + 1
    return len(record.coverage_trace)


def mutual_overlap(grids, scene: Scene) -> float:
    """Pairwise-averaged overlapping explored area over explorable area.

    `grids` are the per-agent maps snapshotted when coverage first reached
    90%, all in one shared frame. A cell overlaps for a pair when the two
    explored probabilities sum above 1.2; only Free scene cells count.
    """
    grids = list(grids)
    if len(grids) < 2:
        raise SingleAgent(f"need >= 2 agent maps, got {len(grids)}")
    base = grids[0]
    for g in grids[1:]:
        if (g.origin_cell != base.origin_cell or g.shape != base.shape
                or g.resolution != base.resolution):
            raise FrameMismatch("agent maps must share one frame")
    win = _scene_window(base, scene.shape)
    cell_area = base.resolution ** 2
    areas = []
    for i in range(len(grids)):
        for j in range(i + 1, len(grids)):
            if win is None:
                areas.append(0.0)
                continue
            scene_sl, grid_sl = win
            pair_sum = grids[i].explored[grid_sl] + grids[j].explored[grid_sl]
            n = np.count_nonzero((pair_sum > OVERLAP_PROB_SUM) & scene.free_mask[scene_sl])
            areas.append(n * cell_area)
    return float(np.mean(areas) / explorable_area(scene))
