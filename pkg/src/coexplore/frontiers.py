"""Frontier detection, information gain, and frontier clustering.

A frontier is an explored free cell with at least one 4-neighbor that is
still unexplored (neighbors outside the arrays do not count). All planners
share this machinery; probabilities are binarized at 0.5 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .grids import disk_offsets
from .mapping import OccGrid

VIRTUAL_EXPLORE_RADIUS_M = 2.5
GAIN_RADIUS_M = 1.5
CLUSTER_LINKAGE_CELLS = 5.0


class NoFrontier(Exception):
    """The map offers no frontier cell to chase."""


@dataclass
class FrontierCluster:
    center: tuple[int, int]     # member cell nearest the member centroid
    members: np.ndarray         # (M, 2) row/col cell indices
    weight: int                 # = M


def virtual_explore(grid: OccGrid, pose_xy, radius_m: float = VIRTUAL_EXPLORE_RADIUS_M) -> OccGrid:
    """Copy of `grid` with cells within `radius_m` of the pose marked explored.

    Used only while selecting goals, to suppress blind-spot frontiers right
    next to the agent; the persistent map is never touched.
    """
    out = grid.copy()
    r, c = out.world_to_index(pose_xy[0], pose_xy[1])
    offs = disk_offsets(int(round(radius_m / out.resolution)))
    rr = offs[:, 0] + r
    cc = offs[:, 1] + c
    h, w = out.shape
    keep = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    out.explored[rr[keep], cc[keep]] = 1.0
    return out


def detect_frontiers(grid: OccGrid) -> np.ndarray:
    """(K, 2) array of frontier cells in row-major order."""
    explored = grid.explored >= 0.5
    free = explored & (grid.obstacle < 0.5)
    unexplored = ~explored
    beside = np.zeros_like(free)
    beside[1:, :] |= unexplored[:-1, :]
    beside[:-1, :] |= unexplored[1:, :]
    beside[:, 1:] |= unexplored[:, :-1]
    beside[:, :-1] |= unexplored[:, 1:]
    return np.argwhere(free & beside)


def information_gain(grid: OccGrid, cell, radius_m: float = GAIN_RADIUS_M) -> int:
    """Unexplored-cell count within `radius_m` of `cell` (off-map excluded)."""
    offs = disk_offsets(int(round(radius_m / grid.resolution)))
    rr = offs[:, 0] + int(cell[0])
    cc = offs[:, 1] + int(cell[1])
    h, w = grid.shape
    keep = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    return int(np.count_nonzero(grid.explored[rr[keep], cc[keep]] < 0.5))


def gains_at(grid: OccGrid, cells, radius_m: float = GAIN_RADIUS_M) -> np.ndarray:
    """information_gain for a (K, 2) batch of cells, vectorized."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    offs = disk_offsets(int(round(radius_m / grid.resolution)))
    rr = cells[:, 0, None] + offs[None, :, 0]
    cc = cells[:, 1, None] + offs[None, :, 1]
    h, w = grid.shape
    inb = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    unexp = grid.explored[np.clip(rr, 0, h - 1), np.clip(cc, 0, w - 1)] < 0.5
    return (unexp & inb).sum(axis=1)


def gain_map(grid: OccGrid, radius_m: float = GAIN_RADIUS_M) -> np.ndarray:
    """information_gain evaluated at every cell, as one convolution."""
    radius = int(round(radius_m / grid.resolution))
    offs = disk_offsets(radius)
    kernel = np.zeros((2 * radius + 1, 2 * radius + 1))
    kernel[offs[:, 0] + radius, offs[:, 1] + radius] = 1.0
    unexplored = (grid.explored < 0.5).astype(float)
    counts = ndimage.convolve(unexplored, kernel, mode="constant", cval=0.0)
    return np.rint(counts).astype(np.int64)


def cluster_frontiers(frontiers: np.ndarray, linkage_cells: float = CLUSTER_LINKAGE_CELLS):
    """Single-linkage clusters of frontier cells.

    Two cells join the same cluster when some chain of members links them with
    Euclidean hops of at most `linkage_cells`. Returns clusters ordered by
    their first member in row-major order.
    """
    pts = np.asarray(frontiers, dtype=np.int64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return []
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in cKDTree(pts).query_pairs(r=linkage_cells + 1e-9):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    clusters = []
    for root in sorted(groups):
        members = pts[groups[root]]
        centroid = members.mean(axis=0)
        d2 = ((members - centroid) ** 2).sum(axis=1)
        center = members[int(np.argmin(d2))]     # argmin ties resolve row-major
        clusters.append(FrontierCluster(center=(int(center[0]), int(center[1])),
                                        members=members, weight=len(members)))
    return clusters
