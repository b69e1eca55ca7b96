"""Slow, literal reference implementations the tests compare against.

Nothing here imports the package under test. Each function states the rule
it implements in the plainest possible form, trading speed for obviousness.
"""

from __future__ import annotations

import collections
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _sp_dijkstra


def dijkstra8(mask: np.ndarray, source: tuple[int, int], resolution: float = 1.0) -> np.ndarray:
    """Shortest-path distances on the 8-connected grid graph.

    Orthogonal moves cost resolution, diagonal moves sqrt(2)*resolution.
    Unreachable or blocked cells hold +inf. An 8-connected polyline can only
    overestimate the continuous shortest path, so this bounds an eikonal
    solution from above.
    """
    h, w = mask.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, costs = [], [], []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            src_r = slice(max(0, -dr), h - max(0, dr))
            src_c = slice(max(0, -dc), w - max(0, dc))
            dst_r = slice(max(0, dr), h + min(0, dr))
            dst_c = slice(max(0, dc), w + min(0, dc))
            ok = mask[src_r, src_c] & mask[dst_r, dst_c]
            rows.append(idx[src_r, src_c][ok])
            cols.append(idx[dst_r, dst_c][ok])
            step = resolution * (math.sqrt(2.0) if dr and dc else 1.0)
            costs.append(np.full(int(ok.sum()), step))
    graph = coo_matrix(
        (np.concatenate(costs), (np.concatenate(rows), np.concatenate(cols))),
        shape=(h * w, h * w))
    dist = _sp_dijkstra(graph.tocsr(), indices=int(idx[source[0], source[1]]))
    return dist.reshape(h, w)


def euclid_field(shape: tuple[int, int], source: tuple[int, int],
                 resolution: float = 1.0) -> np.ndarray:
    """Straight-line distance from the source cell to every cell."""
    rr, cc = np.indices(shape)
    return np.hypot(rr - source[0], cc - source[1]) * resolution


def brute_frontiers(explored: np.ndarray, obstacle: np.ndarray) -> list[tuple[int, int]]:
    """Row-major frontier cells by the plain definition.

    A frontier is an explored (>= 0.5) non-obstacle (< 0.5) cell with at
    least one 4-neighbor inside the array whose explored value is < 0.5.
    """
    h, w = explored.shape
    out = []
    for r in range(h):
        for c in range(w):
            if explored[r, c] < 0.5 or obstacle[r, c] >= 0.5:
                continue
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < h and 0 <= nc < w and explored[nr, nc] < 0.5:
                    out.append((r, c))
                    break
    return out


def disk_cell_count(radius: int) -> int:
    """Number of integer offsets with dx^2 + dy^2 <= radius^2."""
    n = 0
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            if dr * dr + dc * dc <= radius * radius:
                n += 1
    return n


def half_plane_gain(radius: int) -> int:
    """Lattice disk points whose row offset is >= 0 (boundary row included)."""
    n = 0
    for dr in range(0, radius + 1):
        for dc in range(-radius, radius + 1):
            if dr * dr + dc * dc <= radius * radius:
                n += 1
    return n


def free_components(free: np.ndarray) -> int:
    """4-connected component count of a boolean mask, by BFS flood fill."""
    h, w = free.shape
    seen = np.zeros_like(free, dtype=bool)
    n = 0
    for r0 in range(h):
        for c0 in range(w):
            if not free[r0, c0] or seen[r0, c0]:
                continue
            n += 1
            queue = collections.deque([(r0, c0)])
            seen[r0, c0] = True
            while queue:
                r, c = queue.popleft()
                for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        queue.append((nr, nc))
    return n


def bfs_hops(trav: np.ndarray, source: tuple[int, int]) -> np.ndarray:
    """4-connected hop counts over a traversability mask; -1 unreachable."""
    h, w = trav.shape
    dist = np.full((h, w), -1, dtype=int)
    if not trav[source[0], source[1]]:
        return dist
    dist[source[0], source[1]] = 0
    queue = collections.deque([source])
    while queue:
        r, c = queue.popleft()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and trav[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = dist[r, c] + 1
                queue.append((nr, nc))
    return dist


def linkage_partition(cells: np.ndarray, linkage: float) -> set[frozenset]:
    """Single-linkage clusters as a set of frozensets of (r, c) tuples.

    Quadratic union-find over the "Euclidean distance <= linkage" graph.
    """
    pts = [tuple(map(int, p)) for p in np.asarray(cells).reshape(-1, 2)]
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1])
            if d <= linkage + 1e-12:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri

    groups: dict[int, set] = {}
    for i, p in enumerate(pts):
        groups.setdefault(find(i), set()).add(p)
    return {frozenset(g) for g in groups.values()}


def nearest_agent_labels(shape: tuple[int, int], agent_cells: list[tuple[int, int]]) -> np.ndarray:
    """Per-cell index of the Euclidean-nearest agent, ties to the lower index."""
    rr, cc = np.indices(shape)
    best = np.zeros(shape, dtype=int)
    best_d = np.full(shape, np.inf)
    for i, (ar, ac) in enumerate(agent_cells):
        d = np.hypot(rr - ar, cc - ac)
        closer = d < best_d - 1e-12
        best[closer] = i
        best_d[closer] = d[closer]
    return best
