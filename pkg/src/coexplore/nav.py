"""Local planning: traversability, eikonal distance fields, descent paths.

The distance field is a first-order fast-marching solve seeded at the goal
cell. Alongside the two-axis quadratic update the kernel relaxes one-sided
axis (h) and diagonal (sqrt(2) h) candidates over the 8-neighborhood, which
keeps the field at or below the 8-connected graph distance cell-for-cell while
retaining the quadratic far-field accuracy. Cells within a small Chebyshev
ball of the source that have a clear line of sight are seeded with their exact
Euclidean distance, removing the rarefaction-fan error a point source
otherwise spreads along diagonals. Paths walk steepest descent from the agent
cell to the source; every finite cell strictly dominates some 8-neighbor, so
the walk always terminates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .grids import wrap_to_pi
from .mapping import OccGrid
from .simulator import Action, Pose

TURN_THRESHOLD_DEG = 15.0
DEFAULT_LOOKAHEAD_M = 0.5
DEFAULT_DILATION_CELLS = 3     # 0.15 m clearance; corridors stay 6+ cells wide


class SourceBlocked(Exception):
    """fmm_field was seeded on a non-traversable cell."""


class NoPath(Exception):
    """Start cell is unreachable from the field source."""


def dilate_obstacles(grid: OccGrid, radius_cells: int = DEFAULT_DILATION_CELLS) -> np.ndarray:
    """Boolean traversability mask aligned with `grid`.

    A cell is traversable iff no obstacle cell lies within the given Chebyshev
    radius (radius 0 checks only the cell itself). Unexplored cells count as
    traversable so goals beside or beyond the frontier stay reachable; keep the
    radius at most floor((corridor_width - 1) / 2) or passages close.
    """
    blocked = grid.obstacle >= 0.5
    if radius_cells > 0:
        size = 2 * radius_cells + 1
        blocked = ndimage.maximum_filter(blocked, size=size, mode="constant", cval=False)
    return ~blocked


@dataclass
class DistanceField:
    values: np.ndarray          # (H, W) metres; +inf where blocked/unreached
    source: tuple[int, int]
    mask: np.ndarray            # traversability the field was solved on


FMM_SEED_RADIUS = 4


@njit(cache=True)
def _fmm_kernel(mask, sr, sc, h, seed_radius):
    H, W = mask.shape
    INF = np.inf
    T = np.full((H, W), INF)
    state = np.zeros((H, W), dtype=np.uint8)  # 0 far, 1 narrow, 2 frozen

    cap = 8 * H * W + 16
    heap_t = np.empty(cap)
    heap_i = np.empty(cap, dtype=np.int64)

    def push(n_heap, t, idx):
        heap_t[n_heap] = t
        heap_i[n_heap] = idx
        pos = n_heap
        while pos > 0:
            par = (pos - 1) // 2
            if heap_t[par] <= heap_t[pos]:
                break
            heap_t[pos], heap_t[par] = heap_t[par], heap_t[pos]
            heap_i[pos], heap_i[par] = heap_i[par], heap_i[pos]
            pos = par
        return n_heap + 1

    T[sr, sc] = 0.0
    n_heap = push(0, 0.0, sr * W + sc)
    state[sr, sc] = 1

    # Exact Euclidean seeds around the source (line of sight required).
    for dr in range(-seed_radius, seed_radius + 1):
        for dc in range(-seed_radius, seed_radius + 1):
            if dr == 0 and dc == 0:
                continue
            nr = sr + dr
            nc = sc + dc
            if nr < 0 or nr >= H or nc < 0 or nc >= W or not mask[nr, nc]:
                continue
            dist = np.sqrt(dr * dr + dc * dc)
            steps = int(dist * 4) + 1
            clear = True
            for s in range(1, steps):
                ir = int(round(sr + dr * s / steps))
                ic = int(round(sc + dc * s / steps))
                if not mask[ir, ic]:
                    clear = False
                    break
            if clear:
                T[nr, nc] = dist * h
                state[nr, nc] = 1
                n_heap = push(n_heap, T[nr, nc], nr * W + nc)

    sqrt2 = np.sqrt(2.0)

    while n_heap > 0:
        # pop min
        idx = heap_i[0]
        n_heap -= 1
        heap_t[0] = heap_t[n_heap]
        heap_i[0] = heap_i[n_heap]
        pos = 0
        while True:
            l = 2 * pos + 1
            r = l + 1
            small = pos
            if l < n_heap and heap_t[l] < heap_t[small]:
                small = l
            if r < n_heap and heap_t[r] < heap_t[small]:
                small = r
            if small == pos:
                break
            heap_t[pos], heap_t[small] = heap_t[small], heap_t[pos]
            heap_i[pos], heap_i[small] = heap_i[small], heap_i[pos]
            pos = small

        cr = idx // W
        cc = idx % W
        if state[cr, cc] == 2:
            continue
        state[cr, cc] = 2

        # relax the 8 neighbors of the frozen cell
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr = cr + dr
                nc = cc + dc
                if nr < 0 or nr >= H or nc < 0 or nc >= W:
                    continue
                if not mask[nr, nc] or state[nr, nc] == 2:
                    continue

                # two-axis quadratic from frozen axis neighbors
                tx = INF
                if nc - 1 >= 0 and state[nr, nc - 1] == 2 and T[nr, nc - 1] < tx:
                    tx = T[nr, nc - 1]
                if nc + 1 < W and state[nr, nc + 1] == 2 and T[nr, nc + 1] < tx:
                    tx = T[nr, nc + 1]
                ty = INF
                if nr - 1 >= 0 and state[nr - 1, nc] == 2 and T[nr - 1, nc] < ty:
                    ty = T[nr - 1, nc]
                if nr + 1 < H and state[nr + 1, nc] == 2 and T[nr + 1, nc] < ty:
                    ty = T[nr + 1, nc]

                cand = INF
                if tx < INF and ty < INF:
                    diff = tx - ty
                    if diff < 0:
                        diff = -diff
                    if diff >= h:
                        cand = (tx if tx < ty else ty) + h
                    else:
                        cand = 0.5 * (tx + ty + np.sqrt(2.0 * h * h - diff * diff))
                elif tx < INF:
                    cand = tx + h
                elif ty < INF:
                    cand = ty + h

                # one-sided diagonal candidates
                for er in (-1, 1):
                    for ec in (-1, 1):
                        mr = nr + er
                        mc = nc + ec
                        if mr < 0 or mr >= H or mc < 0 or mc >= W:
                            continue
                        if state[mr, mc] == 2:
                            alt = T[mr, mc] + sqrt2 * h
                            if alt < cand:
                                cand = alt

                if cand < T[nr, nc]:
                    T[nr, nc] = cand
                    state[nr, nc] = 1
                    n_heap = push(n_heap, cand, nr * W + nc)
    return T


def fmm_field(mask: np.ndarray, source: tuple[int, int], resolution: float = 1.0) -> DistanceField:
    """Travel-distance field (metres) over a traversability mask."""
    sr, sc = int(source[0]), int(source[1])
    if sr < 0 or sr >= mask.shape[0] or sc < 0 or sc >= mask.shape[1] or not mask[sr, sc]:
        raise SourceBlocked(f"source {source} is not traversable")
    values = _fmm_kernel(
        np.ascontiguousarray(mask, dtype=np.bool_), sr, sc, float(resolution), FMM_SEED_RADIUS
    )
    return DistanceField(values=values, source=(sr, sc), mask=mask)


_NEIGH8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def plan_path(field: DistanceField, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Steepest-descent cell walk from start down to the field source."""
    h, w = field.values.shape
    r, c = int(start[0]), int(start[1])
    if r < 0 or r >= h or c < 0 or c >= w or not np.isfinite(field.values[r, c]):
        raise NoPath(f"start {start} unreachable from source {field.source}")
    path = [(r, c)]
    while (r, c) != field.source:
        best = None
        best_v = field.values[r, c]
        for dr, dc in _NEIGH8:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and field.values[nr, nc] < best_v:
                best_v = field.values[nr, nc]
                best = (nr, nc)
        if best is None:   # cannot happen on a well-formed field
            raise NoPath(f"descent stalled at {(r, c)}")
        r, c = best
        path.append(best)
    return path


def carve_access(mask: np.ndarray, obstacle: np.ndarray, cell,
                 radius: int = DEFAULT_DILATION_CELLS + 1) -> None:
    """Open non-obstacle cells around `cell` in a planning mask, in place.

    Obstacle dilation can swallow a cell hugging a wall (an agent pushed up
    against it, or a frontier right beside it); carving a small bubble of
    truly free or unknown cells reconnects it without cutting through walls.
    """
    h, w = mask.shape
    r, c = int(cell[0]), int(cell[1])
    r0, r1 = max(0, r - radius), min(h, r + radius + 1)
    c0, c1 = max(0, c - radius), min(w, c + radius + 1)
    mask[r0:r1, c0:c1] |= obstacle[r0:r1, c0:c1] < 0.5


def _line_clear(free: np.ndarray, a, b) -> bool:
    n = max(2, int(np.hypot(b[0] - a[0], b[1] - a[1]) * 2) + 2)
    rr = np.rint(np.linspace(a[0], b[0], n)).astype(np.int64)
    cc = np.rint(np.linspace(a[1], b[1], n)).astype(np.int64)
    return bool(free[rr, cc].all())


def next_subgoal(
    path,
    resolution: float,
    lookahead_m: float = DEFAULT_LOOKAHEAD_M,
    origin_cell: tuple[int, int] = (0, 0),
    free_mask: np.ndarray | None = None,
) -> tuple[float, float]:
    """World center of the farthest path cell within lookahead of the start.

    With `free_mask` given (True where a straight segment may pass), cells
    are also required to be in line of sight of the start, so the controller
    never aims through a corner it cannot cut.
    """
    r0, c0 = path[0]
    chosen = path[0]
    for cell in path[1:]:
        d = np.hypot(cell[0] - r0, cell[1] - c0) * resolution
        if d > lookahead_m + 1e-9:
            break
        if free_mask is not None and not _line_clear(free_mask, path[0], cell):
            break
        chosen = cell
    gr = chosen[0] + origin_cell[0]
    gc = chosen[1] + origin_cell[1]
    return (gc + 0.5) * resolution, (gr + 0.5) * resolution


def local_controller(pose: Pose, subgoal_xy: tuple[float, float]) -> Action:
    """Turn toward the sub-goal when it is more than 15 degrees off the nose,
    else drive forward. A dead-astern sub-goal (wrap gives +pi) turns left."""
    bearing = wrap_to_pi(np.arctan2(subgoal_xy[1] - pose.y, subgoal_xy[0] - pose.x) - pose.theta)
    threshold = np.deg2rad(TURN_THRESHOLD_DEG)
    if bearing > threshold:
        return Action.TURN_LEFT
    if bearing < -threshold:
        return Action.TURN_RIGHT
    return Action.FORWARD
