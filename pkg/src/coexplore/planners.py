"""The seven global planners behind one interface.

Each planner maps a PlannerContext (merged map, poses, trajectories, rng)
to one goal cell per active agent, computed sequentially in agent-id order
from the same map snapshot. Goals are (row, col) cells in the merged-map
frame and are never obstacle cells.

Selection by name: random | nearest | utility | rrt | apf | wma-rrt | voronoi.
The Planner wrapper adds the per-agent fallback chain primary -> nearest ->
random (-> own cell) so an episode never stalls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frontiers import (NoFrontier, cluster_frontiers, detect_frontiers,
                        gains_at, virtual_explore)
from .grids import disk_offsets
from .mapping import OccGrid
from .nav import dilate_obstacles
from .simulator import Pose

PLANNER_NAMES = ("random", "nearest", "utility", "rrt", "apf", "wma-rrt", "voronoi")


class NoCandidates(Exception):
    """The map offers no candidate goal cell."""


class UnknownPlanner(Exception):
    pass


@dataclass
class PlannerParams:
    rrt_steer_m: float = 0.75
    rrt_max_iters: int = 2000
    rrt_target_count: int = 30
    apf_radius_m: float = 2.0           # teammate resistance radius D
    apf_kd: float = 1.0
    apf_repeat_penalty: float = 0.1     # added to a cell's potential per visit
    apf_max_iters: int = 5000
    wma_lock_steps: int = 15
    wma_gather_radius_m: float = 1.0
    wma_arrive_m: float = 0.5
    wma_samples_per_tick: int = 200


@dataclass
class PlannerContext:
    merged: OccGrid                     # post-merge map, one frame for the tick
    poses: dict[int, Pose]              # estimated pose per active agent
    trajectories: dict[int, list]       # estimated pose history per agent
    previous_goals: dict[int, tuple | None]
    rng: np.random.Generator
    timestep: int = 0


# ---------------------------------------------------------------- helpers

def _bfs_distance(traversable: np.ndarray, sources) -> np.ndarray:
    """4-connected BFS hop counts from source cells; -1 where unreached."""
    dist = np.full(traversable.shape, -1, dtype=np.int32)
    cur = np.zeros_like(traversable, dtype=bool)
    for r, c in np.asarray(sources, dtype=np.int64).reshape(-1, 2):
        if 0 <= r < cur.shape[0] and 0 <= c < cur.shape[1]:
            cur[r, c] = True
    cur &= traversable
    d = 0
    while cur.any():
        dist[cur] = d
        nxt = np.zeros_like(cur)
        nxt[1:, :] |= cur[:-1, :]
        nxt[:-1, :] |= cur[1:, :]
        nxt[:, 1:] |= cur[:, :-1]
        nxt[:, :-1] |= cur[:, 1:]
        nxt &= traversable & (dist < 0)
        cur = nxt
        d += 1
    return dist


def _frontier_mask(shape, frontiers) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    if len(frontiers):
        m[frontiers[:, 0], frontiers[:, 1]] = True
    return m


def nearest_traversable(trav: np.ndarray, cell) -> tuple[int, int]:
    """Closest traversable cell to `cell` (Euclidean, ties row-major)."""
    r, c = int(cell[0]), int(cell[1])
    h, w = trav.shape
    r = min(max(r, 0), h - 1)
    c = min(max(c, 0), w - 1)
    if trav[r, c]:
        return r, c
    cand = np.argwhere(trav)
    if len(cand) == 0:
        return r, c
    d2 = (cand[:, 0] - r) ** 2 + (cand[:, 1] - c) ** 2
    br, bc = cand[int(np.argmin(d2))]
    return int(br), int(bc)


def _segment_free(trav: np.ndarray, a_xy, b_xy, resolution: float) -> bool:
    """True when every half-cell sample along the world segment is traversable."""
    ax, ay = a_xy
    bx, by = b_xy
    n = max(2, int(np.hypot(bx - ax, by - ay) / (resolution / 2.0)) + 2)
    xs = np.linspace(ax, bx, n)
    ys = np.linspace(ay, by, n)
    rr = np.floor(ys / resolution).astype(np.int64)
    cc = np.floor(xs / resolution).astype(np.int64)
    h, w = trav.shape
    if (rr < 0).any() or (rr >= h).any() or (cc < 0).any() or (cc >= w).any():
        return False
    return bool(trav[rr, cc].all())


class _TickShared:
    """Per-tick cache of quantities every agent kernel reuses."""

    def __init__(self, ctx: PlannerContext):
        self.trav = dilate_obstacles(ctx.merged)
        self._vmaps: dict[int, OccGrid] = {}
        self._frontiers: dict[int, np.ndarray] = {}
        self.ctx = ctx

    def vmap(self, k: int) -> OccGrid:
        if k not in self._vmaps:
            p = self.ctx.poses[k]
            self._vmaps[k] = virtual_explore(self.ctx.merged, (p.x, p.y))
        return self._vmaps[k]

    def frontiers(self, k: int) -> np.ndarray:
        if k not in self._frontiers:
            self._frontiers[k] = detect_frontiers(self.vmap(k))
        return self._frontiers[k]


def _local_origin(grid: OccGrid, pose: Pose) -> tuple[int, int]:
    r, c = grid.world_to_index(pose.x, pose.y)
    h, w = grid.shape
    return min(max(r, 0), h - 1), min(max(c, 0), w - 1)


# ----------------------------------------------------------- the planners

def _random_one(ctx, k, sh: _TickShared):
    cand = np.argwhere((ctx.merged.explored >= 0.5) & sh.trav)
    if len(cand) == 0:
        raise NoCandidates("no explored traversable cell")
    r, c = cand[int(ctx.rng.integers(len(cand)))]
    return int(r), int(c)


def _nearest_one(ctx, k, sh: _TickShared):
    fr = sh.frontiers(k)
    if len(fr) == 0:
        raise NoFrontier("no frontier on virtual-explored map")
    # frontier cells themselves stay enterable even when dilation covers them
    walkable = sh.trav | _frontier_mask(ctx.merged.shape, fr)
    start = _local_origin(ctx.merged, ctx.poses[k])
    walkable[start] = True
    dist = _bfs_distance(walkable, [start])
    d = dist[fr[:, 0], fr[:, 1]]
    if (d < 0).all():
        raise NoFrontier("no frontier reachable by BFS")
    d = np.where(d < 0, np.iinfo(np.int32).max, d)
    r, c = fr[int(np.argmin(d))]            # first minimum = row-major tie rule
    return int(r), int(c)


def _utility_one(ctx, k, sh: _TickShared):
    fr = sh.frontiers(k)
    if len(fr) == 0:
        raise NoFrontier("no frontier on virtual-explored map")
    gains = gains_at(sh.vmap(k), fr)
    r, c = fr[int(np.argmax(gains))]
    return int(r), int(c)


def _minmax(values, degenerate: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    span = v.max() - v.min()
    if span <= 0.0:
        return np.full(v.shape, degenerate)
    return (v - v.min()) / span


def _beside_known_free(grid, r: int, c: int) -> bool:
    h, w = grid.shape
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nr, nc = r + dr, c + dc
        if (0 <= nr < h and 0 <= nc < w
                and grid.explored[nr, nc] >= 0.5 and grid.obstacle[nr, nc] < 0.5):
            return True
    return False


def _rrt_one(ctx, k, sh: _TickShared, params: PlannerParams):
    merged = ctx.merged
    res = merged.resolution
    pose = ctx.poses[k]
    vmap = sh.vmap(k)
    explored = merged.explored >= 0.5
    h, w = merged.shape
    r0, c0 = merged.origin_cell
    x_lo, x_hi = c0 * res, (c0 + w) * res
    y_lo, y_hi = r0 * res, (r0 + h) * res

    nodes = np.array([[pose.x, pose.y]])
    targets: list[tuple[int, int]] = []
    for _ in range(params.rrt_max_iters):
        if len(targets) >= params.rrt_target_count:
            break
        px = ctx.rng.uniform(x_lo, x_hi)
        py = ctx.rng.uniform(y_lo, y_hi)
        d = np.hypot(nodes[:, 0] - px, nodes[:, 1] - py)
        si = int(np.argmin(d))
        sx, sy = nodes[si]
        step = d[si]
        if step < 1e-9:
            continue
        scale = min(1.0, params.rrt_steer_m / step)
        tx, ty = sx + (px - sx) * scale, sy + (py - sy) * scale
        if not _segment_free(sh.trav, (sx, sy), (tx, ty), res):
            continue
        tr, tc = merged.world_to_index(tx, ty)
        if not (0 <= tr < h and 0 <= tc < w):
            continue
        if not explored[tr, tc]:
            # Take the first boundary crossing along the steer segment, not
            # the endpoint: the deep interior of the unknown region may sit
            # inside a wall. Only crossings beside known free space count;
            # they are the cells an agent can actually walk up to.
            n = max(int(np.hypot(tx - sx, ty - sy) / (res * 0.5)), 1)
            for t in np.linspace(0.0, 1.0, n + 1):
                qr, qc = merged.world_to_index(sx + (tx - sx) * t,
                                               sy + (ty - sy) * t)
                if 0 <= qr < h and 0 <= qc < w and not explored[qr, qc]:
                    if _beside_known_free(merged, qr, qc):
                        targets.append((qr, qc))
                    break
        elif sh.trav[tr, tc]:
            nodes = np.vstack([nodes, [tx, ty]])
    if not targets:
        raise NoCandidates("rrt found no unexplored target")

    centers = [cl.center for cl in cluster_frontiers(np.array(targets, dtype=np.int64))]
    gains = gains_at(vmap, centers)
    ar, ac = _local_origin(merged, pose)
    dist_m = np.array([np.hypot(cr - ar, cc - ac) * res for cr, cc in centers])
    utility = _minmax(gains, 1.0) - _minmax(dist_m, 0.0)
    return centers[int(np.argmax(utility))]


def _apf_one(ctx, k, sh: _TickShared, params: PlannerParams):
    merged = ctx.merged
    res = merged.resolution
    fr = sh.frontiers(k)
    if len(fr) == 0:
        raise NoFrontier("no frontier on virtual-explored map")
    clusters = cluster_frontiers(fr)
    walkable = sh.trav | _frontier_mask(merged.shape, fr)
    # descend from inside the walk domain; the agent may sit in the dilated
    # margin (or on a cell the refined map calls a wall), where every
    # neighbor is +inf and the descent would return a non-goal cell
    start = nearest_traversable(walkable, _local_origin(merged, ctx.poses[k]))

    potential = np.zeros(merged.shape)
    potential[~walkable] = np.inf

    # teammate resistance: k_D * (D - distance) inside radius D
    offs = disk_offsets(int(round(params.apf_radius_m / res)))
    off_dist_m = np.hypot(offs[:, 0], offs[:, 1]) * res
    h, w = merged.shape
    for j, pj in ctx.poses.items():
        if j == k:
            continue
        jr, jc = merged.world_to_index(pj.x, pj.y)
        rr, cc = offs[:, 0] + jr, offs[:, 1] + jc
        keep = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        np.add.at(potential, (rr[keep], cc[keep]),
                  params.apf_kd * (params.apf_radius_m - off_dist_m[keep]))

    # cluster attraction: -weight / BFS hop count (>= 1)
    for cl in clusters:
        dis = _bfs_distance(walkable, cl.members)
        reached = dis >= 0
        potential[reached] -= cl.weight / np.maximum(dis[reached], 1)

    u = start
    potential[u] += params.apf_repeat_penalty
    for _ in range(params.apf_max_iters):
        best = None
        best_v = potential[u]
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = u[0] + dr, u[1] + dc
                if 0 <= nr < h and 0 <= nc < w and potential[nr, nc] < best_v:
                    best_v = potential[nr, nc]
                    best = (nr, nc)
        if best is None:
            break
        u = best
        potential[u] += params.apf_repeat_penalty
    return int(u[0]), int(u[1])


def _voronoi_one(ctx, k, sh: _TickShared, agent_cells: dict[int, tuple[int, int]]):
    fr = sh.frontiers(k)
    if len(fr) == 0:
        raise NoFrontier("no frontier on virtual-explored map")
    ids = sorted(agent_cells)
    cells = np.array([agent_cells[i] for i in ids])
    d2 = ((fr[:, None, :] - cells[None, :, :]) ** 2).sum(axis=2)
    owner = np.argmin(d2, axis=1)           # ties resolve to the lower agent id
    mine = fr[owner == ids.index(k)]
    pool = mine if len(mine) else fr        # empty partition: global fallback
    gains = gains_at(sh.vmap(k), pool)
    r, c = pool[int(np.argmax(gains))]
    return int(r), int(c)


# ------------------------------------------------------------- batch forms

def plan_random(ctx: PlannerContext) -> dict[int, tuple[int, int]]:
    sh = _TickShared(ctx)
    return {k: _random_one(ctx, k, sh) for k in sorted(ctx.poses)}


def plan_nearest(ctx: PlannerContext) -> dict[int, tuple[int, int]]:
    sh = _TickShared(ctx)
    return {k: _nearest_one(ctx, k, sh) for k in sorted(ctx.poses)}


def plan_utility(ctx: PlannerContext) -> dict[int, tuple[int, int]]:
    sh = _TickShared(ctx)
    return {k: _utility_one(ctx, k, sh) for k in sorted(ctx.poses)}


def plan_rrt(ctx: PlannerContext, params: PlannerParams | None = None):
    params = params or PlannerParams()
    sh = _TickShared(ctx)
    goals = {}
    for k in sorted(ctx.poses):
        try:
            goals[k] = _rrt_one(ctx, k, sh, params)
        except NoCandidates:
            goals[k] = _nearest_one(ctx, k, sh)
    return goals


def plan_apf(ctx: PlannerContext, params: PlannerParams | None = None):
    params = params or PlannerParams()
    sh = _TickShared(ctx)
    return {k: _apf_one(ctx, k, sh, params) for k in sorted(ctx.poses)}


def plan_voronoi(ctx: PlannerContext) -> dict[int, tuple[int, int]]:
    sh = _TickShared(ctx)
    agent_cells = {k: _local_origin(ctx.merged, p) for k, p in ctx.poses.items()}
    return {k: _voronoi_one(ctx, k, sh, agent_cells) for k in sorted(ctx.poses)}


# ----------------------------------------------------------------- WMA-RRT

@dataclass
class WmaState:
    phase: str = "gather"
    nodes: list = field(default_factory=list)        # world (x, y) per node
    parent: list = field(default_factory=list)       # -1 at the root
    children: list = field(default_factory=list)
    locked_until: dict = field(default_factory=dict)  # child node id -> timestep
    completed: list = field(default_factory=list)
    agent_node: dict = field(default_factory=dict)   # last node the agent reached
    pending: dict = field(default_factory=dict)      # node the agent is heading to


def _wma_add_node(state: WmaState, xy, parent: int) -> int:
    state.nodes.append((float(xy[0]), float(xy[1])))
    state.parent.append(parent)
    state.children.append([])
    state.completed.append(False)
    nid = len(state.nodes) - 1
    if parent >= 0:
        state.children[parent].append(nid)
    return nid


def _clockwise_from_north(state: WmaState, parent: int, kids):
    px, py = state.nodes[parent]

    def bearing(c):
        x, y = state.nodes[c]
        # clockwise angle from +y (north): east = pi/2, south = pi, west = 3pi/2
        return np.arctan2(x - px, y - py) % (2.0 * np.pi)

    return sorted(kids, key=bearing)


def _wma_find_next(state: WmaState, node: int, now: int, lock_steps: int) -> int:
    while True:
        kids = state.children[node]
        open_kids = [c for c in kids
                     if not state.completed[c] and state.locked_until.get(c, -1) <= now]
        if open_kids:
            chosen = _clockwise_from_north(state, node, open_kids)[0]
            state.locked_until[chosen] = now + lock_steps
            return chosen
        if not kids:
            return node                       # leaf: stay until the tree grows
        if all(state.completed[c] for c in kids):
            state.completed[node] = True      # subtree exhausted, hand back up
            parent = state.parent[node]
            if parent < 0:
                return node
            node = parent
            continue
        return node                           # everything open is locked: wait


def plan_wma_rrt(ctx: PlannerContext, state: WmaState | None,
                 params: PlannerParams | None = None):
    """Shared-tree planner; returns (goals, state) with state carried per episode."""
    params = params or PlannerParams()
    if state is None:
        state = WmaState()
    sh = _TickShared(ctx)
    merged = ctx.merged
    res = merged.resolution
    ids = sorted(ctx.poses)

    if state.phase == "gather":
        xs = np.array([ctx.poses[k].x for k in ids])
        ys = np.array([ctx.poses[k].y for k in ids])
        mx, my = float(xs.mean()), float(ys.mean())
        if np.hypot(xs - mx, ys - my).max() > params.wma_gather_radius_m:
            cell = nearest_traversable(sh.trav, merged.world_to_index(mx, my))
            return {k: cell for k in ids}, state
        root = _wma_add_node(state, (mx, my), -1)
        for k in ids:
            nid = _wma_add_node(state, (ctx.poses[k].x, ctx.poses[k].y), root)
            state.agent_node[k] = nid
            state.pending[k] = nid
        state.phase = "tree"

    # extend the shared tree by plain RRT on the merged map
    h, w = merged.shape
    r0, c0 = merged.origin_cell
    nodes = np.array(state.nodes)
    for _ in range(params.wma_samples_per_tick):
        px = ctx.rng.uniform(c0 * res, (c0 + w) * res)
        py = ctx.rng.uniform(r0 * res, (r0 + h) * res)
        d = np.hypot(nodes[:, 0] - px, nodes[:, 1] - py)
        si = int(np.argmin(d))
        sx, sy = nodes[si]
        if d[si] < 1e-9:
            continue
        scale = min(1.0, params.rrt_steer_m / d[si])
        tx, ty = sx + (px - sx) * scale, sy + (py - sy) * scale
        tr, tc = merged.world_to_index(tx, ty)
        if not (0 <= tr < h and 0 <= tc < w and sh.trav[tr, tc]):
            continue
        if not _segment_free(sh.trav, (sx, sy), (tx, ty), res):
            continue
        _wma_add_node(state, (tx, ty), si)
        nodes = np.vstack([nodes, [tx, ty]])

    goals = {}
    for k in ids:          # agent order matters: earlier agents lock edges first
        pose = ctx.poses[k]
        tgt = state.pending[k]
        tx, ty = state.nodes[tgt]
        if np.hypot(pose.x - tx, pose.y - ty) <= params.wma_arrive_m:
            state.agent_node[k] = tgt
        nxt = _wma_find_next(state, state.agent_node[k], ctx.timestep,
                             params.wma_lock_steps)
        state.pending[k] = nxt
        cell = merged.world_to_index(*state.nodes[nxt])
        goals[k] = nearest_traversable(sh.trav, cell)
    return goals, state


# ---------------------------------------------------------------- registry

class Planner:
    """Name-dispatched planner with per-agent fallback and persistent state."""

    def __init__(self, name: str, params: PlannerParams | None = None):
        if name not in PLANNER_NAMES:
            raise UnknownPlanner(f"{name!r} not one of {PLANNER_NAMES}")
        self.name = name
        self.params = params or PlannerParams()
        self.wma_state: WmaState | None = None

    def plan(self, ctx: PlannerContext) -> dict[int, tuple[int, int]]:
        if self.name == "wma-rrt":
            goals, self.wma_state = plan_wma_rrt(ctx, self.wma_state, self.params)
            return goals
        sh = _TickShared(ctx)
        agent_cells = None
        if self.name == "voronoi":
            agent_cells = {k: _local_origin(ctx.merged, p) for k, p in ctx.poses.items()}
        goals = {}
        for k in sorted(ctx.poses):
            goals[k] = self._plan_one(ctx, k, sh, agent_cells)
        return goals

    def _plan_one(self, ctx, k, sh, agent_cells):
        stages = {
            "random": lambda: _random_one(ctx, k, sh),
            "nearest": lambda: _nearest_one(ctx, k, sh),
            "utility": lambda: _utility_one(ctx, k, sh),
            "rrt": lambda: _rrt_one(ctx, k, sh, self.params),
            "apf": lambda: _apf_one(ctx, k, sh, self.params),
            "voronoi": lambda: _voronoi_one(ctx, k, sh, agent_cells),
        }
        for attempt in (stages[self.name],
                        lambda: _nearest_one(ctx, k, sh),
                        lambda: _random_one(ctx, k, sh)):
            try:
                return attempt()
            except (NoFrontier, NoCandidates):
                continue
        return _local_origin(ctx.merged, ctx.poses[k])   # last resort: stay put
