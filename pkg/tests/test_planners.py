"""Behavioral tests for the seven goal planners.

Geometric scenarios use resolution 1.0 so cell coordinates read as meters
and the virtual-explore / gain disks shrink to radius 2 cells.
"""

import numpy as np
import pytest
from scipy import stats

from coexplore.frontiers import NoFrontier, detect_frontiers, gains_at, virtual_explore
from coexplore.planners import (PLANNER_NAMES, Planner, PlannerParams, UnknownPlanner,
                                WmaState, _wma_add_node, _wma_find_next, plan_apf,
                                plan_nearest, plan_random, plan_rrt, plan_utility,
                                plan_voronoi, plan_wma_rrt)

from oracles import bfs_hops, nearest_agent_labels
from util import grid_of, make_ctx, random_grid


def open_map(shape, resolution=1.0, holes=()):
    """Fully explored free grid with the given cells left unexplored."""
    explored = np.ones(shape)
    for r, c in holes:
        explored[r, c] = 0.0
    return grid_of(explored, resolution=resolution)


# ------------------------------------------------------------------ random

def test_random_single_candidate_is_forced():
    explored = np.zeros((10, 10))
    explored[4, 7] = 1.0
    ctx = make_ctx(grid_of(explored), [(0.12, 0.12)], seed=1)
    assert plan_random(ctx) == {0: (4, 7)}


def test_random_same_seed_same_goals():
    g = random_grid(np.random.default_rng(11))
    a = plan_random(make_ctx(g, [(0.5, 0.5), (1.5, 1.5)], seed=9))
    b = plan_random(make_ctx(g, [(0.5, 0.5), (1.5, 1.5)], seed=9))
    assert a == b


def test_random_uniform_over_candidates():
    g = open_map((12, 12), resolution=0.05)
    ctx = make_ctx(g, [(0.3, 0.3)], seed=3)
    counts = np.zeros(144, dtype=np.int64)
    for _ in range(10_000):
        r, c = plan_random(ctx)[0]
        counts[r * 12 + c] += 1
    assert counts.sum() == 10_000
    assert stats.chisquare(counts).pvalue > 1e-3


# ----------------------------------------------------------------- nearest

def test_nearest_prefers_shallower_frontier():
    g = open_map((20, 20), holes=[(2, 6), (2, 11)])
    ctx = make_ctx(g, [(2.5, 2.5)])
    # (2, 5) sits 3 hops away; every frontier of the second hole is >= 8
    assert plan_nearest(ctx) == {0: (2, 5)}


def test_nearest_uses_travel_distance_not_straight_line():
    g = open_map((40, 40), holes=[(4, 16), (18, 4)])
    g.obstacle[0:20, 10] = 1.0              # wall forces a detour to the east hole
    ctx = make_ctx(g, [(4.5, 4.5)])
    goal = plan_nearest(ctx)[0]
    assert goal == (17, 4)
    # construction sanity: east frontier is nearer in a straight line but
    # more than twice the travel distance around the wall
    trav = np.ones((40, 40), dtype=bool)
    trav[0:20, 7:14] = False                # wall plus 3-cell dilation
    hops = bfs_hops(trav, (4, 4))
    assert np.hypot(4 - 4, 15 - 4) < np.hypot(17 - 4, 4 - 4)
    assert hops[4, 15] > 2 * hops[17, 4]


def test_nearest_tie_breaks_row_major():
    g = open_map((15, 15), holes=[(3, 7), (7, 3)])
    goal = plan_nearest(make_ctx(g, [(7.5, 7.5)]))[0]
    assert goal == (4, 7)                   # 3 hops, ties with (7, 4)


def test_nearest_fully_explored_raises():
    ctx = make_ctx(open_map((15, 15)), [(7.5, 7.5)])
    with pytest.raises(NoFrontier):
        plan_nearest(ctx)


def test_nearest_unreachable_frontier_raises():
    g = open_map((30, 30), holes=[(15, 15)])
    g.obstacle[10, 10:21] = 1.0             # sealed square room around the hole
    g.obstacle[20, 10:21] = 1.0
    g.obstacle[10:21, 10] = 1.0
    g.obstacle[10:21, 20] = 1.0
    ctx = make_ctx(g, [(3.5, 3.5)])
    with pytest.raises(NoFrontier):
        plan_nearest(ctx)


# ----------------------------------------------------------------- utility

def test_utility_prefers_wide_opening():
    holes = [(r, c) for r in range(10, 21) for c in range(20, 30)]
    holes.append((25, 3))
    g = open_map((30, 30), holes=holes)
    ctx = make_ctx(g, [(5.5, 5.5)])
    goal = plan_utility(ctx)[0]
    ring = {(r, 19) for r in range(10, 21)}
    ring |= {(9, c) for c in range(20, 30)} | {(21, c) for c in range(20, 30)}
    assert goal in ring
    vmap = virtual_explore(g, (5.5, 5.5))
    fr = detect_frontiers(vmap)
    assert gains_at(vmap, [goal])[0] == gains_at(vmap, fr).max()
    assert gains_at(vmap, [(25, 2)])[0] < gains_at(vmap, [goal])[0]


def test_utility_tie_breaks_row_major():
    g = open_map((15, 15), holes=[(7, 7)])
    assert plan_utility(make_ctx(g, [(2.5, 2.5)]))[0] == (6, 7)


def test_utility_fully_explored_raises():
    with pytest.raises(NoFrontier):
        plan_utility(make_ctx(open_map((10, 10)), [(5.5, 5.5)]))


# --------------------------------------------------------------------- rrt

def corridor_map():
    explored = np.zeros((40, 40))
    explored[15:26, :] = 1.0
    return grid_of(explored, resolution=1.0)


def test_rrt_prefers_nearer_opening():
    near_north = plan_rrt(make_ctx(corridor_map(), [(8.5, 17.5)], seed=4))[0]
    near_south = plan_rrt(make_ctx(corridor_map(), [(8.5, 23.5)], seed=4))[0]
    assert near_north[0] <= 14
    assert near_south[0] >= 26


def test_rrt_exhausted_falls_back_to_nearest():
    g = open_map((20, 20), holes=[(2, 6), (2, 11)])
    params = PlannerParams(rrt_max_iters=0)
    assert plan_rrt(make_ctx(g, [(2.5, 2.5)]), params)[0] == (2, 5)


def test_rrt_same_seed_same_goal():
    a = plan_rrt(make_ctx(corridor_map(), [(8.5, 17.5)], seed=21))
    b = plan_rrt(make_ctx(corridor_map(), [(8.5, 17.5)], seed=21))
    assert a == b


# --------------------------------------------------------------------- apf

def apf_map():
    # 6 m x 8 m, two 11x11-cell unexplored rooms east and west of the agent;
    # their basins are too deep for the repeat penalty to fill in 5000 steps
    explored = np.ones((120, 160))
    explored[55:66, 2:13] = 0.0
    explored[55:66, 148:159] = 0.0
    return grid_of(explored, resolution=0.05)


def room_gap(goal, r0, r1, c0, c1):
    """Chebyshev distance from a cell to an unexplored room rectangle."""
    dr = max(r0 - goal[0], goal[0] - r1, 0)
    dc = max(c0 - goal[1], goal[1] - c1, 0)
    return max(dr, dc)


def test_apf_descends_to_nearest_cluster():
    goal = plan_apf(make_ctx(apf_map(), [(4.3, 3.0)]))[0]
    assert goal[1] > 100
    assert room_gap(goal, 55, 65, 148, 158) <= 2


def test_apf_teammate_resistance_diverts():
    # a teammate parked on the eastward path makes the agent head west
    goals = plan_apf(make_ctx(apf_map(), [(4.3, 3.0), (4.9, 3.0)]))
    assert goals[0][1] < 30
    assert room_gap(goals[0], 55, 65, 2, 12) <= 2


def test_apf_fully_explored_raises():
    with pytest.raises(NoFrontier):
        plan_apf(make_ctx(open_map((20, 20)), [(10.5, 10.5)]))


# ----------------------------------------------------------------- wma-rrt

def test_wma_gather_targets_team_mean():
    g = open_map((120, 120), resolution=0.05)
    ctx = make_ctx(g, [(1.0, 1.0), (5.0, 5.0)])
    goals, state = plan_wma_rrt(ctx, None)
    assert goals == {0: (60, 60), 1: (60, 60)}
    assert state.phase == "gather"
    assert state.nodes == []


def test_wma_tree_phase_locks_distinct_edges():
    g = open_map((120, 120), resolution=0.05)
    ctx = make_ctx(g, [(3.0, 3.0), (3.4, 3.0)], seed=2, timestep=30)
    goals, state = plan_wma_rrt(ctx, None)
    assert state.phase == "tree"
    assert state.pending[0] != state.pending[1]
    for k in (0, 1):
        assert state.locked_until[state.pending[k]] == 30 + 15
    assert set(goals) == {0, 1}


def test_wma_reopens_after_lock_expires():
    st = WmaState(phase="tree")
    root = _wma_add_node(st, (5.0, 5.0), -1)
    west = _wma_add_node(st, (2.0, 5.0), root)
    south = _wma_add_node(st, (5.0, 2.0), root)
    north = _wma_add_node(st, (5.0, 8.0), root)
    east = _wma_add_node(st, (8.0, 5.0), root)

    assert _wma_find_next(st, root, 100, 15) == north     # clockwise from +y
    assert st.locked_until[north] == 115
    assert _wma_find_next(st, root, 100, 15) == east
    assert _wma_find_next(st, root, 100, 15) == south
    assert _wma_find_next(st, root, 100, 15) == west
    assert _wma_find_next(st, root, 100, 15) == root      # all locked: wait
    assert not st.completed[root]
    assert _wma_find_next(st, root, 115, 15) == north     # lock expired


def test_wma_leaf_waits_in_place():
    st = WmaState(phase="tree")
    root = _wma_add_node(st, (0.0, 0.0), -1)
    leaf = _wma_add_node(st, (1.0, 0.0), root)
    assert _wma_find_next(st, leaf, 0, 15) == leaf
    assert not st.completed[leaf]


def test_wma_exhausted_subtree_ascends():
    st = WmaState(phase="tree")
    root = _wma_add_node(st, (0.0, 0.0), -1)
    mid = _wma_add_node(st, (1.0, 0.0), root)
    for xy in ((2.0, 0.0), (1.0, 1.0)):
        st.completed[_wma_add_node(st, xy, mid)] = True
    other = _wma_add_node(st, (0.0, 3.0), root)

    assert _wma_find_next(st, mid, 0, 15) == other
    assert st.completed[mid]
    assert not st.completed[root]


def test_wma_state_persists_across_ticks():
    g = open_map((120, 120), resolution=0.05)
    planner = Planner("wma-rrt")
    planner.plan(make_ctx(g, [(3.0, 3.0), (3.4, 3.0)], seed=5))
    grown = len(planner.wma_state.nodes)
    assert planner.wma_state.phase == "tree"
    planner.plan(make_ctx(g, [(3.0, 3.0), (3.4, 3.0)], seed=6, timestep=15))
    assert len(planner.wma_state.nodes) > grown


# ----------------------------------------------------------------- voronoi

def test_voronoi_owner_takes_its_frontier():
    g = open_map((14, 14), holes=[(0, 5)])
    goals = plan_voronoi(make_ctx(g, [(0.5, 0.5), (10.5, 10.5)]))
    assert goals[0] == (0, 4)
    assert goals[1] == (0, 4)               # empty partition: global fallback


def test_voronoi_goals_stay_in_own_partition():
    checked = 0
    for seed in range(10):
        g = random_grid(np.random.default_rng(seed), p_explored=0.6, resolution=0.2)
        ctx = make_ctx(g, [(2.1, 2.1), (8.1, 8.1)])
        labels = nearest_agent_labels(g.shape, [(10, 10), (40, 40)])
        goals = plan_voronoi(ctx)
        for k in (0, 1):
            fr = detect_frontiers(virtual_explore(g, (ctx.poses[k].x, ctx.poses[k].y)))
            assert any(np.array_equal(goals[k], f) for f in fr)
            if any(labels[r, c] == k for r, c in fr):
                assert labels[goals[k]] == k
                checked += 1
    assert checked >= 10


def test_voronoi_single_agent_matches_utility():
    for seed in range(10):
        g = random_grid(np.random.default_rng(100 + seed), p_explored=0.6,
                        resolution=0.2)
        ctx = make_ctx(g, [(2.1, 2.1)])
        assert plan_voronoi(ctx)[0] == plan_utility(ctx)[0]


# ---------------------------------------------------------------- registry

def test_unknown_planner_rejected():
    with pytest.raises(UnknownPlanner):
        Planner("spiral")


def test_registry_lists_seven_planners():
    assert len(PLANNER_NAMES) == 7
    assert set(PLANNER_NAMES) == {"random", "nearest", "utility", "rrt",
                                  "apf", "wma-rrt", "voronoi"}


def test_dispatch_matches_batch_form():
    g = open_map((20, 20), holes=[(2, 6), (2, 11)])
    assert Planner("nearest").plan(make_ctx(g, [(2.5, 2.5)])) \
        == plan_nearest(make_ctx(g, [(2.5, 2.5)]))


def test_fallback_reaches_random_stage():
    ctx = make_ctx(open_map((12, 12)), [(6.5, 6.5)], seed=8)
    goal = Planner("utility").plan(ctx)[0]  # no frontier anywhere
    assert ctx.merged.explored[goal] >= 0.5


def test_fallback_stays_put_when_fully_blocked():
    g = grid_of(np.ones((60, 60)), np.ones((60, 60)), resolution=0.05)
    goal = Planner("rrt").plan(make_ctx(g, [(2.0, 2.0)], seed=8))[0]
    assert goal == (40, 40)                 # nothing plannable: own cell


def test_every_planner_returns_valid_goals():
    g = random_grid(np.random.default_rng(5), p_explored=0.55, resolution=0.2)
    for name in PLANNER_NAMES:
        goals = Planner(name).plan(make_ctx(g, [(2.1, 2.1), (8.1, 8.1)], seed=7))
        assert set(goals) == {0, 1}
        for r, c in goals.values():
            assert isinstance(r, int) and isinstance(c, int)
            assert 0 <= r < 50 and 0 <= c < 50
