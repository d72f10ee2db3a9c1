import math

import numpy as np
import pytest

from microplan.agp import (
    CLEARANCE_EPS,
    PlannedPath,
    insert_waypoints,
    plan_2d,
    plan_circles,
    prune_obstacles,
    tangent_slopes,
)
from microplan.errors import EndpointInZone, PlanFailed, TangentInfeasible
from microplan.geometry import seg_circles_min_clearance
from microplan.scene import generate_arena


def polyline_clearance(waypoints, circles):
    pts = np.asarray(waypoints)
    return min(
        seg_circles_min_clearance(a, b, circles)
        for a, b in zip(pts[:-1], pts[1:])
    )


def corridor_exists(S, E, circles, bounds=(2000.0, 2000.0), cell=10.0):
    """Grid BFS oracle: is there any zone-free path from S to E?"""
    w = int(bounds[0] // cell)
    h = int(bounds[1] // cell)
    xs = (np.arange(w) + 0.5) * cell
    ys = (np.arange(h) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    free = np.ones((h, w), dtype=bool)
    for cx, cy, r in circles:
        free &= (gx - cx) ** 2 + (gy - cy) ** 2 > r * r
    start = (int(S[1] // cell), int(S[0] // cell))
    goal = (int(E[1] // cell), int(E[0] // cell))
    if not (free[start] and free[goal]):
        return False
    from collections import deque

    seen = np.zeros_like(free)
    seen[start] = True
    q = deque([start])
    while q:
        y, x = q.popleft()
        if (y, x) == goal:
            return True
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and free[yy, xx] and not seen[yy, xx]:
                    seen[yy, xx] = True
                    q.append((yy, xx))
    return False


# --- pruning -----------------------------------------------------------------


def _scene_with(circles):
    """Tiny helper: wrap raw (cx, cy, zone_r) rows into a Scene."""
    from microplan.scene import Obstacle, Scene

    obstacles = tuple(
        Obstacle(
            id=i, cx=cx, cy=cy, physical_radius=r, safety_radius=r
        )
        for i, (cx, cy, r) in enumerate(circles)
    )
    return Scene(width=2000.0, height=2000.0, obstacles=obstacles)


def test_prune_keeps_midpoint_obstacle():
    scene = _scene_with([(50.0, 0.0, 10.0)])
    res = prune_obstacles(scene, (0, 0), (100, 0), alpha=6)
    assert res.retained == (0,)
    assert res.t[0] == pytest.approx(0.5)
    np.testing.assert_allclose(res.feet[0], [50.0, 0.0])


def test_prune_discards_behind_start():
    scene = _scene_with([(-20.0, 0.0, 10.0)])  # t = -0.2
    assert prune_obstacles(scene, (0, 0), (100, 0), alpha=6).retained == ()


def test_prune_strip_width_scales_with_radius():
    # same offset: small obstacle discarded, large obstacle retained
    scene = _scene_with([(50.0, 35.0, 10.0), (50.0, 35.0 + 0.0, 12.0)])
    res = prune_obstacles(scene, (0, 0), (100, 0), alpha=3)
    assert res.retained == (1,)


def test_prune_sorted_by_foot_x():
    scene = _scene_with([(80.0, 5.0, 10.0), (20.0, -5.0, 10.0)])
    res = prune_obstacles(scene, (0, 0), (100, 0), alpha=6)
    assert res.retained == (1, 0)
    assert list(res.t) == sorted(res.t)


def test_prune_rejects_coincident_endpoints():
    with pytest.raises(ValueError):
        prune_obstacles(_scene_with([]), (5, 5), (5, 5), alpha=6)


# --- tangents ----------------------------------------------------------------


def test_tangent_slopes_thirty_degrees():
    m1, m2 = tangent_slopes((0, 0), (10, 0), 5)
    assert m1 == pytest.approx(math.tan(math.radians(30)))
    assert m2 == pytest.approx(-math.tan(math.radians(30)))


def test_tangent_slopes_vertical_symmetry():
    m1, m2 = tangent_slopes((0, 0), (0, 10), 5)
    expect = sorted([math.tan(math.radians(120)), math.tan(math.radians(60))])
    assert sorted([m1, m2]) == pytest.approx(expect)


def test_tangent_lines_touch_circle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = rng.uniform(-100, 100, 2)
        c = rng.uniform(-100, 100, 2)
        r = rng.uniform(0.5, 30)
        if np.hypot(*(c - v)) <= r + 1e-6:
            continue
        for m in tangent_slopes(v, c, r):
            if math.isinf(m):
                dist = abs(c[0] - v[0])
            else:
                # line through v with slope m: mx - y + (v1 - m v0) = 0
                dist = abs(m * c[0] - c[1] + v[1] - m * v[0]) / math.hypot(m, 1)
            assert dist == pytest.approx(r, abs=1e-8)


def test_tangent_infeasible_inside():
    with pytest.raises(TangentInfeasible):
        tangent_slopes((0, 0), (1, 0), 5)


# --- waypoint interpolation --------------------------------------------------


def test_insert_waypoints_even_split():
    out = insert_waypoints([(0, 0), (10, 0)], h=5)
    np.testing.assert_allclose(out, [(0, 0), (5, 0), (10, 0)])


def test_insert_waypoints_short_segment():
    out = insert_waypoints([(0, 0), (3, 4)], h=10)
    np.testing.assert_allclose(out, [(0, 0), (3, 4)])


def test_insert_waypoints_gap_bound():
    rng = np.random.default_rng(4)
    V = rng.uniform(0, 500, (6, 2))
    out = insert_waypoints(V, h=20)
    gaps = np.hypot(*np.diff(out, axis=0).T)
    assert np.all(gaps <= 20 + 1e-9)


# --- planning ----------------------------------------------------------------


def test_plan_empty_scene_is_straight():
    path = plan_circles((0, 0), (300, 400), np.empty((0, 3)))
    np.testing.assert_allclose(path.nodes, [(0, 0), (300, 400)])
    assert path.length == pytest.approx(500.0)


def test_plan_single_blocking_obstacle():
    circles = np.array([[150.0, 0.0, 40.0]])
    path = plan_circles((0, 0), (300, 0), circles)
    assert path.length > 300.0
    assert polyline_clearance(path.waypoints, circles) >= -CLEARANCE_EPS


def test_plan_is_deterministic():
    scene = generate_arena(40, 50.0, seed=5)
    a = plan_2d(scene, (100, 100), (1900, 1900))
    b = plan_2d(scene, (100, 100), (1900, 1900))
    np.testing.assert_array_equal(a.waypoints, b.waypoints)
    assert a.length == b.length


def test_plan_endpoint_in_zone_rejected():
    circles = np.array([[0.0, 0.0, 50.0]])
    with pytest.raises(EndpointInZone):
        plan_circles((10, 0), (300, 0), circles)
    with pytest.raises(EndpointInZone):
        plan_circles((-300, 0), (10, 0), circles)


def test_plan_clearance_on_random_arenas():
    for seed in range(25):
        scene = generate_arena(30, 50.0, seed=seed)
        path = plan_2d(scene, (100, 100), (1900, 1900))
        assert polyline_clearance(path.waypoints, scene.circles()) >= -CLEARANCE_EPS


def test_plan_succeeds_or_scene_disconnected():
    """Dense random overlapping zones: planner failure requires a blocked map."""
    rng = np.random.default_rng(77)
    failures = 0
    for _ in range(40):
        n = rng.integers(20, 60)
        circles = np.column_stack(
            [
                rng.uniform(200, 1800, (n, 2)),
                rng.uniform(40, 120, n),
            ]
        )
        S, E = (100.0, 100.0), (1900.0, 1900.0)
        gaps = np.hypot(*(circles[:, :2] - np.array(S)).T) - circles[:, 2]
        gape = np.hypot(*(circles[:, :2] - np.array(E)).T) - circles[:, 2]
        circles = circles[(gaps > 1.0) & (gape > 1.0)]
        try:
            path = plan_circles(S, E, circles)
        except PlanFailed:
            failures += 1
            assert not corridor_exists(S, E, circles)
            continue
        assert polyline_clearance(path.waypoints, circles) >= -CLEARANCE_EPS
    assert failures < 10  # overwhelmingly solvable at this density


def test_prune_monotonicity_offpath_obstacle_is_inert():
    scene = generate_arena(20, 50.0, seed=8)
    base = plan_2d(scene, (100, 100), (1900, 1900))
    from dataclasses import replace as dc_replace

    from microplan.scene import Obstacle

    extra = Obstacle(
        id=999, cx=1900.0, cy=100.0, physical_radius=50.0, safety_radius=75.0
    )
    bigger = dc_replace(scene, obstacles=scene.obstacles + (extra,))
    again = plan_2d(bigger, (100, 100), (1900, 1900))
    np.testing.assert_array_equal(base.waypoints, again.waypoints)


def test_plan_via_points_visited():
    scene = generate_arena(15, 50.0, seed=13)
    via = [(400.0, 1500.0)]
    path = plan_2d(scene, (100, 100), (1900, 1900), via=via)
    assert any(np.allclose(v, via[0]) for v in path.nodes)
    with pytest.raises(EndpointInZone):
        inside = scene.obstacles[0]
        plan_2d(scene, (100, 100), (1900, 1900), via=[(inside.cx, inside.cy)])


def test_plan_inflation_increases_clearance():
    scene = generate_arena(25, 50.0, seed=21)
    base = plan_2d(scene, (100, 100), (1900, 1900))
    target = scene.obstacles[0]
    inflated = plan_2d(
        scene, (100, 100), (1900, 1900), inflation={target.id: 150.0}
    )
    c = np.array([target.cx, target.cy])

    def min_dist(path: PlannedPath):
        return min(
            seg_circles_min_clearance(a, b, np.array([[c[0], c[1], 0.0]]))
            for a, b in zip(path.waypoints[:-1], path.waypoints[1:])
        )

    assert min_dist(inflated) >= target.safety_radius + 150.0 - CLEARANCE_EPS
    assert min_dist(inflated) >= min_dist(base) - CLEARANCE_EPS


def test_plan_vertical_ideal_path():
    circles = np.array([[0.0, 150.0, 40.0]])
    path = plan_circles((0, 0), (0, 300), circles)
    assert polyline_clearance(path.waypoints, circles) >= -CLEARANCE_EPS
    assert path.length > 300.0


def test_greedy_only_mode_raises_instead_of_falling_back():
    # a wall of heavily overlapping zones defeats the greedy advancement
    ys = np.linspace(200.0, 1800.0, 15)
    wall = np.column_stack(
        [np.full(15, 1000.0), ys, np.full(15, 90.0)]
    )
    ring = np.array([[1000.0, 60.0, 80.0], [1000.0, 1940.0, 80.0]])
    circles = np.vstack([wall, ring])
    S, E = (100.0, 1000.0), (1900.0, 1000.0)
    try:
        fast = plan_circles(S, E, circles, allow_fallback=False)
    except PlanFailed:
        full = plan_circles(S, E, circles, allow_fallback=True)
        assert polyline_clearance(full.waypoints, circles) >= -CLEARANCE_EPS
    else:
        assert polyline_clearance(fast.waypoints, circles) >= -CLEARANCE_EPS
