"""Rapidly-exploring random tree baseline with exact edge collision tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PlanFailed
from ..geometry import polyline_length, seg_circles_min_clearance

STEP = 50.0
GOAL_TOL = 50.0
MAX_NODES = 100_000


@dataclass(frozen=True)
class RRTResult:
    nodes: np.ndarray  # (K, 2) path from S to E
    length: float
    tree_size: int


def plan_rrt(
    S,
    E,
    circles,
    seed,
    bounds=(2000.0, 2000.0),
    step=STEP,
    goal_tol=GOAL_TOL,
    max_nodes=MAX_NODES,
):
    """Grow a tree from S until a node lands within goal_tol of E.

    Each extension moves `step` from the nearest tree node toward a uniform
    random sample; the edge must clear every zone exactly or it is discarded.
    The final edge snaps to E itself so the reported path ends at the goal.
    """
    rng = np.random.default_rng(seed)
    S = np.asarray(S, float)
    E = np.asarray(E, float)
    circles = np.asarray(circles, float).reshape(-1, 3)

    pts = np.empty((max_nodes, 2))
    parent = np.empty(max_nodes, dtype=np.int64)
    pts[0] = S
    parent[0] = -1
    n = 1
    goal_idx = -1
    while n < max_nodes:
        sample = rng.uniform((0.0, 0.0), bounds)
        d = pts[:n] - sample
        near = int(np.argmin(np.einsum("ij,ij->i", d, d)))
        diff = sample - pts[near]
        dist = float(np.hypot(*diff))
        if dist < 1e-12:
            continue
        new = pts[near] + (step / dist) * diff if dist > step else sample
        if seg_circles_min_clearance(pts[near], new, circles) < 0.0:
            continue
        pts[n] = new
        parent[n] = near
        if float(np.hypot(*(new - E))) <= goal_tol:
            if seg_circles_min_clearance(new, E, circles) >= 0.0:
                goal_idx = n
                n += 1
                break
        n += 1
    if goal_idx < 0:
        raise PlanFailed(f"tree reached {n} nodes without touching the goal")

    path = [E]
    k = goal_idx
    while k >= 0:
        path.append(pts[k])
        k = int(parent[k])
    nodes = np.array(path[::-1])
    return RRTResult(nodes=nodes, length=polyline_length(nodes), tree_size=n)
