"""Deterministic analytic-geometry global planner (2D).

The planner works in a rotated frame whose x-axis runs from the start to the
end point, so vertical ideal paths need no special slope handling.  Node
advancement alternates perpendicular feet and tangent intersections; the
returned polyline is validated exactly (segment-to-center distance) against
every obstacle before it is accepted.  No randomness anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import EndpointInZone, PlanFailed, TangentInfeasible
from .geometry import polyline_length, seg_circles_min_clearance
from .scene import Scene

DEFAULT_ALPHA = 6.0
DEFAULT_SPACING = 20.0
CLEARANCE_EPS = 1e-6


@dataclass(frozen=True)
class PruneResult:
    retained: tuple[int, ...]  # obstacle ids, sorted by foot x (tie: y, id)
    feet: np.ndarray  # (M, 2) foot points on the ideal path
    t: np.ndarray  # (M,) fractions along the ideal path


@dataclass(frozen=True)
class PlannedPath:
    nodes: np.ndarray  # (K, 2) primary nodes, first=S, last=E
    waypoints: np.ndarray  # (J, 2) dense waypoints, includes all nodes
    length: float

    def to_dict(self):
        return {
            "nodes": self.nodes.tolist(),
            "waypoints": self.waypoints.tolist(),
            "length": self.length,
        }


def tangent_slopes(v, c, r):
    """Slopes of the two tangent lines from point v to the circle (c, r).

    Vertical tangents are reported as math.inf.
    """
    v = np.asarray(v, float)
    c = np.asarray(c, float)
    d = float(np.hypot(*(c - v)))
    if d <= r:
        raise TangentInfeasible(f"point at distance {d} not outside radius {r}")
    theta = math.atan2(c[1] - v[1], c[0] - v[0])
    half = math.asin(r / d)
    slopes = []
    for phi in (theta + half, theta - half):
        if abs(math.cos(phi)) < 1e-12:
            slopes.append(math.inf)
        else:
            slopes.append(math.tan(phi))
    return tuple(slopes)


def insert_waypoints(V, h):
    """Evenly interpolate each polyline segment at spacing <= h."""
    if h <= 0:
        raise ValueError("spacing h must be > 0")
    V = np.asarray(V, float)
    if len(V) < 2:
        raise ValueError("need at least two nodes")
    out = [V[0]]
    for a, b in zip(V[:-1], V[1:]):
        n = max(1, int(math.ceil(float(np.hypot(*(b - a))) / h)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    return np.array(out)


def prune_obstacles(scene: Scene, S, E, alpha) -> PruneResult:
    """Keep obstacles whose foot lies on the segment and within the strip."""
    S = np.asarray(S, float)
    E = np.asarray(E, float)
    if np.array_equal(S, E):
        raise ValueError("start and end must differ")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    circles = scene.circles()
    ids = np.array([o.id for o in scene.obstacles])
    keep, feet, ts = _prune(S, E, circles, alpha)
    order = sorted(
        range(len(keep)),
        key=lambda k: (feet[k][0], feet[k][1], int(ids[keep[k]])),
    )
    return PruneResult(
        retained=tuple(int(ids[keep[k]]) for k in order),
        feet=np.array([feet[k] for k in order]).reshape(-1, 2),
        t=np.array([ts[k] for k in order]),
    )


def _prune(S, E, circles, alpha):
    d = E - S
    L2 = float(d @ d)
    if len(circles) == 0:
        return [], [], []
    t = (circles[:, :2] - S) @ d / L2
    feet = S + t[:, None] * d
    off = np.hypot(*(circles[:, :2] - feet).T)
    mask = (t >= 0.0) & (t <= 1.0) & (off <= alpha * circles[:, 2])
    idx = np.nonzero(mask)[0]
    return list(idx), [feet[i] for i in idx], [float(t[i]) for i in idx]


def _count_intersections(a, b, circles):
    """Total segment-circle intersection count; tangency counts once."""
    if len(circles) == 0:
        return 0
    d = b - a
    A = float(d @ d)
    f = a - circles[:, :2]
    B = 2.0 * f @ d
    C = np.einsum("ij,ij->i", f, f) - circles[:, 2] ** 2
    if A == 0.0:
        return int(np.count_nonzero(C == 0.0))
    disc = B * B - 4 * A * C
    total = 0
    pos = disc > 0
    if np.any(pos):
        sq = np.sqrt(disc[pos])
        t1 = (-B[pos] - sq) / (2 * A)
        t2 = (-B[pos] + sq) / (2 * A)
        total += int(np.count_nonzero((t1 >= 0) & (t1 <= 1)))
        total += int(np.count_nonzero((t2 >= 0) & (t2 <= 1)))
    tang = disc == 0
    if np.any(tang):
        t0 = -B[tang] / (2 * A)
        total += int(np.count_nonzero((t0 >= 0) & (t0 <= 1)))
    return total


def _blockers(v, goal, circles):
    """Indices of circles whose zone intersects the open segment v -> goal."""
    if len(circles) == 0:
        return []
    d = goal - v
    L2 = float(d @ d)
    rel = circles[:, :2] - v
    t = np.clip(rel @ d / L2, 0.0, 1.0) if L2 > 0 else np.zeros(len(circles))
    closest = v + t[:, None] * d
    dist = np.hypot(*(circles[:, :2] - closest).T)
    return list(np.nonzero(dist - circles[:, 2] < -CLEARANCE_EPS)[0])


def _advance_nodes(S_loc, E_loc, retained, all_circles):
    """Node advancement in the rotated frame (x runs along the ideal path).

    At every step the perpendicular foot on the next blocking obstacle's
    perpendicular line is tried first, then the tangent-line intersections
    with that line; every accepted hop is exactly collision-checked against
    all zones, so the final polyline never needs repair.
    """
    V = [S_loc]
    max_iter = 6 * len(all_circles) + 16
    for _ in range(max_iter):
        v = V[-1]
        if seg_circles_min_clearance(v, E_loc, all_circles) >= -CLEARANCE_EPS:
            V.append(E_loc)
            return V
        # Construction geometry comes from the pruned set; the full set is
        # only consulted when a discarded obstacle turns out to block anyway.
        blocking = _blockers(v, E_loc, retained)
        circle_set = retained
        if not blocking:
            blocking = _blockers(v, E_loc, all_circles)
            circle_set = all_circles
        if not blocking:
            # numerically clear but failed the strict check; accept direct run
            V.append(E_loc)
            return V

        def admissible(c):
            return (
                float(np.hypot(*(c - v))) > 1e-9
                and seg_circles_min_clearance(v, c, all_circles) >= -CLEARANCE_EPS
            )

        # Candidate perpendicular lines: feet of blocking obstacles ahead of
        # the current node, then their far zone edges as a fallback.
        lines = sorted({circle_set[k][0] for k in blocking if circle_set[k][0] > v[0] + 1e-9})
        lines += sorted(
            {
                circle_set[k][0] + circle_set[k][2]
                for k in blocking
                if circle_set[k][0] + circle_set[k][2] > v[0] + 1e-9
            }
        )
        order = sorted(
            blocking,
            key=lambda k: (
                float(np.hypot(*(circle_set[k][:2] - v))) - circle_set[k][2],
                k,
            ),
        )
        tangent_dirs = []  # (phi, d, r) tangents from v to each nearby circle
        for k in order:
            cx, cy, r = circle_set[k]
            d = float(np.hypot(cx - v[0], cy - v[1]))
            if d <= r:
                continue
            theta = math.atan2(cy - v[1], cx - v[0])
            half = math.asin(min(1.0, r / d))
            tangent_dirs.append((theta + half, d, r, k))
            tangent_dirs.append((theta - half, d, r, k))

        v_new = None
        for line_x in lines:
            perp_foot = np.array([line_x, v[1]])
            if admissible(perp_foot):
                v_new = perp_foot
                break
            candidates = []
            for phi, _, _, _ in tangent_dirs:
                cphi = math.cos(phi)
                if abs(cphi) < 1e-12:
                    continue
                t = (line_x - v[0]) / cphi
                if t <= 0:
                    continue
                candidates.append(np.array([line_x, v[1] + t * math.sin(phi)]))
            valid = [c for c in candidates if admissible(c)]
            if valid:
                v_new = min(valid, key=lambda c: float(np.hypot(*(c - v))))
                break
        if v_new is None:
            # Fallback hops when every line candidate is blocked: tangency
            # points on nearby circles, and the transverse extremes of each
            # blocking zone.  Shorter hops let the path wrap tight clusters.
            fallback = []
            for phi, d, r, _ in tangent_dirs:
                reach = math.sqrt(max(0.0, d * d - r * r))
                fallback.append(
                    v + reach * np.array([math.cos(phi), math.sin(phi)])
                )
            for k in blocking:
                cx, cy, r = circle_set[k]
                fallback.append(np.array([cx, cy + r]))
                fallback.append(np.array([cx, cy - r]))
            valid = [
                c
                for c in fallback
                if admissible(c) and not any(np.allclose(c, p) for p in V)
            ]
            if not valid:
                raise PlanFailed(
                    "dead end: no perpendicular foot or tangent intersection "
                    "is collision-free",
                    diagnostics=[p.tolist() for p in V],
                )
            v_new = min(valid, key=lambda c: float(np.hypot(*(c - v))))
        V.append(v_new)
    raise PlanFailed(
        "node advancement did not terminate",
        diagnostics=[p.tolist() for p in V],
    )


_RING_POINTS = 12
_NEIGHBOR_RADIUS = 400.0
_KNN = 6


def _visibility_fallback(S_loc, E_loc, circles):
    """Shortest polyline over ring points placed just outside every zone.

    Used only when the greedy advancement dead-ends (typically a node grazing
    one zone while every hop toward the next blocker clips it by a hair).
    Ring radius r / cos(pi/M) keeps chords between adjacent ring points clear
    of their own circle; every edge is still checked against all zones, and
    Dijkstra over the surviving edges is deterministic.
    """
    m = _RING_POINTS
    pts = [S_loc, E_loc]
    if len(circles):
        ang = 2.0 * math.pi * np.arange(m) / m
        ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        for cx, cy, r in circles:
            rr = (r + 1e-3) / math.cos(math.pi / m)
            pts.append(np.array([cx, cy]) + rr * ring)
        pts = np.vstack([np.asarray(pts[0])[None], np.asarray(pts[1])[None]] + pts[2:])
    else:
        pts = np.vstack(pts)
    # drop points that landed inside a neighbouring zone
    ok = np.ones(len(pts), bool)
    if len(circles):
        d = np.hypot(
            pts[:, None, 0] - circles[None, :, 0],
            pts[:, None, 1] - circles[None, :, 1],
        )
        ok[2:] = np.min(d[2:] - circles[None, :, 2], axis=1) >= -CLEARANCE_EPS
    pts = pts[ok]

    n = len(pts)
    ii, jj = np.triu_indices(n, k=1)
    seg_a = pts[ii]
    seg_d = pts[jj] - pts[ii]
    w = np.hypot(seg_d[:, 0], seg_d[:, 1])
    # Edge pruning keeps the graph sparse: short edges carry the detours,
    # k-nearest edges keep sparse regions connected, and the terminals see
    # every node so long straight runs are never lost.
    cand = (w <= _NEIGHBOR_RADIUS) | (ii < 2)
    if n > 10:
        full = np.full((n, n), np.inf)
        full[ii, jj] = w
        full[jj, ii] = w
        knn = np.argsort(full, axis=1)[:, :_KNN]
        near = np.zeros((n, n), bool)
        near[np.repeat(np.arange(n), _KNN), knn.ravel()] = True
        cand |= near[ii, jj] | near[jj, ii]
    ii, jj, seg_a, seg_d, w = ii[cand], jj[cand], seg_a[cand], seg_d[cand], w[cand]
    clear = np.full(len(ii), np.inf)
    if len(circles):
        L2 = np.maximum(w * w, 1e-300)
        for cx, cy, r in circles:
            rel_x = cx - seg_a[:, 0]
            rel_y = cy - seg_a[:, 1]
            t = np.clip((rel_x * seg_d[:, 0] + rel_y * seg_d[:, 1]) / L2, 0.0, 1.0)
            dx = rel_x - t * seg_d[:, 0]
            dy = rel_y - t * seg_d[:, 1]
            clear = np.minimum(clear, np.hypot(dx, dy) - r)
    good = clear >= -CLEARANCE_EPS
    graph = csr_matrix(
        (w[good], (ii[good], jj[good])), shape=(n, n)
    )
    dist, pred = dijkstra(
        graph, directed=False, indices=0, return_predecessors=True
    )
    if not np.isfinite(dist[1]):
        raise PlanFailed(
            "no collision-free path exists through the zone layout",
            diagnostics=None,
        )
    path = [1]
    while path[-1] != 0:
        path.append(int(pred[path[-1]]))
    return [pts[k] for k in reversed(path)]


def plan_circles(
    S, E, circles, alpha=DEFAULT_ALPHA, h=DEFAULT_SPACING, allow_fallback=True
):
    """Core planner over raw (cx, cy, r) circles in world coordinates.

    `allow_fallback=False` restricts planning to the fast greedy advancement
    and raises on its dead ends; callers on a frame budget use it and decide
    themselves when to pay for the graph fallback.
    """
    S = np.asarray(S, float)
    E = np.asarray(E, float)
    if np.array_equal(S, E):
        raise ValueError("start and end must differ")
    circles = np.asarray(circles, float).reshape(-1, 3)
    for name, p in (("start", S), ("end", E)):
        if len(circles) and np.min(
            np.hypot(*(circles[:, :2] - p).T) - circles[:, 2]
        ) < -CLEARANCE_EPS:
            raise EndpointInZone(f"{name} point {p.tolist()} lies inside a safety zone")

    # Rotated frame: x along S->E, origin at S.
    L = float(np.hypot(*(E - S)))
    ex = (E - S) / L
    ey = np.array([-ex[1], ex[0]])
    basis = np.stack([ex, ey], axis=1)

    def to_local(p):
        return (np.asarray(p, float) - S) @ basis

    def to_world(q):
        return S + q[0] * ex + q[1] * ey

    local = np.empty_like(circles)
    local[:, :2] = (circles[:, :2] - S) @ basis
    local[:, 2] = circles[:, 2]

    keep, _, _ = _prune(np.zeros(2), np.array([L, 0.0]), local, alpha)
    retained = local[keep] if keep else np.empty((0, 3))

    E_loc = np.array([L, 0.0])
    try:
        V = _advance_nodes(np.zeros(2), E_loc, retained, local)
    except PlanFailed:
        if not allow_fallback:
            raise
        V = _visibility_fallback(np.zeros(2), E_loc, local)
    nodes = np.array([to_world(p) for p in V])
    for a, b in zip(nodes[:-1], nodes[1:]):
        if seg_circles_min_clearance(a, b, circles) < -CLEARANCE_EPS:
            raise PlanFailed(
                "constructed path intersects a safety zone",
                diagnostics=nodes.tolist(),
            )
    waypoints = insert_waypoints(nodes, h)
    return PlannedPath(nodes=nodes, waypoints=waypoints, length=polyline_length(waypoints))


def plan_2d(
    scene: Scene,
    S,
    E,
    alpha=DEFAULT_ALPHA,
    h=DEFAULT_SPACING,
    inflation=None,
    via=None,
):
    """Plan S -> (via...) -> E against the scene's (optionally inflated) zones."""
    circles = scene.circles(inflation)
    points = [np.asarray(S, float)]
    for p in via or []:
        p = np.asarray(p, float)
        if len(circles) and np.min(
            np.hypot(*(circles[:, :2] - p).T) - circles[:, 2]
        ) < -CLEARANCE_EPS:
            raise EndpointInZone(f"via point {p.tolist()} lies inside a safety zone")
        points.append(p)
    points.append(np.asarray(E, float))

    nodes = None
    waypoints = None
    for a, b in zip(points[:-1], points[1:]):
        leg = plan_circles(a, b, circles, alpha=alpha, h=h)
        if nodes is None:
            nodes, waypoints = leg.nodes, leg.waypoints
        else:
            nodes = np.vstack([nodes, leg.nodes[1:]])
            waypoints = np.vstack([waypoints, leg.waypoints[1:]])
    return PlannedPath(nodes=nodes, waypoints=waypoints, length=polyline_length(waypoints))
