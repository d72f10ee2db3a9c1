"""Small exact-geometry helpers shared by the planners and the simulator."""

from __future__ import annotations

import math

import numpy as np


def seg_point_distance(a, b, p):
    """Minimum distance from point p to segment a-b."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    p = np.asarray(p, float)
    d = b - a
    L2 = float(d @ d)
    if L2 == 0.0:
        return float(np.hypot(*(p - a)))
    t = float((p - a) @ d) / L2
    t = min(1.0, max(0.0, t))
    return float(np.hypot(*(p - (a + t * d))))


def seg_circles_min_clearance(a, b, circles):
    """min over circles of (distance from segment a-b to center) - radius.

    `circles` is an (N, 3) array of (cx, cy, r).  Returns +inf for N == 0.
    """
    circles = np.asarray(circles, float)
    if circles.size == 0:
        return math.inf
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d = b - a
    L2 = float(d @ d)
    rel = circles[:, :2] - a
    if L2 == 0.0:
        dist = np.hypot(rel[:, 0], rel[:, 1])
    else:
        t = np.clip(rel @ d / L2, 0.0, 1.0)
        closest = a + t[:, None] * d
        diff = circles[:, :2] - closest
        dist = np.hypot(diff[:, 0], diff[:, 1])
    return float(np.min(dist - circles[:, 2]))


def seg_circle_intersections(a, b, center, r):
    """Number of intersection points (0, 1, or 2) of segment a-b with a circle.

    Tangency counts as one intersection.  Uses exact root counting of the
    quadratic |a + t(b-a) - c|^2 = r^2 restricted to t in [0, 1].
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = np.asarray(center, float)
    d = b - a
    f = a - c
    A = float(d @ d)
    B = 2.0 * float(f @ d)
    C = float(f @ f) - r * r
    if A == 0.0:
        return 1 if C == 0.0 else 0
    disc = B * B - 4 * A * C
    if disc < 0:
        return 0
    if disc == 0:
        t = -B / (2 * A)
        return 1 if 0.0 <= t <= 1.0 else 0
    sq = math.sqrt(disc)
    n = 0
    for t in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
        if 0.0 <= t <= 1.0:
            n += 1
    return n


def count_segment_intersections(a, b, circles):
    """Total intersection count of segment a-b against (N, 3) circles."""
    return sum(
        seg_circle_intersections(a, b, (cx, cy), r) for cx, cy, r in np.asarray(circles, float).reshape(-1, 3)
    )


def polyline_length(points):
    pts = np.asarray(points, float)
    if len(pts) < 2:
        return 0.0
    diffs = np.diff(pts, axis=0)
    return float(np.sum(np.hypot(diffs[:, 0], diffs[:, 1])))


def unit(v):
    v = np.asarray(v, float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n
