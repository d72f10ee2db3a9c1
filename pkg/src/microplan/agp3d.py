"""3D planning by slicing sphere obstacles with planes through the S-E axis.

Each candidate plane contains the start->end axis and is rotated about it by
an evenly spaced angle.  Spheres cut the plane in circles; the 2D planner runs
inside the plane, and the shortest in-plane path wins.  The plane frame is
(u, v): u along the axis, v along the rotated transverse direction, so the 2D
problem always starts at (0, 0) and ends at (L, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .agp import DEFAULT_ALPHA, DEFAULT_SPACING, PlannedPath, plan_circles
from .errors import PlanFailed
from .geometry import polyline_length, unit

DEFAULT_PLANES = 16


def _transverse_seed(axis):
    """A unit vector perpendicular to the axis, chosen deterministically."""
    a = np.abs(axis)
    ref = np.zeros(3)
    ref[int(np.argmin(a))] = 1.0
    return unit(np.cross(axis, ref))


def _rotate_about(vec, axis, angle):
    """Rodrigues rotation of vec about a unit axis."""
    c, s = math.cos(angle), math.sin(angle)
    return vec * c + np.cross(axis, vec) * s + axis * float(axis @ vec) * (1 - c)


@dataclass(frozen=True)
class PlaneSlice:
    """One candidate cutting plane with its in-plane obstacle circles."""

    index: int
    angle: float
    origin: np.ndarray  # start point S
    e1: np.ndarray  # unit, along S->E
    e2: np.ndarray  # unit, transverse (rotated seed)
    normal: np.ndarray  # e1 x e2
    length: float  # |E - S|
    circles: np.ndarray  # (M, 3) in-plane (u, v, r)

    def project(self, p):
        """World point -> (u, v) in-plane coordinates (drops the normal part)."""
        rel = np.asarray(p, float) - self.origin
        return np.array([float(rel @ self.e1), float(rel @ self.e2)])

    def lift(self, q):
        """(u, v) in-plane coordinates -> world point on the plane."""
        q = np.asarray(q, float)
        return self.origin + q[0] * self.e1 + q[1] * self.e2


def slice_plane(S, E, spheres, index, n_planes=DEFAULT_PLANES):
    """Build plane `index` and intersect every sphere with it.

    Sphere (C, r) meets the plane in a circle iff |signed distance| < r; the
    circle is kept only when its centre projects inside the axis span
    0 <= u <= L, mirroring the 2D pruning of obstacles behind or past the run.
    """
    S = np.asarray(S, float)
    E = np.asarray(E, float)
    d = E - S
    L = float(np.linalg.norm(d))
    if L == 0.0:
        raise ValueError("start and end must differ")
    e1 = d / L
    q0 = _transverse_seed(e1)
    angle = 2.0 * math.pi * index / n_planes
    e2 = _rotate_about(q0, e1, angle)
    normal = np.cross(e1, e2)

    circles = []
    for cx, cy, cz, r in np.asarray(spheres, float).reshape(-1, 4):
        C = np.array([cx, cy, cz])
        delta = float((C - S) @ normal)
        if abs(delta) >= r:
            continue
        P = C - delta * normal
        u = float((P - S) @ e1)
        if u < 0.0 or u > L:
            continue
        v = float((P - S) @ e2)
        circles.append((u, v, math.sqrt(r * r - delta * delta)))
    return PlaneSlice(
        index=index,
        angle=angle,
        origin=S,
        e1=e1,
        e2=e2,
        normal=normal,
        length=L,
        circles=np.array(circles).reshape(-1, 3),
    )


@dataclass(frozen=True)
class Planned3D:
    plane: PlaneSlice
    nodes: np.ndarray  # (K, 3) world-space nodes
    waypoints: np.ndarray  # (J, 3) world-space waypoints
    length: float
    per_plane: tuple  # (index, length-or-None) for every candidate plane


def plan_3d(
    S,
    E,
    spheres,
    n_planes=DEFAULT_PLANES,
    alpha=DEFAULT_ALPHA,
    h=DEFAULT_SPACING,
):
    """Plan among spheres: try every plane, keep the shortest in-plane path."""
    if n_planes < 1:
        raise ValueError("need at least one plane")
    best = None
    per_plane = []
    failures = []
    for i in range(n_planes):
        sl = slice_plane(S, E, spheres, i, n_planes)
        try:
            path2d = plan_circles(
                np.zeros(2), np.array([sl.length, 0.0]), sl.circles, alpha=alpha, h=h
            )
        except PlanFailed as e:
            per_plane.append((i, None))
            failures.append((i, str(e)))
            continue
        per_plane.append((i, path2d.length))
        if best is None or path2d.length < best[1].length:
            best = (sl, path2d)
    if best is None:
        raise PlanFailed(
            "no cutting plane admits a collision-free path",
            diagnostics=failures,
        )
    sl, path2d = best
    nodes = np.array([sl.lift(q) for q in path2d.nodes])
    waypoints = np.array([sl.lift(q) for q in path2d.waypoints])
    diffs = np.diff(waypoints, axis=0)
    length = float(np.sum(np.linalg.norm(diffs, axis=1)))
    return Planned3D(
        plane=sl,
        nodes=nodes,
        waypoints=waypoints,
        length=length,
        per_plane=tuple(per_plane),
    )
