"""Weighted A* grid baseline.

The arena is rasterized into square cells; a cell is traversable iff its
centre lies strictly outside every safety zone.  Moves are 8-connected with
unit cost for straight steps and sqrt(2) for diagonals.  Path cost is tracked
as an exact (straight_count, diag_count) pair so two runs can be compared for
true equality: a + b*sqrt(2) = a' + b'*sqrt(2) only when the integer pairs
match.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..errors import PlanFailed

SQRT2 = math.sqrt(2.0)
CELL = 10.0

_MOVES = (
    (-1, -1, 0, 1), (-1, 0, 1, 0), (-1, 1, 0, 1),
    (0, -1, 1, 0),                 (0, 1, 1, 0),
    (1, -1, 0, 1),  (1, 0, 1, 0),  (1, 1, 0, 1),
)


@dataclass(frozen=True)
class GridPath:
    cells: tuple  # ((row, col), ...) from start cell to goal cell
    points: np.ndarray  # (K, 2) cell-centre world coordinates
    cost: tuple  # (straight_count, diag_count)
    expanded: int

    @property
    def cost_value(self):
        return self.cost[0] + self.cost[1] * SQRT2


def build_grid(circles, bounds=(2000.0, 2000.0), cell=CELL):
    """Boolean traversability grid: True where the cell centre is zone-free."""
    nr = int(round(bounds[1] / cell))
    nc = int(round(bounds[0] / cell))
    ys = (np.arange(nr) + 0.5) * cell
    xs = (np.arange(nc) + 0.5) * cell
    free = np.ones((nr, nc), bool)
    circles = np.asarray(circles, float).reshape(-1, 3)
    for cx, cy, r in circles:
        dx = xs - cx
        dy = ys - cy
        free &= (dy[:, None] ** 2 + dx[None, :] ** 2) > r * r
    return free


def _to_cell(p, cell):
    return int(p[1] // cell), int(p[0] // cell)


def plan_grid(free, start_cell, goal_cell, weight=1.0, cell=CELL):
    """Weighted A* (f = g + weight*h, Euclidean h) over a traversability grid.

    Deterministic tie-break: lowest f, then lowest h, then row-major index.
    weight = 1 is plain A*; weight = 0 degenerates to Dijkstra.
    """
    nr, nc = free.shape
    for name, (r, c) in (("start", start_cell), ("goal", goal_cell)):
        if not (0 <= r < nr and 0 <= c < nc):
            raise ValueError(f"{name} cell {r, c} outside the grid")
        if not free[r, c]:
            raise PlanFailed(f"{name} cell {r, c} is blocked")

    def h(r, c):
        return math.hypot(r - goal_cell[0], c - goal_cell[1])

    g_pair = {start_cell: (0, 0)}
    parent = {start_cell: None}
    closed = set()
    h0 = h(*start_cell)
    heap = [(weight * h0, h0, start_cell[0] * nc + start_cell[1], start_cell)]
    expanded = 0
    while heap:
        _, _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        closed.add(cur)
        expanded += 1
        if cur == goal_cell:
            cells = []
            k = cur
            while k is not None:
                cells.append(k)
                k = parent[k]
            cells.reverse()
            pts = np.array([[(c + 0.5) * cell, (r + 0.5) * cell] for r, c in cells])
            return GridPath(
                cells=tuple(cells),
                points=pts,
                cost=g_pair[cur],
                expanded=expanded,
            )
        a, b = g_pair[cur]
        gc = a + b * SQRT2
        for dr, dc, ds, dd in _MOVES:
            nxt = (cur[0] + dr, cur[1] + dc)
            if not (0 <= nxt[0] < nr and 0 <= nxt[1] < nc):
                continue
            if not free[nxt] or nxt in closed:
                continue
            pair = (a + ds, b + dd)
            val = pair[0] + pair[1] * SQRT2
            old = g_pair.get(nxt)
            if old is not None and old[0] + old[1] * SQRT2 <= val + 1e-12:
                continue
            g_pair[nxt] = pair
            parent[nxt] = cur
            hn = h(*nxt)
            heapq.heappush(
                heap, (val + weight * hn, hn, nxt[0] * nc + nxt[1], nxt)
            )
    raise PlanFailed("goal cell unreachable on the grid")


def plan_wastar(S, E, circles, weight=1.5, bounds=(2000.0, 2000.0), cell=CELL):
    """Rasterize zones, then run weighted A* from S's cell to E's cell."""
    free = build_grid(circles, bounds, cell)
    return plan_grid(free, _to_cell(S, cell), _to_cell(E, cell), weight, cell)


def plan_dijkstra(free, start_cell, goal_cell, cell=CELL):
    """Plain uniform-cost search; the oracle for weight-1 A* equality."""
    return plan_grid(free, start_cell, goal_cell, weight=0.0, cell=cell)
