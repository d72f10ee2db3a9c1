"""Particle-swarm path optimizer baseline.

Decision variables are the transverse offsets of K interior control nodes at
fixed, uniform stations along the start->end axis; a natural cubic spline
through the nodes is sampled into waypoints and scored by length multiplied by
a zone-violation penalty.  Constriction-coefficient dynamics (Clerc-Kennedy)
with an extra per-iteration inertia decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ..geometry import polyline_length

PHI = 4.1
KAPPA = 1.0


def constriction(phi=PHI, k=KAPPA):
    """chi = 2k / |2 - phi - sqrt(phi^2 - 4 phi)| (requires phi > 4)."""
    if phi <= 4.0:
        raise ValueError("constriction requires phi > 4")
    return 2.0 * k / abs(2.0 - phi - math.sqrt(phi * phi - 4.0 * phi))


@dataclass(frozen=True)
class PSOResult:
    waypoints: np.ndarray  # (J+1, 2) world-space samples, S first, E last
    length: float
    cost: float
    violation: float
    history: np.ndarray  # (G,) best cost after each iteration


def _spline_waypoints(ys, xs, x_dense):
    spline = CubicSpline(xs, ys, bc_type="natural")
    return spline(x_dense)


def violation_sum(waypoints, circles):
    """Sum over waypoints and zones of max(1 - dist/r, 0)."""
    if len(circles) == 0:
        return 0.0
    d = np.hypot(
        waypoints[:, None, 0] - circles[None, :, 0],
        waypoints[:, None, 1] - circles[None, :, 1],
    )
    phi = np.maximum(1.0 - d / circles[None, :, 2], 0.0)
    return float(phi.sum())


def plan_pso(
    S,
    E,
    circles,
    seed,
    n_nodes=50,
    n_particles=100,
    n_iter=50,
    n_samples=100,
    penalty=100.0,
    w_damp=0.9,
):
    """Optimize interior node offsets; returns the best sampled path found.

    Works in the rotated frame with x along S->E so the fixed stations are
    uniform in x; the swarm only moves node y-values.  The straight line seeds
    the initial global best, so the result can never be worse than straight.
    """
    rng = np.random.default_rng(seed)
    S = np.asarray(S, float)
    E = np.asarray(E, float)
    circles = np.asarray(circles, float).reshape(-1, 3)
    L = float(np.hypot(*(E - S)))
    if L == 0.0:
        raise ValueError("start and end must differ")
    ex = (E - S) / L
    ey = np.array([-ex[1], ex[0]])
    basis = np.stack([ex, ey], axis=1)
    local = np.empty_like(circles)
    local[:, :2] = (circles[:, :2] - S) @ basis
    local[:, 2] = circles[:, 2]

    xs = np.linspace(0.0, L, n_nodes + 2)
    x_dense = np.linspace(0.0, L, n_samples + 1)
    y_lo, y_hi = -L, L
    v_max = 0.1 * (y_hi - y_lo)

    chi = constriction()
    c_personal = chi * (PHI / 2.0)
    c_social = chi * (PHI / 2.0)

    def cost_of(y_interior):
        ys = np.concatenate([[0.0], y_interior, [0.0]])
        wy = _spline_waypoints(ys, xs, x_dense)
        pts = np.stack([x_dense, wy], axis=1)
        length = polyline_length(pts)
        viol = violation_sum(pts, local)
        return length * (1.0 + penalty * viol), pts, length, viol

    pos = rng.uniform(y_lo / 4.0, y_hi / 4.0, size=(n_particles, n_nodes))
    vel = np.zeros((n_particles, n_nodes))
    pbest = pos.copy()
    pbest_cost = np.array([cost_of(p)[0] for p in pos])

    g_cost, g_pts, g_len, g_viol = cost_of(np.zeros(n_nodes))
    gbest = np.zeros(n_nodes)
    best_idx = int(np.argmin(pbest_cost))
    if pbest_cost[best_idx] < g_cost:
        gbest = pbest[best_idx].copy()
        g_cost, g_pts, g_len, g_viol = cost_of(gbest)

    w = chi
    history = np.empty(n_iter)
    for it in range(n_iter):
        r1 = rng.random(n_particles)
        r2 = rng.random(n_particles)
        vel = (
            w * vel
            + c_personal * r1[:, None] * (pbest - pos)
            + c_social * r2[:, None] * (gbest[None, :] - pos)
        )
        np.clip(vel, -v_max, v_max, out=vel)
        pos = np.clip(pos + vel, y_lo, y_hi)
        for i in range(n_particles):
            c, pts, length, viol = cost_of(pos[i])
            if c < pbest_cost[i]:
                pbest_cost[i] = c
                pbest[i] = pos[i]
                if c < g_cost:
                    gbest = pos[i].copy()
                    g_cost, g_pts, g_len, g_viol = c, pts, length, viol
        w *= w_damp
        history[it] = g_cost

    world = S + g_pts[:, :1] * ex + g_pts[:, 1:] * ey
    return PSOResult(
        waypoints=world,
        length=g_len,
        cost=g_cost,
        violation=g_viol,
        history=history,
    )
