"""Local escape controllers and the shared observation builder.

Two interchangeable controllers run while the robot is inside a safety zone:
a deterministic reflection rule (Case I: heading into a zone, Case II: already
inside one) and greedy inference over a trained Q-network.  Both act on the
same 9-action compass set; the observation encodes the four nearest obstacles
in normalized relative coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_ACTIONS = 9
N_OBS_BLOCKS = 4
OBS_DIM = 16
DEFAULT_COMMIT = 5  # frames an intermediate target stays latched

# 8 compass unit vectors, 0 deg = +x, counterclockwise in 45-degree steps
_COMPASS = np.array(
    [
        [math.cos(k * math.pi / 4.0), math.sin(k * math.pi / 4.0)]
        for k in range(8)
    ]
)
# exact values on the axes
_COMPASS[np.abs(_COMPASS) < 1e-15] = 0.0
for _row in _COMPASS:
    _row /= math.hypot(*_row)


def apply_action(action, v_m):
    """Action index -> displacement: 0 stays put, 1..8 move v_m on a compass."""
    if not 0 <= action < N_ACTIONS:
        raise ValueError(f"action must be in 0..8, got {action}")
    if action == 0:
        return np.zeros(2)
    return v_m * _COMPASS[action - 1].copy()


def arrow_length(v_m, v_cmax):
    """Lookahead arrow length: one robot step plus the worst obstacle step."""
    return v_m + v_cmax


def rule_intermediate(m, arrow_tip, centers, zone_radii):
    """Reflection rule: (case, intermediate target or None).

    Case II (robot inside a zone) reflects the nearest violating obstacle
    center across the robot and takes precedence; Case I (arrow tip inside a
    zone) reflects the tip.  Outside both conditions -> ("none", None).
    """
    m = np.asarray(m, float)
    arrow_tip = np.asarray(arrow_tip, float)
    centers = np.asarray(centers, float).reshape(-1, 2)
    zone_radii = np.asarray(zone_radii, float).reshape(-1)
    if len(centers) == 0:
        return "none", None
    d_m = np.hypot(*(centers - m).T) - zone_radii
    if np.any(d_m < 0.0):
        nearest = int(np.argmin(d_m))
        return "II", 2.0 * m - centers[nearest]
    d_tip = np.hypot(*(centers - arrow_tip).T) - zone_radii
    if np.any(d_tip < 0.0):
        return "I", 2.0 * m - arrow_tip
    return "none", None


@dataclass
class RuleController:
    """Latches the active case (and Case II obstacle) for `commit` frames.

    The latch suppresses case oscillation; the reflection itself is recomputed
    from the current geometry every frame, so a moving obstacle is always
    evaded along the live away-direction rather than a stale snapshot.
    """

    v_m: float
    v_cmax: float
    commit: int = DEFAULT_COMMIT
    threat_gap: float = 10.0  # obstacles within this zone gap join the blend
    horizon: int = 3  # frames of constant-velocity rollout when scoring
    active_case: str = "none"
    commit_frames_left: int = 0
    latched_obstacle: int = -1
    current_intermediate: np.ndarray = None

    def reset(self):
        self.active_case = "none"
        self.commit_frames_left = 0
        self.latched_obstacle = -1
        self.current_intermediate = None

    def act(self, m, robot_dir, centers, zone_radii, velocities=None):
        """Displacement toward the intermediate target of the active case."""
        m = np.asarray(m, float)
        centers = np.asarray(centers, float).reshape(-1, 2)
        zone_radii = np.asarray(zone_radii, float).reshape(-1)
        if velocities is None:
            vel = np.zeros_like(centers)
        else:
            vel = np.asarray(velocities, float).reshape(-1, 2)
        # one-frame lookahead: evade obstacles where they will be
        predicted = centers + vel
        violated = np.hypot(*(centers - m).T) - zone_radii < 0.0
        if (
            self.commit_frames_left > 0
            and self.active_case == "I"
            and np.any(violated)
        ):
            # robot crossed into a zone mid-commit: containment outranks the
            # forecast, escalate to Case II on the spot
            self.active_case = "II"
            self.latched_obstacle = int(
                np.argmin(np.hypot(*(centers - m).T) - zone_radii)
            )
            self.commit_frames_left = self.commit - 1
        elif self.commit_frames_left > 0:
            self.commit_frames_left -= 1
        else:
            tip = m + arrow_length(self.v_m, self.v_cmax) * np.asarray(
                robot_dir, float
            )
            case, _ = rule_intermediate(m, tip, centers, zone_radii)
            self.active_case = case
            self.latched_obstacle = -1
            if case == "II":
                d = np.hypot(*(centers - m).T) - zone_radii
                self.latched_obstacle = int(np.argmin(d))
            if case != "none":
                self.commit_frames_left = self.commit - 1

        if self.active_case == "II":
            # Candidate reflections: each obstacle inside the threat band plus
            # their threat-weighted blend.  With a single threat every
            # candidate collapses to the plain reflection 2m - c_i; in a
            # squeeze the scored pick keeps the escape from trading one
            # closing zone for another.
            gaps = np.hypot(*(predicted - m).T) - zone_radii
            w = np.maximum(self.threat_gap - gaps, 0.0)
            if w.sum() <= 0.0:
                w[self.latched_obstacle] = 1.0
            self.latched_obstacle = int(np.argmax(w))
            c_eff = (w / w.sum()) @ predicted
            if float(np.hypot(*(c_eff - m))) < 1e-9:
                c_eff = predicted[int(np.argmin(gaps))]  # symmetric surround
            dirs = []
            for cand in [c_eff] + [predicted[i] for i in np.flatnonzero(w > 0.0)]:
                away = m - cand
                n = float(np.hypot(*away))
                if n < 1e-9:
                    continue
                u = away / n
                dirs.append(u)
                # sideways escapes break a pincer two reflections cannot
                dirs.append(np.array([-u[1], u[0]]))
                dirs.append(np.array([u[1], -u[0]]))
            best = None
            for u in dirs:
                score = math.inf
                for k in range(1, self.horizon + 1):
                    m2 = m + (k * self.v_m) * u
                    c2 = centers + k * vel
                    score = min(
                        score,
                        float(np.min(np.hypot(*(c2 - m2).T) - zone_radii)),
                    )
                if best is None or score > best[0] + 1e-12:
                    best = (score, u)
            if best is None:
                target = 2.0 * m - c_eff
            else:
                target = m + (2.0 * self.v_m) * best[1]
        elif self.active_case == "I":
            tip = m + arrow_length(self.v_m, self.v_cmax) * np.asarray(
                robot_dir, float
            )
            target = 2.0 * m - tip
        else:
            self.current_intermediate = None
            return np.zeros(2)
        self.current_intermediate = target
        delta = target - m
        dist = float(np.hypot(*delta))
        if dist <= 1e-12:
            return np.zeros(2)
        return delta * (min(self.v_m, dist) / dist)


def build_observation(m, centers, velocities, ids, bounds, v_cmax):
    """Four nearest obstacles as (dx, dy, vx, vy) blocks, normalized.

    Distance ties break by id; fewer than four obstacles zero-pad.  Positions
    are scaled by the arena diagonal, velocities by the obstacle speed cap.
    """
    m = np.asarray(m, float)
    centers = np.asarray(centers, float).reshape(-1, 2)
    velocities = np.asarray(velocities, float).reshape(-1, 2)
    d_max = math.hypot(bounds[0], bounds[1])
    obs = np.zeros(OBS_DIM)
    if len(centers) == 0:
        return obs
    dist = np.hypot(*(centers - m).T)
    order = sorted(range(len(centers)), key=lambda k: (dist[k], ids[k]))
    for slot, k in enumerate(order[:N_OBS_BLOCKS]):
        obs[4 * slot : 4 * slot + 2] = (centers[k] - m) / d_max
        obs[4 * slot + 2 : 4 * slot + 4] = velocities[k] / v_cmax
    return obs


@dataclass
class PolicyController:
    """Greedy Q-network policy over the 9-action set."""

    net: object  # anything with forward(batch) -> (batch, 9)
    v_m: float
    v_cmax: float
    bounds: tuple = (2000.0, 2000.0)
    commit: int = DEFAULT_COMMIT
    mask_frames: tuple = (1, 2, 3, 4)  # lookahead depths for the collision veto
    wall_clear: float = None  # robot-wall standoff folded into the veto
    guard: float = 3.0  # margin below which geometry outranks the Q-values

    def reset(self):
        pass

    def act_index(self, obs):
        q = np.asarray(self.net.forward(np.asarray(obs, float)[None, :]))[0]
        return int(np.argmax(q))  # argmax takes the lowest index on ties

    def _predict(self, centers, velocities, wall_radii, k):
        """Obstacle centers k frames out, mirrored off the arena walls.

        Straight-line extrapolation runs obstacles through the walls, so near
        a boundary it predicts a closing obstacle as departing.  The fold
        mirrors each coordinate back into [radius, limit - radius] exactly
        like the simulation's wall bounce (obstacle-obstacle bounces stay
        unmodeled).  Without the true radii the fold is skipped.
        """
        ahead = centers + k * velocities
        if wall_radii is None:
            return ahead
        lo = np.asarray(wall_radii, float).reshape(-1)
        for axis, limit in enumerate(self.bounds):
            span = np.maximum(limit - 2.0 * lo, 1e-9)
            y = np.mod(ahead[:, axis] - lo, 2.0 * span)
            ahead[:, axis] = lo + np.minimum(y, 2.0 * span - y)
        return ahead

    def _action_margins(self, m, centers, velocities, reach, wall_radii):
        """Per-action worst body/wall distance at each lookahead depth.

        Returns an (n_depths, 9) array: row j holds, for every action, the
        minimum predicted distance to any obstacle body at depth
        mask_frames[j] under wall-aware constant-speed extrapolation.  The
        arena walls count as bodies too (clearance = robot radius via
        wall_clear): an action pressing into the boundary walks the robot
        into a dead end no later action can leave quickly.
        """
        out = np.empty((len(self.mask_frames), N_ACTIONS))
        for j, k in enumerate(self.mask_frames):
            ahead = self._predict(centers, velocities, wall_radii, k)
            for a in range(N_ACTIONS):
                land = m + k * apply_action(a, self.v_m)
                margin = float(np.min(np.hypot(*(ahead - land).T) - reach))
                if self.wall_clear is not None:
                    for axis, limit in enumerate(self.bounds):
                        margin = min(
                            margin,
                            land[axis] - self.wall_clear,
                            limit - self.wall_clear - land[axis],
                        )
                out[j, a] = margin
        return out

    def _pick_masked(self, score, depth_margins):
        """Highest-score action among safe ones, relaxing depth if cornered.

        An action is safe when it clears every lookahead depth by more than
        `guard`.  If nothing does, the deepest depth is dropped and the veto
        re-evaluated — a predicted hit four frames out should steer, not
        paralyze.  When even the best action sits inside the guard band the
        geometry outranks the Q-estimate: the observation carries no radii,
        so in a closing squeeze the maximin landing point wins.
        """
        worst = depth_margins.min(axis=0)
        if float(worst.max()) <= self.guard:
            return int(np.argmax(worst))
        for rows in range(len(self.mask_frames), 0, -1):
            safe = depth_margins[:rows].min(axis=0) > self.guard
            if safe.any():
                return int(np.argmax(np.where(safe, score, -np.inf)))
        return int(np.argmax(worst))

    def act(
        self,
        m,
        robot_dir,
        centers,
        velocities,
        ids,
        body_radii=None,
        wall_radii=None,
    ):
        """Greedy action, filtered by a multi-frame collision mask.

        Actions whose landing point falls inside a predicted obstacle body
        over the lookahead window are vetoed; among the rest the highest
        Q-value wins (see _pick_masked for the cornered fallbacks).
        `wall_radii` are the true obstacle radii used to mirror predictions
        off the arena walls.
        """
        m = np.asarray(m, float)
        centers = np.asarray(centers, float).reshape(-1, 2)
        velocities = np.asarray(velocities, float).reshape(-1, 2)
        obs = build_observation(
            m, centers, velocities, ids, self.bounds, self.v_cmax
        )
        q = np.asarray(self.net.forward(obs[None, :]))[0]
        if body_radii is None or len(centers) == 0:
            return apply_action(int(np.argmax(q)), self.v_m)
        reach = np.asarray(body_radii, float).reshape(-1)
        margins = self._action_margins(m, centers, velocities, reach, wall_radii)
        return apply_action(self._pick_masked(q, margins), self.v_m)

    def act_toward(self, m, desired, centers, velocities, body_radii, wall_radii=None):
        """Masked step biased toward a desired displacement.

        Used for the post-escape retreat: the compass action best aligned
        with `desired` wins among mask-safe actions, so the retreat cannot
        walk straight into another obstacle's predicted body.
        """
        m = np.asarray(m, float)
        centers = np.asarray(centers, float).reshape(-1, 2)
        velocities = np.asarray(velocities, float).reshape(-1, 2)
        if len(centers) == 0:
            return np.asarray(desired, float)
        reach = np.asarray(body_radii, float).reshape(-1)
        margins = self._action_margins(m, centers, velocities, reach, wall_radii)
        score = np.array(
            [
                float(np.dot(apply_action(a, self.v_m), desired))
                for a in range(N_ACTIONS)
            ]
        )
        return apply_action(self._pick_masked(score, margins), self.v_m)
