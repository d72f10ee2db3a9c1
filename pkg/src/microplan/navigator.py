"""Hybrid closed loop: global replanning, waypoint tracking, local escape.

Each frame either follows the current plan toward the next waypoint (global
mode) or hands control to a local escape controller while inside a safety
zone (local mode).  Zone entry/exit, replans, arrivals, and plan failures all
land in the simulation event log.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .agp import DEFAULT_ALPHA, DEFAULT_SPACING, plan_circles
from .errors import EndpointInZone, PlanFailed
from .geometry import seg_circles_min_clearance
from .sim import Simulation

MODE_GLOBAL = "global"
MODE_LOCAL = "local"


@dataclass
class NavConfig:
    arrival_radius: float = 10.0  # gamma, px
    alpha: float = DEFAULT_ALPHA
    spacing: float = DEFAULT_SPACING
    controller: str = "none"  # none | rule | rl
    replan: str = "every-frame"  # every-frame | on-exit
    plan_margin: float = 10.0  # extra standoff added to zones when planning
    retreat_clear: float = 15.0  # clearance the policy opens before handing back
    mask_pad: float = 2.0  # extra body standoff in the policy's action veto
    use_global: bool = True  # False: local controller alone, straight runs
    field_b0: float = 5.0  # mT
    field_omega: float = 2.0 * math.pi * 20.0  # rad/s
    timeout_frames: int = 3_000


@dataclass(frozen=True)
class ActuationCmd:
    azimuth: float
    tilt: float
    amplitude: float
    omega: float


def track_bearing(m, w):
    """Bearing and distance to a waypoint; coincident points give (0, 0)."""
    m = np.asarray(m, float)
    w = np.asarray(w, float)
    d = float(np.hypot(*(w - m)))
    if d == 0.0:
        return 0.0, 0.0
    return math.atan2(w[1] - m[1], w[0] - m[0]), d


def field_command(theta, b0, omega, t):
    """Rotating-field vector rolling the robot along bearing theta.

    Planar mode: azimuth = theta + pi/2, tilt = pi/2, so the rotation plane
    is vertical and perpendicular to the travel direction.
    """
    alpha = theta + math.pi / 2.0
    s = math.sin(omega * t)
    return b0 * np.array(
        [math.sin(alpha) * s, -math.cos(alpha) * s, math.cos(omega * t)]
    )


@dataclass
class Navigator:
    sim: Simulation
    target: np.ndarray
    config: NavConfig = field(default_factory=NavConfig)
    controller: object = None  # RuleController / PolicyController when used
    mode: str = MODE_GLOBAL
    plan: object = None
    waypoint_index: int = 0
    frames_in_local: int = 0
    via: list = field(default_factory=list)
    reached: bool = False
    last_compute_ms: float = 0.0
    _was_in_zone: bool = False
    _policy_latch: bool = False

    def __post_init__(self):
        self.target = np.asarray(self.target, float)

    # --- plan bookkeeping ----------------------------------------------------

    def _plan_once(self, circles, allow_fallback):
        points = [self.sim.robot] + [np.asarray(v, float) for v in self.via]
        points.append(self.target)
        waypoints = None
        for a, b in zip(points[:-1], points[1:]):
            leg = plan_circles(
                a,
                b,
                circles,
                alpha=self.config.alpha,
                h=self.config.spacing,
                allow_fallback=allow_fallback,
            )
            if waypoints is None:
                waypoints = leg.waypoints
            else:
                waypoints = np.vstack([waypoints, leg.waypoints[1:]])
        return waypoints

    def _plan_still_clear(self, circles):
        """Remaining waypoints (from the robot onward) clear of all zones?"""
        if self.plan is None:
            return False
        pts = np.vstack([self.sim.robot, self.plan[self.waypoint_index :]])
        for a, b in zip(pts[:-1], pts[1:]):
            if seg_circles_min_clearance(a, b, circles) < 0.0:
                return False
        return True

    def replan(self):
        """Plan from the robot to the target against current r^sim zones.

        The fast greedy construction runs every frame; its occasional dead
        ends fall back to reusing the previous plan while it stays clear, and
        only then to the planner's full graph fallback.
        """
        circles = self.sim.zones()
        # plan with a standoff from the moving zones when the robot's own
        # clearance allows it; tangent-tight paths invite boundary dancing
        margin = max(0.0, min(self.config.plan_margin, self.sim.min_clearance() - 1.0))
        circles[:, 2] += margin
        try:
            waypoints = self._plan_once(circles, allow_fallback=False)
        except (PlanFailed, EndpointInZone, ValueError):
            if self._plan_still_clear(circles):
                return True
            try:
                waypoints = self._plan_once(circles, allow_fallback=True)
            except (PlanFailed, EndpointInZone, ValueError):
                self.plan = None
                return False
        self.plan = waypoints
        self.waypoint_index = 1 if len(waypoints) > 1 else 0
        self.sim.log("replan", length=float(len(waypoints)))
        return True

    def _advance_waypoint(self):
        g = self.config.arrival_radius
        while self.waypoint_index < len(self.plan) - 1:
            _, d = track_bearing(self.sim.robot, self.plan[self.waypoint_index])
            if d > g:
                break
            self.waypoint_index += 1

    # --- per-frame control ---------------------------------------------------

    def _consult_controller(self, in_zone):
        """(engaged, displacement) from the configured local controller.

        The reflection rule is consulted every frame so its forecast case
        (arrow tip entering a zone) can trigger before the robot is inside;
        the learned policy engages on actual or next-frame zone entry and
        holds for a short commit window so it is not disengaged mid-escape.
        """
        c = self.controller
        if c is None:
            return False, None
        if hasattr(c, "net"):  # policy controller
            if in_zone:
                self._policy_latch = True
                return True, c.act(
                    self.sim.robot,
                    self.sim.robot_dir,
                    self.sim.centers,
                    self.sim.velocities,
                    np.arange(len(self.sim.centers)),
                    body_radii=self.sim.radii
                    + self.sim.config.robot_radius
                    + self.config.mask_pad,
                    wall_radii=self.sim.radii,
                )
            if self._policy_latch:
                # retreat band: after the escape, open distance from the
                # nearest (predicted) zone before handing back to the plan,
                # otherwise the very next waypoint re-enters the same zone.
                # The retreat step goes through the same collision mask as
                # in-zone actions so it cannot back into another body.
                ahead = self.sim.centers + self.sim.velocities
                gaps = np.hypot(*(ahead - self.sim.robot).T) - self.sim.zone_radii()
                if float(np.min(gaps)) < self.config.retreat_clear:
                    away = self.sim.robot - ahead[int(np.argmin(gaps))]
                    n = float(np.hypot(*away))
                    if n > 1e-12:
                        desired = away * (self.sim.config.robot_speed / n)
                        return True, c.act_toward(
                            self.sim.robot,
                            desired,
                            self.sim.centers,
                            self.sim.velocities,
                            body_radii=self.sim.radii
                            + self.sim.config.robot_radius
                            + self.config.mask_pad,
                            wall_radii=self.sim.radii,
                        )
                self._policy_latch = False
            return False, None
        disp = c.act(
            self.sim.robot,
            self.sim.robot_dir,
            self.sim.centers,
            self.sim.zone_radii(),
            velocities=self.sim.velocities,
        )
        return c.active_case != "none", disp

    def _global_displacement(self):
        if self.config.use_global:
            if self.config.replan == "every-frame" or self.plan is None:
                self.replan()
            if self.plan is None:
                return np.zeros(2)  # hold position until a plan exists
            self._advance_waypoint()
            aim = self.plan[self.waypoint_index]
        else:
            aim = self.target
        theta, d = track_bearing(self.sim.robot, aim)
        if d == 0.0:
            return np.zeros(2)
        step = min(self.sim.config.robot_speed, d)
        return step * np.array([math.cos(theta), math.sin(theta)])

    def nav_step(self):
        """One frame: choose displacement, step the world, emit actuation."""
        t0 = time.perf_counter()
        clearance = self.sim.min_clearance()
        in_zone = clearance < 0.0
        if in_zone and not self._was_in_zone:
            self.sim.log("zone-enter", clearance=clearance)
        elif not in_zone and self._was_in_zone:
            self.sim.log("zone-exit", clearance=clearance)
        self._was_in_zone = in_zone

        engaged, disp = self._consult_controller(in_zone)
        if engaged and self.mode == MODE_GLOBAL:
            self.mode = MODE_LOCAL
            self.frames_in_local = 0
            self.sim.log("mode-switch", mode=MODE_LOCAL)
        elif not engaged and self.mode == MODE_LOCAL:
            self.mode = MODE_GLOBAL
            self.sim.log("mode-switch", mode=MODE_GLOBAL)
            if self.config.use_global:
                self.replan()

        if self.mode == MODE_LOCAL:
            self.frames_in_local += 1
        else:
            disp = self._global_displacement()

        self.sim.step(disp)
        _, d = track_bearing(self.sim.robot, self.target)
        if not self.reached and d <= self.config.arrival_radius:
            self.reached = True
            self.sim.log("target-reached", frame=self.sim.frame)
        theta, _ = track_bearing(self.sim.robot, self.sim.robot + disp)
        cmd = ActuationCmd(
            azimuth=theta + math.pi / 2.0,
            tilt=math.pi / 2.0,
            amplitude=self.config.field_b0,
            omega=self.config.field_omega,
        )
        self.last_compute_ms = (time.perf_counter() - t0) * 1e3
        return disp, cmd
