"""Escape-training environment: global straight run, local policy phase.

Each episode spawns a fresh obstacle layout with the robot at the arena
center heading along a random compass direction.  While outside every safety
zone the environment moves the robot itself and flags the transition as
ignorable; once a zone is entered the supplied action drives the robot.
Collision and first full exit both end the episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..escape import apply_action, build_observation
from ..sim import SimConfig, spawn_dynamic_scene

EPISODE_CAP = 2_000  # frames, global phase included
REWARD_COLLISION = -50.0
REWARD_SUCCESS = 50.0
K_SHAPE = 1.0
STEP_COST = 0.05


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    ignore_transition: bool
    outcome: str  # "", "success", "collision", "timeout", "no-entry"


class EscapeEnv:
    def __init__(
        self,
        seed,
        n_dynamic=50,
        n_static=5,
        config: SimConfig = None,
        v_range=(4.0, 8.0),
    ):
        self.rng = np.random.default_rng(seed)
        self.config = config or SimConfig(n_directions=8)
        self.n_dynamic = n_dynamic
        self.n_static = n_static
        self.v_range = v_range
        self.v_cmax = v_range[1]
        self.center = np.array(self.config.bounds) / 2.0
        self.sim = None
        self.reset()

    def reset(self):
        self.sim = spawn_dynamic_scene(
            self.n_dynamic,
            self.n_static,
            seed=int(self.rng.integers(0, 2**63 - 1)),
            config=self.config,
            v_range=self.v_range,
            start=self.center,
            end=self.center,
        )
        self.sim.robot = self.center.copy()
        heading = int(self.rng.integers(0, 8))
        self.heading = apply_action(heading + 1, 1.0)  # unit compass vector
        self.entered = False
        self.frames = 0
        self.phi = self.sim.min_clearance()
        return self.observe()

    def observe(self):
        return build_observation(
            self.sim.robot,
            self.sim.centers,
            self.sim.velocities,
            np.arange(len(self.sim.centers)),
            self.config.bounds,
            self.v_cmax,
        )

    def in_zone(self):
        return self.phi < 0.0

    def _clamped(self, disp):
        w, h = self.config.bounds
        new = np.clip(self.sim.robot + disp, (0.0, 0.0), (w, h))
        return new - self.sim.robot

    def step(self, action) -> StepResult:
        """Advance one frame; `action` is ignored during the global phase."""
        phi_prev = self.phi
        if phi_prev < 0.0:
            disp = apply_action(int(action), self.config.robot_speed)
            active = True
        else:
            disp = self.config.robot_speed * self.heading
            active = False
        at_wall = bool(np.any(self._clamped(disp) != disp))
        self.sim.step(self._clamped(disp))
        self.frames += 1
        self.phi = self.sim.min_clearance()
        obs = self.observe()

        if self.sim.collided:
            # a global-phase collision cannot be attributed to an action
            return StepResult(obs, REWARD_COLLISION, True, not active, "collision")
        if active:
            self.entered = True
            if self.phi >= 0.0:
                return StepResult(obs, REWARD_SUCCESS, True, False, "success")
            if self.frames >= EPISODE_CAP:
                return StepResult(
                    obs,
                    K_SHAPE * (self.phi - phi_prev) - STEP_COST,
                    True,
                    False,
                    "timeout",
                )
            return StepResult(
                obs, K_SHAPE * (self.phi - phi_prev) - STEP_COST, False, False, ""
            )
        # global phase: no reward, transition not stored
        if self.phi < 0.0:
            self.entered = True
            return StepResult(obs, 0.0, False, True, "")
        if at_wall or self.frames >= EPISODE_CAP:
            return StepResult(obs, 0.0, True, True, "no-entry")
        return StepResult(obs, 0.0, False, True, "")


def shaping_reward(phi_t, phi_prev, collided=False, exited=False):
    """The per-step reward cases in one callable (used by tests and docs)."""
    if collided:
        return REWARD_COLLISION
    if exited:
        return REWARD_SUCCESS
    if phi_prev < 0.0:
        return K_SHAPE * (phi_t - phi_prev) - STEP_COST
    return 0.0
