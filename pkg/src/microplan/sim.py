"""Frame-stepped dynamic obstacle simulation.

Obstacles advance by their per-frame velocity, reflect off the walls, and
exchange normal velocity components on mutual overlap (equal-mass elastic,
with positional de-penetration).  After every resolution pass each velocity is
rescaled to the obstacle's original speed, so per-obstacle speed is conserved
for the lifetime of the run.  The robot moves by an externally supplied
displacement; collisions are flagged, not resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCommand
from .scene import Scene, discretize_boundary

FRAME_DT = 0.04  # seconds per frame at the nominal 25 fps


@dataclass
class SimConfig:
    bounds: tuple = (2000.0, 2000.0)
    robot_radius: float = 25.0
    robot_speed: float = 10.0  # v_m, px per frame
    obstacle_speed_max: float = 8.0
    zone_margin: float = None  # defaults to robot_speed + obstacle_speed_max
    n_directions: int = 8  # 8 for training, 16 for the demo arena
    dt: float = FRAME_DT

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("frame period must be > 0")
        if self.robot_speed <= 0 or self.obstacle_speed_max <= 0:
            raise ValueError("speeds must be > 0")
        if self.zone_margin is None:
            self.zone_margin = self.robot_speed + self.obstacle_speed_max


@dataclass(frozen=True)
class Event:
    frame: int
    kind: str  # zone-enter, zone-exit, collision, target-reached, replan, mode-switch
    payload: dict


@dataclass
class Simulation:
    """Obstacle dynamics plus robot bookkeeping for one run."""

    centers: np.ndarray  # (N, 2)
    radii: np.ndarray  # (N,) physical radii
    velocities: np.ndarray  # (N, 2) px per frame
    config: SimConfig = field(default_factory=SimConfig)
    robot: np.ndarray = None
    robot_dir: np.ndarray = None
    targets: list = field(default_factory=list)
    target_velocities: list = field(default_factory=list)
    frame: int = 0
    collided: bool = False
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, float).reshape(-1, 2).copy()
        self.radii = np.asarray(self.radii, float).reshape(-1).copy()
        self.velocities = np.asarray(self.velocities, float).reshape(-1, 2).copy()
        if not (len(self.centers) == len(self.radii) == len(self.velocities)):
            raise ValueError("centers, radii, velocities must have equal length")
        self._speeds = np.hypot(self.velocities[:, 0], self.velocities[:, 1])
        self.robot = (
            np.zeros(2) if self.robot is None else np.asarray(self.robot, float)
        )
        self.robot_dir = (
            np.array([1.0, 0.0])
            if self.robot_dir is None
            else np.asarray(self.robot_dir, float)
        )
        self.targets = [np.asarray(t, float) for t in self.targets]
        self.target_velocities = [np.asarray(v, float) for v in self.target_velocities]

    # --- derived geometry ----------------------------------------------------

    def zone_radii(self):
        """Simulation safety radii: physical + robot + reaction margin."""
        cfg = self.config
        return self.radii + cfg.robot_radius + cfg.zone_margin

    def zones(self):
        """(N, 3) circles (cx, cy, zone_radius)."""
        return np.column_stack([self.centers, self.zone_radii()])

    def min_clearance(self, p=None):
        """Signed distance from the robot (or p) to the nearest zone edge."""
        if len(self.centers) == 0:
            return math.inf
        p = self.robot if p is None else np.asarray(p, float)
        d = np.hypot(*(self.centers - p).T)
        return float(np.min(d - self.zone_radii()))

    def in_zone(self, p=None):
        return self.min_clearance(p) < 0.0

    def collides(self, p=None):
        """True when a robot at p overlaps any physical obstacle."""
        if len(self.centers) == 0:
            return False
        p = self.robot if p is None else np.asarray(p, float)
        d = np.hypot(*(self.centers - p).T)
        return bool(np.any(d < self.radii + self.config.robot_radius))

    def log(self, kind, **payload):
        self.events.append(Event(frame=self.frame, kind=kind, payload=payload))

    # --- dynamics ------------------------------------------------------------

    def step(self, robot_displacement=(0.0, 0.0)):
        """Advance one frame; the robot moves by the given displacement."""
        disp = np.asarray(robot_displacement, float)
        if float(np.hypot(*disp)) > self.config.robot_speed + 1e-9:
            raise InvalidCommand(
                f"displacement {disp.tolist()} exceeds speed limit "
                f"{self.config.robot_speed}"
            )
        c = self.centers
        v = self.velocities
        r = self.radii
        w, h = self.config.bounds
        c += v

        # wall reflection: flip the offending component, mirror the overshoot
        for axis, limit in ((0, w), (1, h)):
            low = c[:, axis] < r
            c[low, axis] = 2.0 * r[low] - c[low, axis]
            v[low, axis] = -v[low, axis]
            high = c[:, axis] > limit - r
            c[high, axis] = 2.0 * (limit - r[high]) - c[high, axis]
            v[high, axis] = -v[high, axis]

        # pairwise overlap: swap normal components, then de-penetrate
        n = len(c)
        if n > 1:
            d = c[:, None, :] - c[None, :, :]
            dist = np.hypot(d[..., 0], d[..., 1])
            rsum = r[:, None] + r[None, :]
            hit = np.triu(dist < rsum, k=1)
            for i, j in zip(*np.nonzero(hit)):
                delta = c[i] - c[j]
                dd = float(np.hypot(*delta))
                nrm = delta / dd if dd > 1e-12 else np.array([1.0, 0.0])
                vi_n = float(v[i] @ nrm)
                vj_n = float(v[j] @ nrm)
                v[i] += (vj_n - vi_n) * nrm
                v[j] += (vi_n - vj_n) * nrm
                push = 0.5 * (rsum[i, j] - dd) + 1e-9
                c[i] += push * nrm
                c[j] -= push * nrm

        # restore per-obstacle speed (bounces redirect, never slow down)
        spd = np.hypot(v[:, 0], v[:, 1])
        moving = spd > 1e-12
        v[moving] *= (self._speeds[moving] / spd[moving])[:, None]

        for t, tv in zip(self.targets, self.target_velocities):
            t += tv

        self.robot = self.robot + disp
        mag = float(np.hypot(*disp))
        if mag > 1e-12:
            self.robot_dir = disp / mag
        self.frame += 1
        if self.collides():
            self.collided = True
            self.log("collision", robot=self.robot.tolist())

    # --- in-place edits (service commands) -----------------------------------

    def inflate_obstacle(self, index, new_radius):
        if not (0 <= index < len(self.radii)):
            raise InvalidCommand(f"no obstacle at index {index}")
        if new_radius <= 0:
            raise InvalidCommand("radius must be > 0")
        self.radii[index] = float(new_radius)

    def snapshot(self):
        return {
            "frame": self.frame,
            "robot": self.robot.tolist(),
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
            "velocities": self.velocities.tolist(),
            "collided": self.collided,
        }


def spawn_dynamic_scene(
    n_dynamic,
    n_static,
    seed,
    config: SimConfig = None,
    r_range=(25.0, 50.0),
    v_range=(4.0, 8.0),
    start=(100.0, 100.0),
    end=(1900.0, 1900.0),
):
    """Seeded mixed static/dynamic arena with start and end kept clear."""
    cfg = config or SimConfig()
    rng = np.random.default_rng(seed)
    w, h = cfg.bounds
    start = np.asarray(start, float)
    end = np.asarray(end, float)
    n = n_dynamic + n_static
    centers = np.empty((n, 2))
    radii = np.empty(n)
    placed = 0
    while placed < n:
        r = rng.uniform(*r_range)
        c = rng.uniform((r, r), (w - r, h - r))
        zone = r + cfg.robot_radius + cfg.zone_margin
        if (
            np.hypot(*(c - start)) > zone + cfg.robot_radius
            and np.hypot(*(c - end)) > zone + cfg.robot_radius
        ):
            centers[placed] = c
            radii[placed] = r
            placed += 1
    vel = np.zeros((n, 2))
    if n_dynamic:
        speed = rng.uniform(*v_range, size=n_dynamic)
        # headings quantized to the configured compass set
        k = rng.integers(0, cfg.n_directions, size=n_dynamic)
        theta = 2.0 * math.pi * k / cfg.n_directions
        vel[:n_dynamic, 0] = speed * np.cos(theta)
        vel[:n_dynamic, 1] = speed * np.sin(theta)
    return Simulation(
        centers=centers, radii=radii, velocities=vel, config=cfg, robot=start
    )


def net_velocity(frequency, robot_radius, alpha_c, u_flow):
    """Propulsion minus ambient flow: V_net = alpha_c * 2*pi*R*f - u_flow."""
    if frequency < 0:
        raise ValueError("frequency must be >= 0")
    if not 0.0 < alpha_c <= 1.0:
        raise ValueError("alpha_c must be in (0, 1]")
    return alpha_c * 2.0 * math.pi * robot_radius * frequency - u_flow


def load_phantom(path, g=30.0, robot_radius=25.0):
    """Scene file -> scene whose boundary polylines become boundary cells."""
    from dataclasses import replace

    from .scene import sample_polyline, scene_load

    scene = scene_load(path)
    if not scene.boundaries:
        return scene
    next_id = 1 + max((o.id for o in scene.obstacles), default=-1)
    cells = []
    for poly in scene.boundaries:
        dense = sample_polyline(poly, step=g / 2.0)
        new = discretize_boundary(dense, g=g, R=robot_radius, start_id=next_id)
        cells.extend(new)
        next_id += len(new)
    return replace(scene, obstacles=scene.obstacles + tuple(cells))


def simulation_from_scene(scene: Scene, config: SimConfig = None, robot=None):
    """Wrap a scene's obstacles into a simulation (static ones get v = 0)."""
    cfg = config or SimConfig()
    centers = np.array([[o.cx, o.cy] for o in scene.obstacles]).reshape(-1, 2)
    radii = np.array([o.physical_radius for o in scene.obstacles])
    vel = np.array([[o.vx, o.vy] for o in scene.obstacles]).reshape(-1, 2)
    targets = [np.array([t.x, t.y]) for t in scene.targets]
    tvel = [np.array([t.vx, t.vy]) for t in scene.targets]
    return Simulation(
        centers=centers,
        radii=radii,
        velocities=vel,
        config=cfg,
        robot=robot,
        targets=targets,
        target_velocities=tvel,
    )
