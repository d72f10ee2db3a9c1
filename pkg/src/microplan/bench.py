"""Benchmark and scenario harness: seeded arenas, timing, CSV/JSON export.

The planner benchmark reproduces the six-arena protocol: 10..60 obstacles of
50 px physical radius (75 px zones) in a 2000x2000 px arena, ten runs per
planner per arena, wall-clock timing around the planner call only.
"""

from __future__ import annotations

import csv
import json
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .agp import plan_2d
from .baselines.pso import plan_pso
from .baselines.rrt import plan_rrt
from .baselines.wastar import plan_wastar
from .errors import PlanFailed
from .escape import PolicyController, RuleController
from .navigator import NavConfig, Navigator
from .scene import generate_arena
from .sim import SimConfig, spawn_dynamic_scene

ARENA_SIZES = (10, 20, 30, 40, 50, 60)
ARENA_SEED = 7  # all six benchmark arenas use this generation seed
ARENA_R_OBS = 50.0
START = (100.0, 100.0)
END = (1900.0, 1900.0)
PLANNERS = ("agp", "wastar", "rrt", "pso")


@dataclass(frozen=True)
class RunRecord:
    planner: str
    arena: int
    run: int
    seed: int
    feasible: bool
    length: float  # nan when infeasible
    time_s: float


def benchmark_arena(n_obstacles, seed=ARENA_SEED):
    return generate_arena(n_obstacles, ARENA_R_OBS, seed)


def _run_planner(planner, scene, seed):
    circles = scene.circles()
    t0 = time.perf_counter()
    try:
        if planner == "agp":
            length = plan_2d(scene, START, END).length
        elif planner == "wastar":
            length = plan_wastar(START, END, circles).cost_value * 10.0
        elif planner == "rrt":
            length = plan_rrt(START, END, circles, seed=seed).length
        elif planner == "pso":
            n_particles = 100 if len(circles) <= 30 else 200
            length = plan_pso(
                START, END, circles, seed=seed, n_particles=n_particles
            ).length
        else:
            raise ValueError(f"unknown planner '{planner}'")
    except PlanFailed:
        return False, float("nan"), time.perf_counter() - t0
    return True, length, time.perf_counter() - t0


def cmd_bench(planners=PLANNERS, arenas=ARENA_SIZES, runs=10, out_prefix=None):
    """Run the full grid; returns (records, summary dict)."""
    records = []
    for planner in planners:
        for n in arenas:
            scene = benchmark_arena(n)
            for run in range(runs):
                seed = 1000 * n + run
                feasible, length, dt = _run_planner(planner, scene, seed)
                records.append(
                    RunRecord(
                        planner=planner,
                        arena=n,
                        run=run,
                        seed=seed,
                        feasible=feasible,
                        length=length,
                        time_s=dt,
                    )
                )
    summary = summarize(records)
    if out_prefix:
        write_records(records, f"{out_prefix}.csv")
        with open(f"{out_prefix}.json", "w") as fh:
            json.dump(summary, fh, indent=1)
    return records, summary


def summarize(records):
    groups = {}
    for r in records:
        groups.setdefault((r.planner, r.arena), []).append(r)
    rows = []
    for (planner, arena), recs in sorted(groups.items()):
        lengths = [r.length for r in recs if r.feasible]
        times = [r.time_s for r in recs]
        rows.append(
            {
                "planner": planner,
                "arena": arena,
                "runs": len(recs),
                "feasible": len(lengths),
                "mean_length": statistics.mean(lengths) if lengths else None,
                "var_length": statistics.pvariance(lengths) if lengths else None,
                "mean_time_s": statistics.mean(times),
            }
        )
    return {
        "host": {
            "machine": platform.machine(),
            "python": platform.python_version(),
            "system": platform.system(),
        },
        "rows": rows,
    }


def write_records(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(asdict(records[0])))
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))


def read_records(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                RunRecord(
                    planner=row["planner"],
                    arena=int(row["arena"]),
                    run=int(row["run"]),
                    seed=int(row["seed"]),
                    feasible=row["feasible"] == "True",
                    length=float(row["length"]),
                    time_s=float(row["time_s"]),
                )
            )
    return out


# --- scenario runner ---------------------------------------------------------


@dataclass(frozen=True)
class ScenarioReport:
    scenario: str
    controller: str
    outcome: str  # reached | timeout
    frames: int
    collisions: int
    mean_compute_ms: float
    distance_series: tuple = ()


def make_controller(kind, sim, policy_net=None):
    cfg = sim.config
    if kind == "none":
        return None
    if kind == "rule":
        return RuleController(v_m=cfg.robot_speed, v_cmax=cfg.obstacle_speed_max)
    if kind == "rl":
        if policy_net is None:
            raise ValueError("controller 'rl' needs a loaded policy network")
        return PolicyController(
            net=policy_net,
            v_m=cfg.robot_speed,
            v_cmax=cfg.obstacle_speed_max,
            bounds=cfg.bounds,
        )
    raise ValueError(f"unknown controller '{kind}'")


def run_scenario(
    seed,
    controller="none",
    policy_net=None,
    use_global=True,
    frames_cap=1_000,
    n_dynamic=50,
    n_static=5,
    scenario_id="table1",
    keep_series=False,
):
    """One closed-loop episode on a seeded dynamic arena."""
    cfg = SimConfig(n_directions=16)
    sim = spawn_dynamic_scene(n_dynamic, n_static, seed=seed, config=cfg)
    sim.robot = np.array(START)
    nav = Navigator(
        sim=sim,
        target=np.array(END),
        config=NavConfig(controller=controller, use_global=use_global),
        controller=make_controller(controller, sim, policy_net),
    )
    compute = []
    series = []
    collisions = 0
    was_colliding = False
    for _ in range(frames_cap):
        nav.nav_step()
        compute.append(nav.last_compute_ms)
        if keep_series:
            series.append(float(np.hypot(*(sim.robot - END))))
        colliding = sim.collides()
        if colliding and not was_colliding:
            collisions += 1  # edge-triggered: one event per contact episode
        was_colliding = colliding
        sim.collided = False  # scenario runs treat collisions as events
        if nav.reached:
            break
    return ScenarioReport(
        scenario=scenario_id,
        controller=controller if use_global else f"{controller}-alone",
        outcome="reached" if nav.reached else "timeout",
        frames=sim.frame,
        collisions=collisions,
        mean_compute_ms=float(np.mean(compute)) if compute else 0.0,
        distance_series=tuple(series),
    )
