"""Live session server: one simulation per WebSocket connection.

Each connected client owns an independent seeded simulation stepped at a
fixed nominal rate.  Telemetry goes out every frame; commands come in at any
time, are queued, and take effect at the next frame boundary, acknowledged
with the frame of effect.  Message schemas live in docs/wire.md ("proto": 1).
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import math

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .bench import END, START, make_controller
from .errors import InvalidCommand
from .navigator import NavConfig, Navigator
from .sim import SimConfig, Simulation, simulation_from_scene, spawn_dynamic_scene

PROTO = 1
CONTROLLERS = ("none", "rule", "rl")


def _make_sim(scene, seed):
    if scene is not None:
        cfg = SimConfig(bounds=(scene.width, scene.height), n_directions=16)
        sim = simulation_from_scene(scene, config=cfg, robot=np.array(START))
        return sim
    cfg = SimConfig(n_directions=16)
    return spawn_dynamic_scene(50, 5, seed=seed, config=cfg)


class Session:
    """State owned by one connection: sim, navigator, pending commands."""

    def __init__(self, scene=None, seed=0, policy_net=None):
        self.scene = scene
        self.seed = seed
        self.policy_net = policy_net
        self.paused = False
        self.pending = []
        self._events_sent = 0
        self._build(seed)

    def _build(self, seed):
        self.seed = seed
        self.sim = _make_sim(self.scene, seed)
        self.controller_kind = "none"
        self.nav = Navigator(
            sim=self.sim,
            target=np.array(END, float),
            config=NavConfig(controller="none"),
        )
        self._events_sent = 0

    # --- command handling ----------------------------------------------------

    def _in_bounds(self, x, y):
        w, h = self.sim.config.bounds
        return 0.0 <= x <= w and 0.0 <= y <= h

    def apply(self, cmd):
        """Apply one queued command; returns the frame of effect.

        Raises InvalidCommand on any validation failure; the caller turns
        that into an error message without killing the session.
        """
        kind = cmd.get("kind")
        if kind == "set_target":
            x, y = float(cmd["x"]), float(cmd["y"])
            if not self._in_bounds(x, y):
                raise InvalidCommand(f"target ({x}, {y}) outside bounds")
            self.nav.target = np.array([x, y])
            self.nav.reached = False
            self.nav.plan = None
        elif kind == "add_via":
            x, y = float(cmd["x"]), float(cmd["y"])
            if not self._in_bounds(x, y):
                raise InvalidCommand(f"via ({x}, {y}) outside bounds")
            if self.sim.in_zone((x, y)):
                raise InvalidCommand(f"via ({x}, {y}) is inside a safety zone")
            self.nav.via.append(np.array([x, y]))
            self.nav.plan = None
        elif kind == "clear_via":
            self.nav.via.clear()
            self.nav.plan = None
        elif kind == "inflate_obstacle":
            index = int(cmd["obstacle"])
            delta = float(cmd["delta"])
            if delta < 0:
                raise InvalidCommand("inflation delta must be >= 0")
            if not 0 <= index < len(self.sim.radii):
                raise InvalidCommand(f"no obstacle at index {index}")
            self.sim.inflate_obstacle(index, float(self.sim.radii[index]) + delta)
            self.nav.plan = None
        elif kind == "switch_controller":
            choice = cmd["controller"]
            if choice not in CONTROLLERS:
                raise InvalidCommand(f"unknown controller '{choice}'")
            self.nav.controller = make_controller(
                choice, self.sim, self.policy_net
            )
            self.nav.config.controller = choice
            self.controller_kind = choice
        elif kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "reset":
            self._build(int(cmd.get("seed", self.seed)))
            self.paused = False
        else:
            raise InvalidCommand(f"unknown command kind '{kind}'")
        return self.sim.frame

    def drain(self):
        """Apply all pending commands; returns ack/error messages to send."""
        out = []
        for cmd in self.pending:
            msg_id = cmd.get("id")
            try:
                frame = self.apply(cmd)
                out.append(
                    {
                        "proto": PROTO,
                        "type": "ack",
                        "id": msg_id,
                        "kind": cmd.get("kind"),
                        "frame": frame,
                    }
                )
            except (InvalidCommand, KeyError, TypeError, ValueError) as exc:
                out.append(
                    {
                        "proto": PROTO,
                        "type": "error",
                        "id": msg_id,
                        "message": str(exc),
                    }
                )
        self.pending.clear()
        return out

    # --- outbound messages ---------------------------------------------------

    def snapshot(self):
        sim = self.sim
        return {
            "proto": PROTO,
            "type": "snapshot",
            "bounds": list(sim.config.bounds),
            "frame": sim.frame,
            "robot": sim.robot.tolist(),
            "robot_radius": sim.config.robot_radius,
            "target": self.nav.target.tolist(),
            "centers": sim.centers.tolist(),
            "radii": sim.radii.tolist(),
            "zone_radii": sim.zone_radii().tolist(),
            "velocities": sim.velocities.tolist(),
            "controller": self.controller_kind,
            "mode": self.nav.mode,
        }

    def telemetry(self):
        sim = self.sim
        events = [
            {"frame": e.frame, "kind": e.kind, "payload": e.payload}
            for e in sim.events[self._events_sent :]
        ]
        self._events_sent = len(sim.events)
        plan = self.nav.plan
        return {
            "proto": PROTO,
            "type": "telemetry",
            "frame": sim.frame,
            "robot": sim.robot.tolist(),
            "mode": self.nav.mode,
            "reached": self.nav.reached,
            "centers": sim.centers.tolist(),
            "velocities": sim.velocities.tolist(),
            "zone_radii": sim.zone_radii().tolist(),
            "plan": [] if plan is None else np.asarray(plan).tolist(),
            "events": events,
        }

    def step(self):
        self.nav.nav_step()
        self.sim.collided = False  # collisions are events, not terminal


def build_app(scene=None, seed=0, fps=25.0, policy_net=None):
    """FastAPI app with the /ws session endpoint."""
    if fps <= 0 or not math.isfinite(fps):
        raise ValueError("fps must be positive and finite")
    app = FastAPI()
    period = 1.0 / fps

    @app.get("/healthz")
    async def healthz():
        return {"ok": True}

    @app.websocket("/ws")
    async def ws_session(ws: WebSocket):
        await ws.accept()
        session = Session(scene=scene, seed=seed, policy_net=policy_net)
        await ws.send_text(json.dumps(session.snapshot()))
        inbox: asyncio.Queue = asyncio.Queue()

        async def reader():
            try:
                while True:
                    raw = await ws.receive_text()
                    await inbox.put(raw)
            except WebSocketDisconnect:
                await inbox.put(None)

        task = asyncio.create_task(reader())
        try:
            alive = True
            while alive:
                while not inbox.empty():
                    raw = inbox.get_nowait()
                    if raw is None:
                        alive = False
                        break
                    try:
                        cmd = json.loads(raw)
                        if not isinstance(cmd, dict):
                            raise ValueError("command must be a JSON object")
                    except ValueError as exc:
                        await ws.send_text(
                            json.dumps(
                                {
                                    "proto": PROTO,
                                    "type": "error",
                                    "id": None,
                                    "message": f"malformed command: {exc}",
                                }
                            )
                        )
                        continue
                    session.pending.append(cmd)
                if not alive:
                    break
                for msg in session.drain():
                    await ws.send_text(json.dumps(msg))
                if not session.paused:
                    session.step()
                    await ws.send_text(json.dumps(session.telemetry()))
                await asyncio.sleep(period)
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    return app
