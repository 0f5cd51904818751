"""Live teleoperation server: the human command is the nominal control, the
CBF-QP filters it at the configured rate, and the simulation state streams
to clients as newline-delimited JSON over WebSocket text frames.

Wire protocol
  client -> server: {"type":"cmd","u":[..]}, {"type":"reset","seed":int},
                    {"type":"pause"}
  server -> client: {"type":"state","t":s,"x":[..],"h":f,"u_nom":[..],
                     "u_star":[..],"infeasible":bool}
                    {"type":"grid","resolution":f,"origin":[..],
                     "rows":["0101..",..]}   (only on observation updates)
                    {"type":"event","kind":"collision|goal|obs_update",
                     "margin":f}

With no client connected the simulation is paused; a cmd resumes it, pause
pauses it, collision/goal freeze it until reset.
"""

from __future__ import annotations

import asyncio
import json
import math
from dataclasses import dataclass

import numpy as np

from ..grids import euclidean_sdf
from ..sim.batch import solve_world_value
from ..sim.environment import (
    Disc,
    Environment,
    Rect,
    generate_forest,
    render_local_costmap,
    warehouse_environment,
)
from ..sim.episode import (
    EcbfMethod,
    NeuralMethod,
    OracleMethod,
    SUCCESS_RADIUS,
    UnfilteredMethod,
    initial_state,
)
from ..sim.presets import Preset, get_preset


def teleop_environment(kind: str, seed: int) -> Environment:
    if kind == "empty":
        return Environment(bound=3.5, discs=(), rects=(), start=(-2.8, 0.0),
                           goal=(2.8, 0.0), seed=seed)
    if kind == "wall":
        # short enough that the Dubins car can swing around its ends
        return Environment(bound=3.5, discs=(),
                           rects=(Rect((1.6, 0.0), (0.15, 1.2)),),
                           start=(-2.8, 0.0), goal=(3.2, 0.0), seed=seed)
    if kind == "forest":
        return generate_forest(seed, start=(-2.4, -2.4), goal=(2.4, 2.4))
    if kind == "warehouse":
        return warehouse_environment(seed)
    raise ValueError(f"unknown teleop environment '{kind}'")


def build_method(method_name: str, preset: Preset, env: Environment,
                 model_path: str | None):
    if method_name == "oracle":
        value, sdf = solve_world_value(env, preset)
        return OracleMethod(value, world_sdf=sdf)
    if method_name in ("orn", "on"):
        from ..neural.hypernet import load_hypernet
        if not model_path:
            raise ValueError(f"teleop method '{method_name}' needs a model path")
        net, model_name = load_hypernet(model_path)
        if model_name != preset.model_name:
            raise ValueError(f"model is for '{model_name}'")
        return NeuralMethod(net, method_name)
    if method_name == "ecbf":
        return EcbfMethod()
    if method_name == "unfiltered":
        return UnfilteredMethod()
    raise ValueError(f"unknown method '{method_name}'")


@dataclass
class StepEvents:
    obs_margin: float | None = None
    grid: object = None            # OccupancyGrid on observation updates
    collision: bool = False
    goal: bool = False


class TeleopSim:
    """Incremental multi-rate closed loop driven by an external nominal."""

    def __init__(self, preset: Preset, env: Environment, method):
        self.preset = preset
        self.env = env
        self.method = method
        self.model = preset.model
        self.rates = preset.rates
        self.x = initial_state(self.model, env)
        self.k = 0
        self.u_nom = np.zeros(self.model.m)
        self.u_star = np.zeros(self.model.m)
        self.h = math.nan
        self.infeasible = False
        self.done = False
        self._obs_steps = self.rates.steps(self.rates.obs_hz)
        self._filt_steps = self.rates.steps(self.rates.filter_hz)

    @property
    def t(self) -> float:
        return self.k * self.rates.physics_dt

    def set_command(self, u) -> None:
        self.u_nom = self.model.clamp_control(np.asarray(u, dtype=np.float64))

    def step(self, n_steps: int) -> list[StepEvents]:
        from ..dynamics import rk4_step

        events: list[StepEvents] = []
        for _ in range(n_steps):
            if self.done:
                break
            ev = StepEvents()
            if self.k % self._obs_steps == 0:
                center = np.clip(self.x[:2], -self.env.bound, self.env.bound)
                costmap = render_local_costmap(self.env, center, self.preset.obs)
                if self.method.needs_costmap:
                    self.method.recondition(
                        euclidean_sdf(costmap, cap=self.preset.obs.cap), center)
                ev.grid = costmap
                ev.obs_margin = float(self.method.evaluate(self.model, self.x).h)
            if self.k % self._filt_steps == 0:
                res, evaluation = self.method.filter_control(
                    self.model, self.x, self.u_nom, self.preset.qp_gain)
                self.u_star = res.u
                self.h = float(evaluation.h)
                self.infeasible = not res.feasible
            self.x = rk4_step(self.model, self.x, self.u_star,
                              self.rates.physics_dt)
            self.k += 1
            if self.env.collides(self.x[:2]):
                ev.collision = True
                self.done = True
            elif np.hypot(self.x[0] - self.env.goal[0],
                          self.x[1] - self.env.goal[1]) <= SUCCESS_RADIUS:
                ev.goal = True
                self.done = True
            if ev.grid is not None or ev.collision or ev.goal:
                events.append(ev)
        return events

    def state_message(self) -> dict:
        return {
            "type": "state",
            "t": round(self.t, 6),
            "x": [round(float(v), 6) for v in self.x],
            "h": None if math.isnan(self.h) else round(self.h, 6),
            "u_nom": [round(float(v), 6) for v in self.u_nom],
            "u_star": [round(float(v), 6) for v in self.u_star],
            "infeasible": self.infeasible,
        }


def grid_message(costmap) -> dict:
    rows = ["".join("1" if c else "0" for c in row) for row in costmap.cells]
    return {
        "type": "grid",
        "resolution": costmap.resolution,
        "origin": [costmap.origin[0], costmap.origin[1]],
        "rows": rows,
    }


class TeleopServer:
    def __init__(self, cfg: dict, log=print):
        self.cfg = cfg
        self.log = log
        self.preset = get_preset(cfg["preset"])
        t = cfg["teleop"]
        self.host, self.port = t["host"], int(t["port"])
        self.stream_hz = float(t["stream_hz"])
        self.time_scale = float(t["time_scale"])
        self.method_name = t["method"]
        self.model_path = t["model_path"]
        self.env_kind = t["env_kind"]
        self.clients: set = set()
        self.paused = True
        self.sim = self._make_sim(int(t["env_seed"]))

    def _make_sim(self, seed: int) -> TeleopSim:
        env = teleop_environment(self.env_kind, seed)
        method = build_method(self.method_name, self.preset, env, self.model_path)
        self.log(f"world ready (env={self.env_kind} seed={seed} "
                 f"method={self.method_name})")
        return TeleopSim(self.preset, env, method)

    async def _broadcast(self, message: dict) -> None:
        if not self.clients:
            return
        data = json.dumps(message) + "\n"
        await asyncio.gather(*(c.send(data) for c in list(self.clients)),
                             return_exceptions=True)

    async def _handle_client(self, ws) -> None:
        self.clients.add(ws)
        self.log(f"client connected ({len(self.clients)} total)")
        try:
            async for raw in ws:
                for line in str(raw).splitlines():
                    if line.strip():
                        await self._handle_message(json.loads(line))
        except Exception:
            pass
        finally:
            self.clients.discard(ws)
            if not self.clients:
                self.paused = True
            self.log(f"client disconnected ({len(self.clients)} total)")

    async def _handle_message(self, msg: dict) -> None:
        kind = msg.get("type")
        if kind == "cmd":
            self.sim.set_command(msg["u"])
            if not self.sim.done:
                self.paused = False
        elif kind == "pause":
            self.paused = True
        elif kind == "reset":
            seed = int(msg.get("seed", 0))
            self.paused = True
            self.sim = self._make_sim(seed)
            await self._broadcast(self.sim.state_message())
        else:
            self.log(f"ignoring unknown message type {kind!r}")

    async def _stream_loop(self) -> None:
        frame = 1.0 / self.stream_hz
        steps_per_frame = max(1, round(
            self.time_scale * frame / self.preset.rates.physics_dt))
        while True:
            t0 = asyncio.get_event_loop().time()
            if self.clients and not self.paused and not self.sim.done:
                events = self.sim.step(steps_per_frame)
                for ev in events:
                    if ev.grid is not None:
                        await self._broadcast(grid_message(ev.grid))
                        await self._broadcast({"type": "event", "kind": "obs_update",
                                               "margin": round(ev.obs_margin, 6)})
                    if ev.collision:
                        await self._broadcast({"type": "event", "kind": "collision",
                                               "margin": round(self.sim.h, 6)
                                               if not math.isnan(self.sim.h) else None})
                        self.paused = True
                    if ev.goal:
                        await self._broadcast({"type": "event", "kind": "goal",
                                               "margin": round(self.sim.h, 6)
                                               if not math.isnan(self.sim.h) else None})
                        self.paused = True
                await self._broadcast(self.sim.state_message())
            elif self.clients:
                await self._broadcast(self.sim.state_message())
            dt = asyncio.get_event_loop().time() - t0
            await asyncio.sleep(max(0.0, frame - dt))

    async def serve_forever(self) -> None:
        import websockets

        async with websockets.serve(self._handle_client, self.host, self.port):
            self.log(f"teleop server listening on ws://{self.host}:{self.port}")
            await self._stream_loop()


def cmd_teleop(cfg: dict, log=print) -> None:
    server = TeleopServer(cfg, log=log)
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        log("teleop server stopped")
