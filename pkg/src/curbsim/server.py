"""Session service: bridges live human input from web clients to the ticking
world and broadcasts per-frame state; persists scene + replay on session end.

One asyncio ticker task owns each session's world. Connection handlers only
append to per-role input buffers and read broadcast queues; the ticker
consumes the latest input per role per frame (earlier messages are dropped
and counted) and emits exactly one state message per frame.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .agents import InputMessage, live_walk_command, manual_vehicle_command
from .core import AgentKind
from .recorder import SceneTooShortError, write_replay, write_scene
from .runner import Simulation, materialize, replay_filename, scene_filename
from .scenarios import ScenarioSpec, builtin_scenarios

ROLE_PEDESTRIAN = "pedestrian"
ROLE_VEHICLE = "vehicle"
ROLE_OBSERVER = "observer"
BACKLOG_LIMIT = 64


def required_roles(spec: ScenarioSpec) -> list[str]:
    roles = []
    for a in spec.agents:
        if a.binding.controller == "live":
            roles.append(a.binding.role)
        elif a.binding.controller == "manual_vehicle":
            roles.append(a.binding.role)
    return roles


def parse_input_message(obj, role: str) -> InputMessage | None:
    """Validate one wire input object for a role; None when malformed."""
    if not isinstance(obj, dict) or obj.get("type") != "input":
        return None
    if obj.get("role") not in (None, role):
        return None   # message claims a role this connection does not own
    seq = obj.get("seq")
    if not isinstance(seq, int):
        return None
    t_ms = obj.get("client_time_ms", 0)
    if not isinstance(t_ms, (int, float)) or not math.isfinite(t_ms):
        return None
    if role == ROLE_PEDESTRIAN:
        move = obj.get("move", [0.0, 0.0])
        if not (isinstance(move, list) and len(move) == 2
                and all(isinstance(v, (int, float)) and math.isfinite(v) for v in move)):
            return None
        yaw = obj.get("yaw")
        if yaw is not None and not (isinstance(yaw, (int, float)) and math.isfinite(yaw)):
            return None
        return InputMessage(seq=seq, client_time_ms=float(t_ms), role=role,
                            move=(float(move[0]), float(move[1])),
                            yaw=float(yaw) if yaw is not None else None)
    if role == ROLE_VEHICLE:
        throttle = obj.get("throttle", 0.0)
        steer = obj.get("steer", 0.0)
        for v in (throttle, steer):
            if not isinstance(v, (int, float)) or not math.isfinite(v) or abs(v) > 1.0:
                return None
        return InputMessage(seq=seq, client_time_ms=float(t_ms), role=role,
                            throttle=float(throttle), steer=float(steer))
    return None


def state_message(snapshot, session_state: str) -> str:
    agents = [{
        "id": a.id,
        "kind": a.kind.value,
        "x": a.pose.position[0],
        "y": a.pose.position[1],
        "yaw": a.pose.yaw,
        "vx": a.velocity[0],
        "vy": a.velocity[1],
        "shape": [a.shape.length, a.shape.width],
    } for a in snapshot.agents]
    return json.dumps({"type": "state", "frame": snapshot.frame,
                       "sim_time": snapshot.sim_time, "session": session_state,
                       "agents": agents}, separators=(",", ":"))


class Connection:
    _ids = itertools.count()

    def __init__(self, role: str, websocket: WebSocket):
        self.id = next(Connection._ids)
        self.role = role
        self.websocket = websocket
        self.outbox: asyncio.Queue[str] = asyncio.Queue(maxsize=BACKLOG_LIMIT)
        self.last_seq = -1
        self.dead = False

    def push(self, text: str) -> None:
        """Queue a message; a full backlog marks the consumer dead."""
        if self.dead:
            return
        try:
            self.outbox.put_nowait(text)
        except asyncio.QueueFull:
            self.dead = True


@dataclass
class Session:
    id: str
    spec: ScenarioSpec
    seed: int
    sim: Simulation
    out_dir: Path
    pace: bool = True
    time_scale: float = 1.0
    state: str = "lobby"
    connections: list[Connection] = field(default_factory=list)
    inputs: dict[str, list[InputMessage]] = field(default_factory=dict)
    dropped_inputs: int = 0
    malformed_inputs: int = 0
    ticker: asyncio.Task | None = None
    finish_reason: str | None = None
    scene_path: Path | None = None
    replay_path: Path | None = None
    scene_error: str | None = None

    @property
    def roles_required(self) -> list[str]:
        return required_roles(self.spec)

    @property
    def roles_connected(self) -> list[str]:
        return [c.role for c in self.connections if c.role != ROLE_OBSERVER and not c.dead]

    def role_taken(self, role: str) -> bool:
        return any(c.role == role and not c.dead for c in self.connections)

    def ready(self) -> bool:
        connected = set(self.roles_connected)
        return all(r in connected for r in self.roles_required)

    def ingest(self, conn: Connection, obj) -> bool:
        """Append a validated input to its role buffer. Returns False on drop."""
        if self.state != "running":
            return False
        msg = parse_input_message(obj, conn.role)
        if msg is None:
            self.malformed_inputs += 1
            return False
        if msg.seq <= conn.last_seq:
            self.dropped_inputs += 1
            return False
        conn.last_seq = msg.seq
        self.inputs.setdefault(conn.role, []).append(msg)
        return True

    def _apply_inputs(self) -> None:
        """Latest message per role wins; earlier ones are dropped and counted."""
        for role, buffered in self.inputs.items():
            if not buffered:
                continue
            msg = buffered[-1]
            self.dropped_inputs += len(buffered) - 1
            buffered.clear()
            ctl = self.sim.external.get(role)
            if ctl is None:
                continue
            agent = self.sim.world.agent(ctl.agent_id)
            if agent.kind is AgentKind.PEDESTRIAN:
                ctl.put(live_walk_command(msg, agent.pose, self.sim.params.limits))
            else:
                ctl.put(manual_vehicle_command(msg, self.sim.params.limits))

    def broadcast(self, text: str) -> None:
        for conn in self.connections:
            conn.push(text)

    def broadcast_event(self, event: str, **fields) -> None:
        payload = {"type": "event", "event": event}
        payload.update(fields)
        self.broadcast(json.dumps(payload, separators=(",", ":")))

    async def run_ticker(self) -> None:
        loop = asyncio.get_running_loop()
        interval = self.sim.world.dt / self.time_scale
        deadline = loop.time()
        while self.state == "running" and not self.sim.world.terminated:
            self._apply_inputs()
            snapshot = self.sim.tick()
            self.broadcast(state_message(snapshot, self.state))
            if self.pace:
                deadline += interval
                delay = deadline - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
            else:
                await asyncio.sleep(0)
        if self.state == "running":
            self.finish(self.sim.world.termination_reason or "timeout")

    def start(self) -> None:
        if self.state != "lobby":
            raise ValueError(f"session {self.id} is {self.state}, not lobby")
        if not self.ready():
            missing = set(self.roles_required) - set(self.roles_connected)
            raise ValueError(f"roles not connected: {sorted(missing)}")
        self.state = "running"
        self.broadcast_event("start", scenario=self.spec.id, seed=self.seed)
        self.ticker = asyncio.get_running_loop().create_task(self.run_ticker())

    def finish(self, reason: str) -> tuple[Path | None, Path]:
        """Persist replay (always) and scene (when >= 10 s). Idempotent."""
        if self.state == "finished":
            return self.scene_path, self.replay_path
        self.state = "finished"
        self.finish_reason = reason
        self.out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"{self.spec.id}_seed{self.seed}_{self.id}"
        self.replay_path = self.out_dir / f"{stem}.replay.jsonl"
        self.replay_path.write_text(write_replay(self.sim.replay_log),
                                    encoding="utf-8", newline="\n")
        try:
            scene = self.sim.finalize()
            self.scene_path = self.out_dir / f"{stem}.scene.jsonl"
            self.scene_path.write_text(write_scene(scene), encoding="utf-8", newline="\n")
        except SceneTooShortError as e:
            self.scene_error = str(e)
        self.broadcast_event(
            "finish", reason=reason,
            scene=self.scene_path.name if self.scene_path else None,
            replay=self.replay_path.name,
            invalid_scene=self.scene_error)
        return self.scene_path, self.replay_path


class SessionManager:
    def __init__(self, out_dir: Path, pace: bool = True, time_scale: float = 1.0,
                 extra_scenarios: dict[str, ScenarioSpec] | None = None):
        self.out_dir = Path(out_dir)
        self.pace = pace
        self.time_scale = time_scale
        self.sessions: dict[str, Session] = {}
        self._counter = itertools.count(1)
        self.scenarios: dict[str, ScenarioSpec] = {s.id: s for s in builtin_scenarios()}
        if extra_scenarios:
            self.scenarios.update(extra_scenarios)

    def create(self, scenario_id: str, seed: int = 0) -> Session:
        spec = self.scenarios.get(scenario_id)
        if spec is None:
            raise KeyError(f"unknown scenario {scenario_id!r}")
        roles = set(required_roles(spec))
        sim = materialize(spec, seed, live_roles=roles)
        session = Session(id=f"s{next(self._counter):04d}", spec=spec, seed=seed,
                          sim=sim, out_dir=self.out_dir, pace=self.pace,
                          time_scale=self.time_scale)
        self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(f"unknown session {session_id!r}")
        return session


def create_app(out_dir: Path | str = "scenes", pace: bool = True,
               time_scale: float = 1.0, static_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="curbsim session service")
    manager = SessionManager(Path(out_dir), pace=pace, time_scale=time_scale)
    app.state.manager = manager

    @app.get("/scenarios")
    def list_scenarios():
        return [{"id": spec.id, "roles": required_roles(spec),
                 "timeout_s": spec.termination.timeout_s}
                for spec in manager.scenarios.values()]

    @app.post("/sessions")
    async def create_session(body: dict):
        scenario = body.get("scenario")
        seed = body.get("seed", 0)
        if not isinstance(scenario, str) or not isinstance(seed, int):
            raise HTTPException(400, "body needs {scenario: str, seed?: int}")
        try:
            session = manager.create(scenario, seed)
        except KeyError as e:
            raise HTTPException(404, str(e)) from e
        return {"session_id": session.id,
                "ws_url": f"/ws/{session.id}",
                "roles": session.roles_required}

    @app.post("/sessions/{session_id}/start")
    async def start_session(session_id: str):
        try:
            session = manager.get(session_id)
            session.start()
        except KeyError as e:
            raise HTTPException(404, str(e)) from e
        except ValueError as e:
            raise HTTPException(409, str(e)) from e
        return {"status": session.state}

    @app.post("/sessions/{session_id}/stop")
    async def stop_session(session_id: str):
        try:
            session = manager.get(session_id)
        except KeyError as e:
            raise HTTPException(404, str(e)) from e
        if session.state == "lobby":
            raise HTTPException(409, "session not running")
        scene_path, replay_path = session.finish("operator-stop")
        if session.ticker:
            session.ticker.cancel()
        return {"status": session.state, "reason": session.finish_reason,
                "scene": scene_path.name if scene_path else None,
                "replay": replay_path.name,
                "invalid_scene": session.scene_error}

    @app.get("/sessions/{session_id}")
    async def session_info(session_id: str):
        try:
            session = manager.get(session_id)
        except KeyError as e:
            raise HTTPException(404, str(e)) from e
        return {"session_id": session.id, "state": session.state,
                "scenario": session.spec.id, "seed": session.seed,
                "frame": session.sim.world.frame,
                "reason": session.finish_reason,
                "roles_required": session.roles_required,
                "roles_connected": session.roles_connected,
                "dropped_inputs": session.dropped_inputs,
                "malformed_inputs": session.malformed_inputs,
                "scene": session.scene_path.name if session.scene_path else None,
                "replay": session.replay_path.name if session.replay_path else None}

    @app.get("/sessions/{session_id}/map")
    async def session_map(session_id: str):
        try:
            session = manager.get(session_id)
        except KeyError as e:
            raise HTTPException(404, str(e)) from e
        m = session.spec.map
        poly = lambda polys: [[[x, y] for x, y in p] for p in polys]
        return {"bounds": list(m.bounds),
                "sidewalks": poly(m.sidewalks),
                "drivable": poly(m.drivable_area),
                "crosswalks": poly(m.crosswalks),
                "parking": poly(r.corners() for r in m.parking_spots),
                "lanes": [{"centerline": [[x, y] for x, y in l.centerline],
                           "width": l.width} for l in m.lanes],
                "goal_region": [[x, y] for x, y in session.spec.goal_region]
                if session.spec.goal_region else None}

    @app.get("/scenes")
    def list_scenes():
        if not manager.out_dir.exists():
            return []
        return sorted(p.name for p in manager.out_dir.glob("*.jsonl"))

    @app.get("/scenes/{name}")
    def get_scene(name: str):
        path = manager.out_dir / name
        if path.name != name or not path.is_file():
            raise HTTPException(404, f"no recorded file {name!r}")
        return PlainTextResponse(path.read_text(encoding="utf-8"))

    @app.websocket("/ws/{session_id}")
    async def websocket_endpoint(websocket: WebSocket, session_id: str,
                                 role: str = ROLE_OBSERVER):
        try:
            session = manager.get(session_id)
        except KeyError:
            await websocket.close(code=4404)
            return
        if role not in (ROLE_PEDESTRIAN, ROLE_VEHICLE, ROLE_OBSERVER):
            await websocket.close(code=4400)
            return
        if role != ROLE_OBSERVER:
            if role not in session.roles_required or session.role_taken(role):
                await websocket.close(code=4409)
                return
        await websocket.accept()
        conn = Connection(role, websocket)
        session.connections.append(conn)
        session.broadcast_event("lobby", roles_required=session.roles_required,
                                roles_connected=session.roles_connected + (
                                    [role] if role != ROLE_OBSERVER else []),
                                your_role=role, state=session.state)

        async def sender():
            while not conn.dead:
                text = await conn.outbox.get()
                await websocket.send_text(text)

        send_task = asyncio.get_running_loop().create_task(sender())
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError:
                    session.malformed_inputs += 1
                    continue
                if conn.role == ROLE_OBSERVER:
                    continue
                session.ingest(conn, obj)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            if conn in session.connections:
                session.connections.remove(conn)
            if conn.role != ROLE_OBSERVER and session.state == "running":
                session.finish("disconnect")
                if session.ticker:
                    session.ticker.cancel()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
