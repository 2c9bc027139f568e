"""Scenario materialization and simulation loops.

All seed-derived variation happens once, up front, in specialize(): cruise
speeds (shared by vehicles on the same route), vehicle spawn offsets, and
walker script timing. Controllers never consume randomness at tick time, so
(scenario, seed, command stream) fully determines every snapshot and any
recorded session replays bit-exactly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .agents import (
    AiParams,
    ControllerBinding,
    ExternalController,
    Goto,
    ParkedController,
    ReplayController,
    ReplayStream,
    Route,
    ScriptedWalkerController,
    VehicleAiController,
    Wait,
    WaitUntilGap,
    WalkerScript,
)
from .core import (
    DEFAULT_LIMITS,
    AgentState,
    KinematicLimits,
    World,
    step_world,
)
from .recorder import (
    REPLAY_SUFFIX,
    SCENE_SUFFIX,
    AgentFrameRecord,
    AgentMeta,
    ReplayLog,
    SceneFile,
    SceneTooShortError,
    capture_frame,
    finalize_scene,
    write_replay,
    write_scene,
)
from .scenarios import ScenarioSpec

MAX_FRAMES = 20_000  # hard safety cap; timeouts terminate far earlier


class RunnerError(Exception):
    pass


def _jitter_script(script: WalkerScript, rng: random.Random,
                   limits: KinematicLimits) -> WalkerScript:
    segments = []
    for seg in script.segments:
        if isinstance(seg, Wait):
            segments.append(Wait(seg.duration * rng.uniform(0.7, 1.6)))
        elif isinstance(seg, Goto):
            speed = min(limits.v_max_ped, max(0.3, seg.speed * rng.uniform(0.85, 1.15)))
            segments.append(Goto(seg.point, speed))
        elif isinstance(seg, WaitUntilGap):
            segments.append(WaitUntilGap(seg.min_gap * rng.uniform(0.85, 1.3)))
    return WalkerScript(tuple(segments))


def _jitter_route(route: Route, factor: float, limits: KinematicLimits) -> Route:
    cruise = min(limits.v_max_car, max(1.0, route.cruise_speed * factor))
    return Route(route.waypoints, cruise, route.loop)


def specialize(spec: ScenarioSpec, seed: int) -> ScenarioSpec:
    """Derive the seed-specific variant of a scenario: per-route cruise-speed
    factors, vehicle spawn offsets along their heading, and walker script
    timing. Pure function of (spec, seed)."""
    rng = random.Random(f"{spec.id}:{seed}")
    limits = _build_params(spec).limits
    route_factor: dict[tuple, float] = {}

    def factor_for(route: Route) -> float:
        key = route.waypoints
        if key not in route_factor:
            route_factor[key] = rng.uniform(0.85, 1.15)
        return route_factor[key]

    agents = []
    for a in spec.agents:
        binding = a.binding
        spawn = a.spawn
        if binding.controller == "vehicle_ai":
            route = _jitter_route(binding.route, factor_for(binding.route), limits)
            shift = rng.uniform(-3.0, 3.0)
            h = math.radians(spawn.yaw)
            x, y, z = spawn.position
            spawn = replace(spawn, position=(x + shift * math.cos(h),
                                             y + shift * math.sin(h), z))
            binding = replace(binding, route=route)
        elif binding.controller == "manual_vehicle" and binding.fallback_route is not None:
            binding = replace(binding, fallback_route=_jitter_route(
                binding.fallback_route, factor_for(binding.fallback_route), limits))
        if binding.script is not None:
            binding = replace(binding, script=_jitter_script(binding.script, rng, limits))
        if binding.fallback_script is not None:
            binding = replace(binding, fallback_script=_jitter_script(
                binding.fallback_script, rng, limits))
        agents.append(replace(a, spawn=spawn, binding=binding))
    return replace(spec, agents=tuple(agents), seed=seed)


def _build_params(spec: ScenarioSpec) -> AiParams:
    overrides = dict(spec.params)
    limits = DEFAULT_LIMITS
    if "limits" in overrides:
        limits = replace(DEFAULT_LIMITS, **overrides.pop("limits"))
    known = {f for f in AiParams.__dataclass_fields__ if f not in ("limits", "sidewalks")}
    unknown = set(overrides) - known
    if unknown:
        raise RunnerError(f"unknown AiParams overrides: {sorted(unknown)}")
    return AiParams(limits=limits, sidewalks=spec.map.sidewalks, **overrides)


@dataclass
class Simulation:
    """One ticking world plus its controllers, frame records, and replay log."""

    spec: ScenarioSpec             # the specialized (seed-applied) spec
    world: World
    controllers: dict[int, object]
    params: AiParams
    replay_log: ReplayLog
    records: list[AgentFrameRecord] = field(default_factory=list)
    external: dict[str, ExternalController] = field(default_factory=dict)

    def __post_init__(self):
        if not self.records:
            self.records.extend(capture_frame(self.world.snapshot()))

    @property
    def terminated(self) -> bool:
        return self.world.terminated

    @property
    def termination_reason(self) -> str | None:
        return self.world.termination_reason

    def tick(self):
        """Collect controller commands, log them, and advance one frame."""
        t = self.world.sim_time
        frame = self.world.frame
        commands = {}
        for agent in self.world.agents:
            ctl = self.controllers.get(agent.id)
            if ctl is None:
                continue
            cmd = ctl.command(self.world, agent, t)
            if cmd is not None:
                commands[agent.id] = cmd
                self.replay_log.append(frame, agent.id, cmd)
        _, snapshot = step_world(self.world, commands)
        self.records.extend(capture_frame(snapshot))
        return snapshot

    def run_to_termination(self) -> str:
        while not self.world.terminated:
            if self.world.frame >= MAX_FRAMES:
                raise RunnerError("frame cap exceeded without termination")
            self.tick()
        return self.world.termination_reason

    def agent_metas(self) -> list[AgentMeta]:
        return [AgentMeta(a.id, a.kind, a.shape) for a in self.spec.agents]

    def finalize(self) -> SceneFile:
        return finalize_scene(self.records, self.spec.id, self.spec.seed,
                              self.agent_metas())


def materialize(spec: ScenarioSpec, seed: int,
                live_roles: frozenset[str] | set[str] = frozenset(),
                replay: ReplayLog | None = None,
                walker_replay: ReplayLog | None = None) -> Simulation:
    """Build the world and controllers for one run.

    live_roles marks roles driven externally (server sessions); other
    live/manual bindings get their scripted/AI fallbacks. With replay set,
    every agent is driven from the log; walker_replay replays only the live
    pedestrian slot and re-simulates everyone else."""
    sspec = specialize(spec, seed)
    params = _build_params(sspec)
    agents = []
    for a in sspec.agents:
        agents.append(AgentState(id=a.id, kind=a.kind, pose=a.spawn, shape=a.shape))
    world = World(agents=agents, map=sspec.map, seed=seed,
                  termination=sspec.termination, goal_region=sspec.goal_region,
                  limits=params.limits)

    controllers: dict[int, object] = {}
    external: dict[str, ExternalController] = {}
    for a in sspec.agents:
        b = a.binding
        if replay is not None:
            stream = ReplayStream(a.id, a.kind, replay.commands_for(a.id))
            controllers[a.id] = ReplayController(a.id, stream)
            continue
        if b.controller == "vehicle_ai":
            controllers[a.id] = VehicleAiController(a.id, b.route, params)
        elif b.controller == "scripted":
            controllers[a.id] = ScriptedWalkerController(a.id, b.script, world.dt,
                                                         params.limits)
        elif b.controller == "parked":
            controllers[a.id] = ParkedController(a.id)
        elif b.controller == "replay":
            raise RunnerError(
                f"agent {a.id}: replay bindings need a log passed to materialize()")
        elif b.controller == "live":
            if walker_replay is not None:
                stream = ReplayStream(a.id, a.kind, walker_replay.commands_for(a.id))
                controllers[a.id] = ReplayController(a.id, stream)
            elif b.role in live_roles:
                ctl = ExternalController(a.id, b.role)
                controllers[a.id] = ctl
                external[b.role] = ctl
            elif b.fallback_script is not None:
                controllers[a.id] = ScriptedWalkerController(a.id, b.fallback_script,
                                                             world.dt, params.limits)
            else:
                raise RunnerError(f"agent {a.id}: live binding has no fallback script "
                                  "for a headless run")
        elif b.controller == "manual_vehicle":
            if b.role in live_roles:
                ctl = ExternalController(a.id, b.role)
                controllers[a.id] = ctl
                external[b.role] = ctl
            elif b.fallback_route is not None:
                controllers[a.id] = VehicleAiController(a.id, b.fallback_route, params)
            else:
                raise RunnerError(f"agent {a.id}: manual_vehicle binding has no "
                                  "fallback route for a headless run")

    log = ReplayLog(scenario=sspec.id, seed=seed)
    return Simulation(spec=sspec, world=world, controllers=controllers,
                      params=params, replay_log=log, external=external)


@dataclass(frozen=True)
class RunResult:
    scenario: str
    seed: int
    reason: str
    frames: int
    duration_s: float
    scene_path: Path | None
    replay_path: Path | None
    scene_valid: bool
    invalid_reason: str | None = None


def scene_filename(scenario: str, seed: int) -> str:
    return f"{scenario}_seed{seed}{SCENE_SUFFIX}"


def replay_filename(scenario: str, seed: int) -> str:
    return f"{scenario}_seed{seed}{REPLAY_SUFFIX}"


def run_headless(spec: ScenarioSpec, seed: int, out_dir: Path | str | None = None,
                 walker_replay: ReplayLog | None = None,
                 replay: ReplayLog | None = None) -> tuple[RunResult, SceneFile | None, ReplayLog]:
    """Simulate one seed to termination; optionally persist scene + replay."""
    sim = materialize(spec, seed, replay=replay, walker_replay=walker_replay)
    reason = sim.run_to_termination()
    scene: SceneFile | None = None
    invalid = None
    try:
        scene = sim.finalize()
    except SceneTooShortError as e:
        invalid = str(e)

    scene_path = replay_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        replay_path = out / replay_filename(sim.spec.id, seed)
        replay_path.write_text(write_replay(sim.replay_log), encoding="utf-8", newline="\n")
        if scene is not None:
            scene_path = out / scene_filename(sim.spec.id, seed)
            scene_path.write_text(write_scene(scene), encoding="utf-8", newline="\n")

    result = RunResult(scenario=sim.spec.id, seed=seed, reason=reason,
                       frames=sim.world.frame, duration_s=sim.world.sim_time,
                       scene_path=scene_path, replay_path=replay_path,
                       scene_valid=scene is not None, invalid_reason=invalid)
    return result, scene, sim.replay_log


def run_replay(spec: ScenarioSpec, log: ReplayLog) -> SceneFile:
    """Re-simulate a recorded session entirely from its replay log.

    Stops at world termination or at the log's end, whichever comes first,
    so sessions ended by an operator (world never terminated) replay to the
    exact recorded length."""
    sim = materialize(spec, log.seed, replay=log)
    end_frame = log.last_frame + 1
    while not sim.world.terminated and sim.world.frame < end_frame:
        if sim.world.frame >= MAX_FRAMES:
            raise RunnerError("frame cap exceeded during replay")
        sim.tick()
    return sim.finalize()
