"""Controllers producing per-frame commands: autonomous yielding vehicles,
scripted pedestrians, live human input, replay, manual vehicle steering.

All controllers are pure functions of world state (plus their own explicit
progress state); none consume randomness at tick time, which is what makes
recorded sessions replayable bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import (
    DEFAULT_LIMITS,
    DT,
    AgentKind,
    AgentState,
    Command,
    DriveCommand,
    KinematicLimits,
    Pose,
    RespawnCommand,
    Vec2,
    WalkCommand,
    coast_command,
    halt_command,
    normalize_yaw,
    point_in_polygon,
    point_segment_distance,
)


@dataclass(frozen=True)
class Route:
    """Polyline route with a cruising speed. Loop routes wrap around."""

    waypoints: tuple[Vec2, ...]
    cruise_speed: float
    loop: bool = False

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(tuple(p) for p in self.waypoints))
        if len(self.waypoints) < 2:
            raise ValueError("route needs at least 2 waypoints")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if a == b:
                raise ValueError(f"consecutive duplicate waypoint {a}")
        if not 0 < self.cruise_speed <= DEFAULT_LIMITS.v_max_car:
            raise ValueError(f"cruise speed {self.cruise_speed} outside (0, v_max]")


@dataclass(frozen=True)
class AiParams:
    """Tunables for the autonomous yielding vehicle.

    The pedestrian check is two-tier: any pedestrian in the narrow corridor
    (one lane wide) triggers braking; pedestrians in the wide corridor
    trigger braking only when they are off the sidewalk. The vehicle-ahead
    check uses the narrow corridor plus a bumper standoff.
    """

    limits: KinematicLimits = DEFAULT_LIMITS
    lane_width: float = 3.5
    ped_corridor_width: float = 7.0
    ped_margin: float = 4.0            # corridor length beyond braking distance
    ped_prediction_s: float = 3.0      # constant-velocity lookahead on walkers
    standoff_gap: float = 1.0          # bumper gap kept to stopped traffic
    lookahead_base: float = 3.0        # m
    lookahead_time: float = 1.0        # s
    cross_track_gain: float = 3.0      # pulls the pursuit back onto the path
    curve_safety: float = 0.8
    min_curve_speed: float = 1.0
    slower_deadband: float = 0.0
    respawn_clear_radius: float = 8.0
    recycle_routes: bool = True
    route_end_radius: float = 2.0
    sidewalks: tuple[tuple[Vec2, ...], ...] = ()
    dt: float = DT


DEFAULT_AI_PARAMS = AiParams()


class RouteGeometry:
    """Arc-length parametrization and discrete curvature of a route polyline."""

    def __init__(self, route: Route):
        self.route = route
        pts = route.waypoints
        self.points = pts
        self.seg_len = [math.dist(a, b) for a, b in zip(pts, pts[1:])]
        if route.loop:
            self.seg_len.append(math.dist(pts[-1], pts[0]))
        self.cum = [0.0]
        for s in self.seg_len:
            self.cum.append(self.cum[-1] + s)
        self.total = self.cum[-1]
        self.curvature = [self._menger(i) for i in range(len(pts))]

    def _menger(self, i: int) -> float:
        pts = self.points
        n = len(pts)
        if not self.route.loop and (i == 0 or i == n - 1):
            return 0.0
        a, b, c = pts[(i - 1) % n], pts[i], pts[(i + 1) % n]
        ab = math.dist(a, b)
        bc = math.dist(b, c)
        ca = math.dist(c, a)
        if ab * bc * ca == 0.0:
            return 0.0
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 2.0 * abs(cross) / (ab * bc * ca)

    def project(self, p: Vec2) -> float:
        """Arc position of the closest polyline point to p."""
        best_s, best_d = 0.0, math.inf
        n = len(self.seg_len)
        for i in range(n):
            a = self.points[i]
            b = self.points[(i + 1) % len(self.points)]
            ax, ay = a
            dx, dy = b[0] - ax, b[1] - ay
            seg_sq = dx * dx + dy * dy
            t = 0.0 if seg_sq == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg_sq))
            qx, qy = ax + t * dx, ay + t * dy
            d = math.hypot(p[0] - qx, p[1] - qy)
            if d < best_d:
                best_d = d
                best_s = self.cum[i] + t * self.seg_len[i]
        return best_s

    def point_at(self, s: float) -> Vec2:
        """Polyline point at arc position s (wrapped for loops, clamped else)."""
        if self.total == 0.0:
            return self.points[0]
        if self.route.loop:
            s %= self.total
        else:
            s = max(0.0, min(s, self.total))
        n = len(self.seg_len)
        for i in range(n):
            if s <= self.cum[i + 1] or i == n - 1:
                seg = self.seg_len[i]
                t = 0.0 if seg == 0 else (s - self.cum[i]) / seg
                a = self.points[i]
                b = self.points[(i + 1) % len(self.points)]
                return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        return self.points[-1]

    def start_pose(self) -> tuple[Vec2, float]:
        a, b = self.points[0], self.points[1]
        yaw = math.degrees(math.atan2(b[1] - a[1], b[0] - a[0]))
        return a, normalize_yaw(yaw)

    def speed_allowance(self, s: float, speed: float, params: AiParams) -> float:
        """Cruise speed capped by upcoming curvature (so the commanded yaw
        rate stays within limits) under a braking-envelope profile."""
        limits = params.limits
        omega_max = math.radians(limits.yaw_rate_max)
        scan = speed * speed / (2 * limits.a_brake_max) + params.lookahead_base \
            + params.lookahead_time * speed + 2.0
        allow = self.route.cruise_speed
        for i, kappa in enumerate(self.curvature):
            if kappa <= 1e-9:
                continue
            ds = self.cum[i] - s
            if self.route.loop:
                ds %= self.total
            if -1.0 <= ds <= scan:
                v_c = max(params.curve_safety * omega_max / kappa, params.min_curve_speed)
                gap = max(ds, 0.0)
                allow = min(allow, math.sqrt(v_c * v_c + 2 * limits.a_brake_max * gap))
        return allow


def _frame_of(state: AgentState, other_xy: Vec2) -> tuple[float, float]:
    """Other position in the agent's heading frame: (forward, lateral)."""
    h = math.radians(state.pose.yaw)
    dx = other_xy[0] - state.pose.position[0]
    dy = other_xy[1] - state.pose.position[1]
    return (dx * math.cos(h) + dy * math.sin(h),
            -dx * math.sin(h) + dy * math.cos(h))


def _on_sidewalk(xy: Vec2, params: AiParams) -> bool:
    return any(point_in_polygon(xy, poly) for poly in params.sidewalks)


def vehicle_ai_command(state: AgentState, route: Route, others: list[AgentState],
                       params: AiParams = DEFAULT_AI_PARAMS,
                       geom: RouteGeometry | None = None) -> DriveCommand:
    """Autonomous vehicle: pure-pursuit steering toward a lookahead point on
    the route, full braking when a pedestrian occupies the detection corridor
    or slower traffic sits ahead, otherwise accelerate toward cruise speed
    (capped for upcoming curvature)."""
    if geom is None:
        geom = RouteGeometry(route)
    limits = params.limits
    speed = state.speed
    pos = state.pose.xy

    # steering: lookahead point on the polyline; in curves the lookahead
    # shrinks with the curve-limited speed so the pursuit does not cut in
    s = geom.project(pos)
    allowance = geom.speed_allowance(s, speed, params)
    lookahead = max(params.lookahead_base, params.lookahead_time * min(speed, allowance))
    target = geom.point_at(s + lookahead)
    alpha = math.radians(normalize_yaw(
        math.degrees(math.atan2(target[1] - pos[1], target[0] - pos[0])) - state.pose.yaw))
    # cross-track correction keeps the pursuit from cutting inside curves
    foot = geom.point_at(s)
    ahead = geom.point_at(s + 0.25 if geom.route.loop else min(s + 0.25, geom.total))
    tx, ty = ahead[0] - foot[0], ahead[1] - foot[1]
    t_len = math.hypot(tx, ty)
    if t_len > 1e-9:
        cross_err = (tx * (pos[1] - foot[1]) - ty * (pos[0] - foot[0])) / t_len
        alpha -= math.atan2(params.cross_track_gain * cross_err, max(speed, 2.0))
    yaw_rate = math.degrees(speed * 2.0 * math.sin(alpha) / lookahead)
    yaw_rate = max(-limits.yaw_rate_max, min(limits.yaw_rate_max, yaw_rate))

    # corridor checks
    braking_dist = speed * speed / (2 * limits.a_brake_max)
    brake = False
    for other in others:
        if other.id == state.id:
            continue
        forward, lateral = _frame_of(state, other.pose.xy)
        if other.kind is AgentKind.PEDESTRIAN:
            corridor_len = braking_dist + params.ped_margin
            on_walk = _on_sidewalk(other.pose.xy, params)
            if 0.0 <= forward <= corridor_len:
                if abs(lateral) <= params.lane_width / 2:
                    brake = True
                elif abs(lateral) <= params.ped_corridor_width / 2 and not on_walk:
                    brake = True
            if not brake and not on_walk and params.ped_prediction_s > 0:
                # a walker heading for the corridor is braked for early: check
                # constant-velocity predictions against the narrow corridor
                vx, vy = other.velocity[0], other.velocity[1]
                if vx * vx + vy * vy > 1e-6:
                    steps = 4
                    for k in range(1, steps + 1):
                        tau = params.ped_prediction_s * k / steps
                        fwd_p, lat_p = _frame_of(
                            state, (other.pose.position[0] + vx * tau,
                                    other.pose.position[1] + vy * tau))
                        if 0.0 <= fwd_p <= corridor_len and abs(lat_p) <= params.lane_width / 2:
                            brake = True
                            break
        else:
            if abs(lateral) <= params.lane_width / 2 and forward >= 0.0:
                standoff = (state.shape.length + other.shape.length) / 2 + params.standoff_gap
                if forward <= standoff:
                    brake = True
                elif forward <= braking_dist + standoff \
                        and other.speed < speed - params.slower_deadband:
                    brake = True
        if brake:
            break

    if brake:
        accel = -limits.a_brake_max
    else:
        accel = (allowance - speed) / params.dt
        accel = max(-limits.a_brake_max, min(limits.a_accel_max, accel))
    return DriveCommand(accel, yaw_rate)


# ---------------------------------------------------------------------------
# Scripted walkers


@dataclass(frozen=True)
class Goto:
    point: Vec2
    speed: float


@dataclass(frozen=True)
class Wait:
    duration: float


@dataclass(frozen=True)
class WaitUntilGap:
    """Hold until no vehicle is within min_gap of the walker's next path
    segment (current position to the next goto target)."""

    min_gap: float


ScriptSegment = Goto | Wait | WaitUntilGap


@dataclass(frozen=True)
class WalkerScript:
    segments: tuple[ScriptSegment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for seg in self.segments:
            if isinstance(seg, Goto):
                if not 0 < seg.speed <= DEFAULT_LIMITS.v_max_ped:
                    raise ValueError(f"goto speed {seg.speed} outside (0, v_max_ped]")
            elif isinstance(seg, Wait):
                if seg.duration < 0:
                    raise ValueError("wait duration must be >= 0")
            elif isinstance(seg, WaitUntilGap):
                if seg.min_gap <= 0:
                    raise ValueError("min_gap must be positive")
            else:
                raise ValueError(f"unknown script segment {seg!r}")


class ScriptRunner:
    """Executes a WalkerScript; holds the explicit progress state (segment
    index and wait deadline), making the per-tick command a pure function of
    (progress, world state, t)."""

    def __init__(self, script: WalkerScript, dt: float = DT,
                 limits: KinematicLimits = DEFAULT_LIMITS):
        self.script = script
        self.dt = dt
        self.limits = limits
        self.index = 0
        self.wait_until: float | None = None
        self.done = False

    def _next_goto_target(self, start_index: int) -> Vec2 | None:
        for seg in self.script.segments[start_index:]:
            if isinstance(seg, Goto):
                return seg.point
        return None

    def command(self, state: AgentState, others: list[AgentState], t: float) -> WalkCommand:
        segments = self.script.segments
        while True:
            if self.index >= len(segments):
                self.done = True
                return halt_command(state.pose.yaw)
            seg = segments[self.index]
            if isinstance(seg, Goto):
                px, py = state.pose.xy
                dx, dy = seg.point[0] - px, seg.point[1] - py
                dist = math.hypot(dx, dy)
                if dist <= 1e-9:
                    self.index += 1
                    continue
                yaw = normalize_yaw(math.degrees(math.atan2(dy, dx)))
                if dist <= seg.speed * self.dt:
                    return WalkCommand((dx / self.dt, dy / self.dt), yaw)
                return WalkCommand((dx / dist * seg.speed, dy / dist * seg.speed), yaw)
            if isinstance(seg, Wait):
                if self.wait_until is None:
                    self.wait_until = t + seg.duration
                if t + 1e-9 >= self.wait_until:
                    self.wait_until = None
                    self.index += 1
                    continue
                return halt_command(state.pose.yaw)
            # WaitUntilGap
            target = self._next_goto_target(self.index + 1)
            if target is None:
                self.index += 1
                continue
            start = state.pose.xy
            clear = all(
                point_segment_distance(o.pose.xy, start, target) >= seg.min_gap
                for o in others if o.kind is AgentKind.CAR and o.id != state.id)
            if clear:
                self.index += 1
                continue
            return halt_command(state.pose.yaw)


def scripted_walker_command(runner: ScriptRunner, state: AgentState,
                            others: list[AgentState], t: float) -> WalkCommand:
    return runner.command(state, others, t)


# ---------------------------------------------------------------------------
# Live and manual input


@dataclass(frozen=True)
class InputMessage:
    """One client input sample. Pedestrian payloads carry move/yaw; vehicle
    payloads carry throttle/steer in [-1, 1]."""

    seq: int
    client_time_ms: float
    role: str
    move: Vec2 | None = None
    yaw: float | None = None
    throttle: float | None = None
    steer: float | None = None


def live_walk_command(msg: InputMessage, prev_pose: Pose,
                      limits: KinematicLimits = DEFAULT_LIMITS) -> WalkCommand:
    """Map a pedestrian input message onto a WalkCommand: speed clamped to
    v_max_ped, absent yaw holds the previous facing."""
    vx, vy = msg.move if msg.move is not None else (0.0, 0.0)
    speed = math.hypot(vx, vy)
    if speed > limits.v_max_ped:
        scale = limits.v_max_ped / speed
        vx, vy = vx * scale, vy * scale
    yaw = msg.yaw if msg.yaw is not None else prev_pose.yaw
    return WalkCommand((vx, vy), normalize_yaw(yaw))


def manual_vehicle_command(msg: InputMessage,
                           limits: KinematicLimits = DEFAULT_LIMITS) -> DriveCommand:
    """Map throttle/steer axes onto a DriveCommand. Negative throttle scales
    the braking limit; steer scales the yaw-rate limit."""
    throttle = max(-1.0, min(1.0, msg.throttle if msg.throttle is not None else 0.0))
    steer = max(-1.0, min(1.0, msg.steer if msg.steer is not None else 0.0))
    accel = throttle * limits.a_accel_max if throttle >= 0 else throttle * limits.a_brake_max
    return DriveCommand(accel, steer * limits.yaw_rate_max)


# ---------------------------------------------------------------------------
# Replay


@dataclass
class ReplayStream:
    """One agent's recorded command-per-frame map, extracted from a ReplayLog."""

    agent_id: int
    kind: AgentKind
    commands: dict[int, Command] = field(default_factory=dict)

    @property
    def last_frame(self) -> int:
        return max(self.commands) if self.commands else -1


def replay_command(stream: ReplayStream, frame: int, current_yaw: float = 0.0) -> Command:
    """The exact command recorded for this frame; past the end of the log,
    pedestrians halt and vehicles coast."""
    if frame < 0:
        raise ValueError(f"frame must be >= 0, got {frame}")
    cmd = stream.commands.get(frame)
    if cmd is not None:
        return cmd
    if stream.kind is AgentKind.PEDESTRIAN:
        return halt_command(current_yaw)
    return coast_command()


# ---------------------------------------------------------------------------
# Bindings and controller runners


CONTROLLER_KINDS = ("vehicle_ai", "scripted", "live", "replay", "manual_vehicle", "parked")


@dataclass(frozen=True)
class ControllerBinding:
    """Attachment of one controller to one agent. Live/manual bindings carry
    a headless fallback so batch runs can substitute a scripted surrogate."""

    agent_id: int
    controller: str
    route: Route | None = None
    script: WalkerScript | None = None
    role: str | None = None
    stream_id: str | None = None
    fallback_script: WalkerScript | None = None
    fallback_route: Route | None = None

    def __post_init__(self):
        if self.controller not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.controller!r}")
        if self.controller == "vehicle_ai" and self.route is None:
            raise ValueError(f"agent {self.agent_id}: vehicle_ai binding requires a route")
        if self.controller == "scripted" and self.script is None:
            raise ValueError(f"agent {self.agent_id}: scripted binding requires a script")
        if self.controller in ("live", "manual_vehicle") and not self.role:
            raise ValueError(f"agent {self.agent_id}: {self.controller} binding requires a role")
        if self.controller == "replay" and not self.stream_id:
            raise ValueError(f"agent {self.agent_id}: replay binding requires a stream id")


class VehicleAiController:
    """Per-agent runner for vehicle_ai: steers/brakes via vehicle_ai_command
    and recycles the vehicle to the route start when the route completes
    (emitted as an explicit RespawnCommand so replays reproduce it)."""

    def __init__(self, agent_id: int, route: Route, params: AiParams):
        self.agent_id = agent_id
        self.route = route
        self.params = params
        self.geom = RouteGeometry(route)

    def command(self, world, state: AgentState, t: float) -> Command:
        if self.params.recycle_routes and not self.route.loop:
            end = self.route.waypoints[-1]
            if math.dist(state.pose.xy, end) <= self.params.route_end_radius:
                start, yaw = self.geom.start_pose()
                blocked = any(
                    a.id != self.agent_id and math.dist(a.pose.xy, start)
                    < self.params.respawn_clear_radius
                    for a in world.agents)
                if blocked:
                    return DriveCommand(-self.params.limits.a_brake_max, 0.0)
                return RespawnCommand((start[0], start[1], state.pose.position[2]),
                                      yaw, min(state.speed, self.route.cruise_speed))
        return vehicle_ai_command(state, self.route, world.agents, self.params, self.geom)


class ScriptedWalkerController:
    def __init__(self, agent_id: int, script: WalkerScript, dt: float = DT,
                 limits: KinematicLimits = DEFAULT_LIMITS):
        self.agent_id = agent_id
        self.runner = ScriptRunner(script, dt, limits)

    @property
    def done(self) -> bool:
        return self.runner.done

    def command(self, world, state: AgentState, t: float) -> Command:
        return self.runner.command(state, world.agents, t)


class ExternalController:
    """Slot-fed controller for live/manual roles: the server ticker deposits
    the latest translated command before each tick; no input means the
    agent's dropout default (halt/coast via step_world)."""

    def __init__(self, agent_id: int, role: str):
        self.agent_id = agent_id
        self.role = role
        self.pending: Command | None = None

    def put(self, cmd: Command) -> None:
        self.pending = cmd

    def command(self, world, state: AgentState, t: float) -> Command | None:
        cmd, self.pending = self.pending, None
        return cmd


class ReplayController:
    def __init__(self, agent_id: int, stream: ReplayStream):
        self.agent_id = agent_id
        self.stream = stream

    def command(self, world, state: AgentState, t: float) -> Command:
        return replay_command(self.stream, world.frame, state.pose.yaw)


class ParkedController:
    """Stationary vehicle: no command; step_world's coast default keeps it
    at rest."""

    def __init__(self, agent_id: int):
        self.agent_id = agent_id

    def command(self, world, state: AgentState, t: float) -> None:
        return None
