"""Deterministic fixed-timestep world: agent state, kinematic integration,
collision geometry, termination.

The world ticks at a fixed 20 Hz (dt = 0.05 s). All dynamics are planar:
z components are carried for format fidelity but held at 0 by the built-in
integrators. One logical ticker owns and mutates a World; snapshots are
immutable copies safe to share with concurrent readers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

DT = 0.05  # fixed timestep, 20 Hz

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]


class SimError(Exception):
    """Base class for simulation errors."""


class WorldTerminatedError(SimError):
    """Raised when stepping a world that has already terminated."""


class UnknownAgentError(SimError):
    """Raised when a command targets an agent id not present in the world."""


@dataclass(frozen=True)
class KinematicLimits:
    """Per-kind dynamic bounds. Configurable per scenario; defaults are
    artifact constants, not measured values."""

    v_max_car: float = 13.0      # m/s
    a_accel_max: float = 3.0     # m/s^2
    a_brake_max: float = 6.0     # m/s^2, magnitude
    yaw_rate_max: float = 60.0   # deg/s
    v_max_ped: float = 3.0       # m/s


DEFAULT_LIMITS = KinematicLimits()


def normalize_yaw(yaw: float) -> float:
    """Map an angle in degrees onto [-180, 180)."""
    return (yaw + 180.0) % 360.0 - 180.0


class AgentKind(str, Enum):
    CAR = "car"
    PEDESTRIAN = "pedestrian"


@dataclass(frozen=True)
class Pose:
    """Global-frame pose: position [x, y, z] in meters and rotation
    (yaw, pitch, roll) in degrees, yaw normalized to [-180, 180)."""

    position: Vec3
    rotation: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.position):
            raise ValueError(f"non-finite position {self.position}")
        if not all(math.isfinite(c) for c in self.rotation):
            raise ValueError(f"non-finite rotation {self.rotation}")
        yaw = normalize_yaw(self.rotation[0])
        if yaw != self.rotation[0]:
            object.__setattr__(self, "rotation", (yaw,) + tuple(self.rotation[1:]))

    @property
    def yaw(self) -> float:
        return self.rotation[0]

    @property
    def xy(self) -> Vec2:
        return (self.position[0], self.position[1])


@dataclass(frozen=True)
class Shape:
    """Bounding-box extents [length, width, height] in meters."""

    length: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0 and self.height > 0):
            raise ValueError(f"shape extents must be positive: {self}")


# Default footprints used by built-in scenarios.
CAR_SHAPE = Shape(4.5, 2.0, 1.6)
PEDESTRIAN_SHAPE = Shape(0.5, 0.5, 1.8)


@dataclass
class AgentState:
    """One agent's kinematic state. Mutated only by the integrators."""

    id: int
    kind: AgentKind
    pose: Pose
    velocity: Vec3 = (0.0, 0.0, 0.0)
    acceleration: Vec3 = (0.0, 0.0, 0.0)
    shape: Shape = CAR_SHAPE

    @property
    def speed(self) -> float:
        """Planar speed, m/s."""
        return math.hypot(self.velocity[0], self.velocity[1])

    def copy(self) -> "AgentState":
        return AgentState(self.id, self.kind, self.pose, self.velocity,
                          self.acceleration, self.shape)


# ---------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class DriveCommand:
    """Vehicle control: longitudinal acceleration (m/s^2) and yaw rate (deg/s)."""

    accel: float = 0.0
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class WalkCommand:
    """Pedestrian control: planar velocity (m/s) and facing yaw (degrees)."""

    velocity: Vec2 = (0.0, 0.0)
    yaw: float = 0.0


@dataclass(frozen=True)
class RespawnCommand:
    """Teleport an agent to a new pose with a given planar speed along its
    heading. Used for traffic recycling; recorded in replay logs so replays
    reproduce it exactly."""

    position: Vec3
    yaw: float
    speed: float = 0.0


Command = DriveCommand | WalkCommand | RespawnCommand


def coast_command() -> DriveCommand:
    """Default for a vehicle with no input: hold speed, zero yaw rate."""
    return DriveCommand(0.0, 0.0)


def halt_command(yaw: float) -> WalkCommand:
    """Default for a pedestrian with no input: stand still, keep facing."""
    return WalkCommand((0.0, 0.0), yaw)


# ---------------------------------------------------------------------------
# Integration


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError("non-finite command value")


def integrate_vehicle(state: AgentState, cmd: DriveCommand, dt: float,
                      limits: KinematicLimits = DEFAULT_LIMITS) -> AgentState:
    """Advance a car one step under a kinematic speed/yaw-rate model.

    Speed is clamped to [0, v_max_car]; yaw advances by yaw_rate*dt and is
    renormalized; the position moves along the new heading at the new speed.
    The acceleration field is the backward difference of the velocity vector.
    """
    if state.kind is not AgentKind.CAR:
        raise ValueError(f"integrate_vehicle on non-car agent {state.id}")
    _require_finite(cmd.accel, cmd.yaw_rate)
    if not (-limits.a_brake_max - 1e-9 <= cmd.accel <= limits.a_accel_max + 1e-9):
        raise ValueError(f"accel {cmd.accel} outside [-{limits.a_brake_max}, {limits.a_accel_max}]")
    if abs(cmd.yaw_rate) > limits.yaw_rate_max + 1e-9:
        raise ValueError(f"yaw rate {cmd.yaw_rate} outside +/-{limits.yaw_rate_max}")

    speed = state.speed
    new_speed = min(max(speed + cmd.accel * dt, 0.0), limits.v_max_car)
    new_yaw = normalize_yaw(state.pose.yaw + cmd.yaw_rate * dt)
    heading = math.radians(new_yaw)
    cos_h, sin_h = math.cos(heading), math.sin(heading)
    px, py, pz = state.pose.position
    new_pos = (px + new_speed * cos_h * dt, py + new_speed * sin_h * dt, pz)
    new_vel = (new_speed * cos_h, new_speed * sin_h, 0.0)
    acc = tuple((nv - ov) / dt for nv, ov in zip(new_vel, state.velocity))

    state.pose = Pose(new_pos, (new_yaw, state.pose.rotation[1], state.pose.rotation[2]))
    state.velocity = new_vel
    state.acceleration = acc
    return state


def integrate_pedestrian(state: AgentState, cmd: WalkCommand, dt: float,
                         limits: KinematicLimits = DEFAULT_LIMITS) -> AgentState:
    """Advance a pedestrian one step under velocity-level avatar control.

    The commanded planar velocity is clamped to v_max_ped; yaw is taken from
    the command; velocity/acceleration fields are backward differences.
    """
    if state.kind is not AgentKind.PEDESTRIAN:
        raise ValueError(f"integrate_pedestrian on non-pedestrian agent {state.id}")
    _require_finite(cmd.velocity[0], cmd.velocity[1], cmd.yaw)

    vx, vy = cmd.velocity
    speed = math.hypot(vx, vy)
    if speed > limits.v_max_ped:
        scale = limits.v_max_ped / speed
        vx, vy = vx * scale, vy * scale
    px, py, pz = state.pose.position
    new_pos = (px + vx * dt, py + vy * dt, pz)
    new_vel = (vx, vy, 0.0)
    acc = tuple((nv - ov) / dt for nv, ov in zip(new_vel, state.velocity))

    state.pose = Pose(new_pos, (normalize_yaw(cmd.yaw), state.pose.rotation[1],
                                state.pose.rotation[2]))
    state.velocity = new_vel
    state.acceleration = acc
    return state


def apply_respawn(state: AgentState, cmd: RespawnCommand) -> AgentState:
    """Teleport an agent per a RespawnCommand (velocity along the new heading)."""
    _require_finite(*cmd.position, cmd.yaw, cmd.speed)
    yaw = normalize_yaw(cmd.yaw)
    heading = math.radians(yaw)
    state.pose = Pose(cmd.position, (yaw, state.pose.rotation[1], state.pose.rotation[2]))
    state.velocity = (cmd.speed * math.cos(heading), cmd.speed * math.sin(heading), 0.0)
    state.acceleration = (0.0, 0.0, 0.0)
    return state


# ---------------------------------------------------------------------------
# Planar geometry


def obb_corners(center: Vec2, yaw_deg: float, length: float, width: float) -> list[Vec2]:
    """Corners of a yaw-rotated rectangle footprint, counterclockwise."""
    hl, hw = length / 2.0, width / 2.0
    c, s = math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))
    cx, cy = center
    return [(cx + dx * c - dy * s, cy + dx * s + dy * c)
            for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))]


def _project_interval(corners: list[Vec2], axis: Vec2) -> tuple[float, float]:
    dots = [cx * axis[0] + cy * axis[1] for cx, cy in corners]
    return min(dots), max(dots)


def obb_overlap(pose_a: Pose, shape_a: Shape, pose_b: Pose, shape_b: Shape) -> bool:
    """True iff the two yaw-rotated length x width footprints intersect.

    Separating-axis test on the 4 candidate edge normals; height is ignored
    (planar world). Touching boundaries count as overlap.
    """
    ax, ay = pose_a.xy
    bx, by = pose_b.xy
    # cheap reject: bounding circles
    ra = 0.5 * math.hypot(shape_a.length, shape_a.width)
    rb = 0.5 * math.hypot(shape_b.length, shape_b.width)
    if math.hypot(bx - ax, by - ay) > ra + rb:
        return False

    corners_a = obb_corners((ax, ay), pose_a.yaw, shape_a.length, shape_a.width)
    corners_b = obb_corners((bx, by), pose_b.yaw, shape_b.length, shape_b.width)
    for yaw in (pose_a.yaw, pose_b.yaw):
        h = math.radians(yaw)
        for axis in ((math.cos(h), math.sin(h)), (-math.sin(h), math.cos(h))):
            min_a, max_a = _project_interval(corners_a, axis)
            min_b, max_b = _project_interval(corners_b, axis)
            if max_a < min_b or max_b < min_a:
                return False
    return True


def point_in_polygon(point: Vec2, polygon: list[Vec2] | tuple[Vec2, ...]) -> bool:
    """Even-odd rule point-in-polygon test (boundary points may go either way)."""
    x, y = point
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def point_segment_distance(point: Vec2, seg_a: Vec2, seg_b: Vec2) -> float:
    """Euclidean distance from a point to a line segment."""
    px, py = point
    ax, ay = seg_a
    bx, by = seg_b
    dx, dy = bx - ax, by - ay
    seg_len_sq = dx * dx + dy * dy
    if seg_len_sq == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg_len_sq
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


# ---------------------------------------------------------------------------
# World


@dataclass(frozen=True)
class TerminationRules:
    """When a world ends. Goal termination is gated on min_duration_s so that
    completed sessions always satisfy the 10 s scene minimum."""

    timeout_s: float = 30.0
    on_goal: bool = True
    on_collision: bool = True
    min_duration_s: float = 10.0


@dataclass(frozen=True)
class WorldSnapshot:
    """Immutable copy of world state at one frame."""

    frame: int
    sim_time: float
    agents: tuple[AgentState, ...]


@dataclass
class World:
    """Mutable world owned by a single ticker. sim_time is derived from the
    frame counter, which is authoritative."""

    agents: list[AgentState]
    map: object = None            # scenarios.MapSpec once a scenario is loaded
    seed: int = 0
    dt: float = DT
    frame: int = 0
    termination: TerminationRules = field(default_factory=TerminationRules)
    goal_region: tuple[Vec2, ...] | None = None
    limits: KinematicLimits = DEFAULT_LIMITS
    terminated: bool = False
    termination_reason: str | None = None
    collision_pair: tuple[int, int] | None = None

    def __post_init__(self):
        self.agents.sort(key=lambda a: a.id)
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate agent ids: {ids}")

    @property
    def sim_time(self) -> float:
        return self.frame * self.dt

    def agent(self, agent_id: int) -> AgentState:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise UnknownAgentError(f"no agent with id {agent_id}")

    def snapshot(self) -> WorldSnapshot:
        return WorldSnapshot(self.frame, self.sim_time,
                             tuple(a.copy() for a in self.agents))


def _check_termination(world: World) -> None:
    rules = world.termination
    if rules.on_collision:
        agents = world.agents
        for i in range(len(agents)):
            for j in range(i + 1, len(agents)):
                a, b = agents[i], agents[j]
                if obb_overlap(a.pose, a.shape, b.pose, b.shape):
                    world.terminated = True
                    world.termination_reason = "collision"
                    world.collision_pair = (a.id, b.id)
                    return
    if rules.on_goal and world.goal_region is not None \
            and world.sim_time >= rules.min_duration_s:
        for a in world.agents:
            if a.kind is AgentKind.PEDESTRIAN and point_in_polygon(a.pose.xy, world.goal_region):
                world.terminated = True
                world.termination_reason = "goal"
                return
    if world.sim_time >= rules.timeout_s:
        world.terminated = True
        world.termination_reason = "timeout"


def step_world(world: World, commands: dict[int, Command]) -> tuple[World, WorldSnapshot]:
    """Advance the world one frame.

    Each agent is integrated with its command; a missing command means coast
    for vehicles and stand-still for pedestrians. Termination conditions are
    evaluated after integration. Returns the (mutated) world and an immutable
    snapshot of the post-step state.
    """
    if world.terminated:
        raise WorldTerminatedError(
            f"world terminated at frame {world.frame} ({world.termination_reason})")
    known = {a.id for a in world.agents}
    for agent_id in commands:
        if agent_id not in known:
            raise UnknownAgentError(f"command for unknown agent id {agent_id}")

    for agent in world.agents:
        cmd = commands.get(agent.id)
        if isinstance(cmd, RespawnCommand):
            apply_respawn(agent, cmd)
        elif agent.kind is AgentKind.CAR:
            if cmd is None:
                cmd = coast_command()
            elif not isinstance(cmd, DriveCommand):
                raise ValueError(f"agent {agent.id} is a car; got {type(cmd).__name__}")
            integrate_vehicle(agent, cmd, world.dt, world.limits)
        else:
            if cmd is None:
                cmd = halt_command(agent.pose.yaw)
            elif not isinstance(cmd, WalkCommand):
                raise ValueError(f"agent {agent.id} is a pedestrian; got {type(cmd).__name__}")
            integrate_pedestrian(agent, cmd, world.dt, world.limits)

    world.frame += 1
    _check_termination(world)
    return world, world.snapshot()
