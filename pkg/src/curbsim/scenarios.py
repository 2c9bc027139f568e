"""Scenario specification format, the four built-in interaction scenarios,
and bird's-eye-view semantic map rasterization.

Scenario files are UTF-8 JSON with top-level keys {id, map, agents,
goal_region, termination, seed, params}. Built-in geometry constants (road
lengths, lane widths, arc radii) are artifact choices, documented inline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CAR_SHAPE,
    PEDESTRIAN_SHAPE,
    AgentKind,
    Pose,
    Shape,
    TerminationRules,
    Vec2,
    obb_corners,
)
from .agents import (
    ControllerBinding,
    Goto,
    Route,
    ScriptSegment,
    Wait,
    WaitUntilGap,
    WalkerScript,
)

Polygon = tuple[Vec2, ...]


class ScenarioError(Exception):
    """Scenario parsing/validation failure."""


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class ScenarioValidationError(ScenarioError):
    """Carries every violation found, not just the first."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class Lane:
    centerline: tuple[Vec2, ...]
    width: float
    direction: str

    def __post_init__(self):
        object.__setattr__(self, "centerline", tuple(tuple(p) for p in self.centerline))


@dataclass(frozen=True)
class OrientedRect:
    center: Vec2
    length: float
    width: float
    yaw: float = 0.0

    def corners(self) -> Polygon:
        return tuple(obb_corners(self.center, self.yaw, self.length, self.width))


@dataclass(frozen=True)
class MapSpec:
    lanes: tuple[Lane, ...] = ()
    crosswalks: tuple[Polygon, ...] = ()
    parking_spots: tuple[OrientedRect, ...] = ()
    sidewalks: tuple[Polygon, ...] = ()
    drivable_area: tuple[Polygon, ...] = ()
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        norm = lambda polys: tuple(tuple(tuple(p) for p in poly) for poly in polys)
        object.__setattr__(self, "crosswalks", norm(self.crosswalks))
        object.__setattr__(self, "sidewalks", norm(self.sidewalks))
        object.__setattr__(self, "drivable_area", norm(self.drivable_area))
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(self, "parking_spots", tuple(self.parking_spots))
        object.__setattr__(self, "bounds", tuple(self.bounds))


@dataclass(frozen=True)
class AgentSpec:
    id: int
    kind: AgentKind
    shape: Shape
    spawn: Pose
    binding: ControllerBinding


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    map: MapSpec
    agents: tuple[AgentSpec, ...]
    goal_region: Polygon | None
    termination: TerminationRules
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if self.goal_region is not None:
            object.__setattr__(self, "goal_region",
                               tuple(tuple(p) for p in self.goal_region))


# ---------------------------------------------------------------------------
# Validation


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def polygon_is_simple(poly: Polygon) -> bool:
    n = len(poly)
    if n < 3:
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent edges share an endpoint
            if _segments_properly_intersect(poly[i], poly[(i + 1) % n],
                                            poly[j], poly[(j + 1) % n]):
                return False
    return True


def _in_bounds(p: Vec2, bounds) -> bool:
    xmin, ymin, xmax, ymax = bounds
    return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax


def validate_map(m: MapSpec) -> list[str]:
    violations = []
    for name, polys in (("crosswalk", m.crosswalks), ("sidewalk", m.sidewalks),
                        ("drivable_area", m.drivable_area)):
        for i, poly in enumerate(polys):
            if not polygon_is_simple(poly):
                violations.append(f"{name}[{i}] polygon is not simple")
    for i, lane in enumerate(m.lanes):
        if lane.width <= 2.0:
            violations.append(f"lane[{i}] width {lane.width} must exceed 2 m")
        if len(lane.centerline) < 2:
            violations.append(f"lane[{i}] centerline needs >= 2 points")
        for p in lane.centerline:
            if not _in_bounds(p, m.bounds):
                violations.append(f"lane[{i}] centerline point {p} outside bounds")
                break
    xmin, ymin, xmax, ymax = m.bounds
    if not (xmax > xmin and ymax > ymin):
        violations.append(f"degenerate bounds {m.bounds}")
    return violations


def validate_scenario(spec: ScenarioSpec) -> list[str]:
    violations = validate_map(spec.map)
    if not 10.0 <= spec.termination.timeout_s <= 30.0:
        violations.append(
            f"termination.timeout_s {spec.termination.timeout_s} outside [10, 30] s")
    seen: dict[int, int] = {}
    for idx, a in enumerate(spec.agents):
        if a.id in seen:
            violations.append(
                f"duplicate agent id {a.id}: agents[{seen[a.id]}] and agents[{idx}]")
        else:
            seen[a.id] = idx
        if not _in_bounds(a.spawn.xy, spec.map.bounds):
            violations.append(f"agents[{idx}] (id {a.id}) spawn {a.spawn.xy} outside bounds")
        if a.binding.agent_id != a.id:
            violations.append(f"agents[{idx}] binding targets id {a.binding.agent_id}, not {a.id}")
        if a.binding.controller == "vehicle_ai" and a.kind is not AgentKind.CAR:
            violations.append(f"agents[{idx}] (id {a.id}) vehicle_ai on non-car")
        if a.binding.controller == "scripted" and a.kind is not AgentKind.PEDESTRIAN:
            violations.append(f"agents[{idx}] (id {a.id}) scripted walker on non-pedestrian")
    live = [a.id for a in spec.agents if a.binding.controller == "live"]
    manual = [a.id for a in spec.agents if a.binding.controller == "manual_vehicle"]
    if len(live) > 1:
        violations.append(f"more than one live pedestrian: agents {live}")
    if len(manual) > 1:
        violations.append(f"more than one manual vehicle: agents {manual}")
    if spec.goal_region is not None and len(spec.goal_region) < 3:
        violations.append("goal_region needs >= 3 vertices")
    return violations


# ---------------------------------------------------------------------------
# JSON serialization


def _poly_to_json(poly):
    return [[p[0], p[1]] for p in poly]


def _script_to_json(script: WalkerScript):
    out = []
    for seg in script.segments:
        if isinstance(seg, Goto):
            out.append({"op": "goto", "point": [seg.point[0], seg.point[1]],
                        "speed": seg.speed})
        elif isinstance(seg, Wait):
            out.append({"op": "wait", "duration": seg.duration})
        else:
            out.append({"op": "wait_until_gap", "min_gap": seg.min_gap})
    return out


def _script_from_json(items) -> WalkerScript:
    segments: list[ScriptSegment] = []
    for item in items:
        op = item.get("op")
        if op == "goto":
            segments.append(Goto(tuple(item["point"]), float(item["speed"])))
        elif op == "wait":
            segments.append(Wait(float(item["duration"])))
        elif op == "wait_until_gap":
            segments.append(WaitUntilGap(float(item["min_gap"])))
        else:
            raise ScenarioError(f"unknown script op {op!r}")
    return WalkerScript(tuple(segments))


def _route_to_json(route: Route):
    return {"waypoints": _poly_to_json(route.waypoints),
            "cruise_speed": route.cruise_speed, "loop": route.loop}


def _route_from_json(obj) -> Route:
    return Route(tuple(tuple(p) for p in obj["waypoints"]),
                 float(obj["cruise_speed"]), bool(obj.get("loop", False)))


def _binding_to_json(b: ControllerBinding):
    obj: dict = {"type": b.controller}
    if b.route is not None:
        obj["route"] = _route_to_json(b.route)
    if b.script is not None:
        obj["script"] = _script_to_json(b.script)
    if b.role is not None:
        obj["role"] = b.role
    if b.stream_id is not None:
        obj["stream"] = b.stream_id
    if b.fallback_script is not None:
        obj["fallback_script"] = _script_to_json(b.fallback_script)
    if b.fallback_route is not None:
        obj["fallback_route"] = _route_to_json(b.fallback_route)
    return obj


def _binding_from_json(agent_id: int, obj) -> ControllerBinding:
    return ControllerBinding(
        agent_id=agent_id,
        controller=str(obj.get("type", "")),
        route=_route_from_json(obj["route"]) if "route" in obj else None,
        script=_script_from_json(obj["script"]) if "script" in obj else None,
        role=obj.get("role"),
        stream_id=obj.get("stream"),
        fallback_script=_script_from_json(obj["fallback_script"])
        if "fallback_script" in obj else None,
        fallback_route=_route_from_json(obj["fallback_route"])
        if "fallback_route" in obj else None,
    )


def serialize_scenario(spec: ScenarioSpec) -> str:
    obj = {
        "id": spec.id,
        "map": {
            "lanes": [{"centerline": _poly_to_json(l.centerline), "width": l.width,
                       "direction": l.direction} for l in spec.map.lanes],
            "crosswalks": [_poly_to_json(p) for p in spec.map.crosswalks],
            "parking_spots": [{"center": [r.center[0], r.center[1]], "length": r.length,
                               "width": r.width, "yaw": r.yaw}
                              for r in spec.map.parking_spots],
            "sidewalks": [_poly_to_json(p) for p in spec.map.sidewalks],
            "drivable_area": [_poly_to_json(p) for p in spec.map.drivable_area],
            "bounds": list(spec.map.bounds),
        },
        "agents": [{
            "id": a.id,
            "kind": a.kind.value,
            "shape": [a.shape.length, a.shape.width, a.shape.height],
            "spawn": {"position": list(a.spawn.position), "yaw": a.spawn.yaw},
            "controller": _binding_to_json(a.binding),
        } for a in spec.agents],
        "goal_region": _poly_to_json(spec.goal_region) if spec.goal_region else None,
        "termination": {"timeout_s": spec.termination.timeout_s,
                        "on_goal": spec.termination.on_goal,
                        "on_collision": spec.termination.on_collision},
        "seed": spec.seed,
        "params": spec.params,
    }
    return json.dumps(obj, indent=2) + "\n"


def load_scenario(text: str) -> ScenarioSpec:
    """Parse and validate a scenario file. Syntax errors report line/column;
    semantic problems raise ScenarioValidationError listing every violation."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioSyntaxError(e.msg, e.lineno, e.colno) from e
    if not isinstance(obj, dict):
        raise ScenarioError("scenario file must contain a JSON object")

    try:
        m = obj.get("map", {})
        map_spec = MapSpec(
            lanes=tuple(Lane(tuple(tuple(p) for p in l["centerline"]), float(l["width"]),
                             str(l.get("direction", ""))) for l in m.get("lanes", [])),
            crosswalks=tuple(tuple(tuple(p) for p in poly) for poly in m.get("crosswalks", [])),
            parking_spots=tuple(OrientedRect(tuple(r["center"]), float(r["length"]),
                                             float(r["width"]), float(r.get("yaw", 0.0)))
                                for r in m.get("parking_spots", [])),
            sidewalks=tuple(tuple(tuple(p) for p in poly) for poly in m.get("sidewalks", [])),
            drivable_area=tuple(tuple(tuple(p) for p in poly)
                                for poly in m.get("drivable_area", [])),
            bounds=tuple(m.get("bounds", (0, 0, 1, 1))),
        )
        agents = []
        for a in obj.get("agents", []):
            spawn = a.get("spawn", {})
            agents.append(AgentSpec(
                id=int(a["id"]),
                kind=AgentKind(a["kind"]),
                shape=Shape(*a["shape"]),
                spawn=Pose(tuple(spawn.get("position", (0, 0, 0))),
                           (float(spawn.get("yaw", 0.0)), 0.0, 0.0)),
                binding=_binding_from_json(int(a["id"]), a.get("controller", {})),
            ))
        term = obj.get("termination", {})
        goal = obj.get("goal_region")
        spec = ScenarioSpec(
            id=str(obj.get("id", "")),
            map=map_spec,
            agents=tuple(agents),
            goal_region=tuple(tuple(p) for p in goal) if goal else None,
            termination=TerminationRules(
                timeout_s=float(term.get("timeout_s", 30.0)),
                on_goal=bool(term.get("on_goal", True)),
                on_collision=bool(term.get("on_collision", True))),
            seed=int(obj.get("seed", 0)),
            params=dict(obj.get("params", {})),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"malformed scenario structure: {e}") from e

    violations = validate_scenario(spec)
    if violations:
        raise ScenarioValidationError(violations)
    return spec


# ---------------------------------------------------------------------------
# Built-in scenarios (Jaywalk, Parked Cars, 4-Way Stop, Parking Lot Entrance)
#
# Geometry constants: jaywalk road length 60 m, lane width 3.5 m; intersection
# arm length 30 m with radius-3.5 right-turn arcs; 3 parked cars at 6 m
# spacing; driveway width 6 m.

LANE_W = 3.5


def _rect(x0, y0, x1, y1) -> Polygon:
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def _right_turn_arc(center: Vec2, radius: float, theta_from: float, theta_to: float,
                    step_deg: float = 15.0) -> list[Vec2]:
    """Clockwise arc sample points from theta_from to theta_to (degrees)."""
    pts = []
    n = int(round(abs(theta_from - theta_to) / step_deg))
    for k in range(n + 1):
        th = math.radians(theta_from + (theta_to - theta_from) * k / n)
        pts.append((center[0] + radius * math.cos(th), center[1] + radius * math.sin(th)))
    return pts


def _jaywalk() -> ScenarioSpec:
    road = _rect(-30, -LANE_W, 30, LANE_W)
    south_walk = _rect(-30, -6, 30, -LANE_W)
    north_walk = _rect(-30, LANE_W, 30, 6)
    east_route = Route(((-30.0, -1.75), (30.0, -1.75)), cruise_speed=8.0)
    west_route = Route(((30.0, 1.75), (-30.0, 1.75)), cruise_speed=8.0)
    script = WalkerScript((
        Wait(2.5),
        Goto((0.5, -3.8), 1.25),
        WaitUntilGap(14.0),
        Goto((0.5, 4.5), 1.25),
    ))
    agents = [
        AgentSpec(1, AgentKind.PEDESTRIAN, PEDESTRIAN_SHAPE,
                  Pose((0.5, -4.5, 0.0), (90.0, 0, 0)),
                  ControllerBinding(1, "live", role="pedestrian", fallback_script=script)),
    ]
    for i, x in enumerate((-28.0, -8.0, 12.0)):
        agents.append(AgentSpec(10 + i, AgentKind.CAR, CAR_SHAPE,
                                Pose((x, -1.75, 0.0), (0.0, 0, 0)),
                                ControllerBinding(10 + i, "vehicle_ai", route=east_route)))
    for i, x in enumerate((28.0, 8.0, -12.0)):
        agents.append(AgentSpec(20 + i, AgentKind.CAR, CAR_SHAPE,
                                Pose((x, 1.75, 0.0), (180.0, 0, 0)),
                                ControllerBinding(20 + i, "vehicle_ai", route=west_route)))
    return ScenarioSpec(
        id="jaywalk",
        map=MapSpec(
            lanes=(Lane(((-30.0, -1.75), (30.0, -1.75)), LANE_W, "east"),
                   Lane(((30.0, 1.75), (-30.0, 1.75)), LANE_W, "west")),
            sidewalks=(south_walk, north_walk),
            drivable_area=(road,),
            bounds=(-32.0, -8.0, 32.0, 8.0),
        ),
        agents=tuple(agents),
        goal_region=_rect(-2, 3.6, 2, 6),
        termination=TerminationRules(timeout_s=25.0),
    )


def _parked_cars() -> ScenarioSpec:
    road = _rect(-30, -5, 30, 1.75)     # lane plus 3.25 m parking shoulder
    walk = _rect(-30, -6.5, 30, -5)
    route = Route(((-30.0, 0.0), (30.0, 0.0)), cruise_speed=7.0)
    script = WalkerScript((Wait(2.5), Goto((12.8, -2.2), 1.25)))
    spots = tuple(OrientedRect((x, -3.6), 5.5, 2.4, 0.0) for x in (-4.0, 2.0, 8.0))
    agents = [
        AgentSpec(1, AgentKind.PEDESTRIAN, PEDESTRIAN_SHAPE,
                  Pose((-8.0, -2.2, 0.0), (0.0, 0, 0)),
                  ControllerBinding(1, "live", role="pedestrian", fallback_script=script)),
        AgentSpec(10, AgentKind.CAR, CAR_SHAPE, Pose((-26.0, 0.0, 0.0), (0.0, 0, 0)),
                  ControllerBinding(10, "vehicle_ai", route=route)),
        AgentSpec(11, AgentKind.CAR, CAR_SHAPE, Pose((-14.0, 0.0, 0.0), (0.0, 0, 0)),
                  ControllerBinding(11, "vehicle_ai", route=route)),
    ]
    for i, x in enumerate((-4.0, 2.0, 8.0)):
        agents.append(AgentSpec(30 + i, AgentKind.CAR, CAR_SHAPE,
                                Pose((x, -3.6, 0.0), (0.0, 0, 0)),
                                ControllerBinding(30 + i, "parked")))
    return ScenarioSpec(
        id="parked_cars",
        map=MapSpec(
            lanes=(Lane(((-30.0, 0.0), (30.0, 0.0)), LANE_W, "east"),),
            parking_spots=spots,
            sidewalks=(walk,),
            drivable_area=(road,),
            bounds=(-32.0, -8.0, 32.0, 8.0),
        ),
        agents=tuple(agents),
        goal_region=_rect(11.5, -3.6, 15, -1.2),
        termination=TerminationRules(timeout_s=28.0),
        params={"ped_corridor_width": 5.0},
    )


def _corner_block(sx: int, sy: int) -> Polygon:
    """Chamfered corner sidewalk block for one intersection quadrant."""
    return (
        (5.0 * sx, 3.5 * sy),
        (10.0 * sx, 3.5 * sy),
        (10.0 * sx, 10.0 * sy),
        (3.5 * sx, 10.0 * sy),
        (3.5 * sx, 5.0 * sy),
    )


def _four_way_stop() -> ScenarioSpec:
    r = LANE_W  # right-turn arc radius
    # Right-turn-only flows from all four arms; their paths are mutually
    # disjoint, so no intersection right-of-way logic is needed.
    w_to_s = Route(tuple([(-30.0, -1.75)]
                         + _right_turn_arc((-5.25, -5.25), r, 90.0, 0.0)
                         + [(-1.75, -30.0)]), cruise_speed=7.0)
    n_to_w = Route(tuple([(-1.75, 30.0)]
                         + _right_turn_arc((-5.25, 5.25), r, 0.0, -90.0)
                         + [(-30.0, 1.75)]), cruise_speed=7.0)
    e_to_n = Route(tuple([(30.0, 1.75)]
                         + _right_turn_arc((5.25, 5.25), r, -90.0, -180.0)
                         + [(1.75, 30.0)]), cruise_speed=7.0)
    s_to_e = Route(tuple([(1.75, -30.0)]
                         + _right_turn_arc((5.25, -5.25), r, 180.0, 90.0)
                         + [(30.0, -1.75)]), cruise_speed=7.0)
    script = WalkerScript((
        Wait(2.0),
        Goto((5.8, -4.5), 1.25),
        WaitUntilGap(12.0),
        Goto((-6.0, -4.5), 1.25),
    ))
    agents = [
        AgentSpec(1, AgentKind.PEDESTRIAN, PEDESTRIAN_SHAPE,
                  Pose((7.5, -4.5, 0.0), (180.0, 0, 0)),
                  ControllerBinding(1, "live", role="pedestrian", fallback_script=script)),
        AgentSpec(10, AgentKind.CAR, CAR_SHAPE, Pose((-28.0, -1.75, 0.0), (0.0, 0, 0)),
                  ControllerBinding(10, "vehicle_ai", route=w_to_s)),
        AgentSpec(11, AgentKind.CAR, CAR_SHAPE, Pose((-1.75, 28.0, 0.0), (-90.0, 0, 0)),
                  ControllerBinding(11, "vehicle_ai", route=n_to_w)),
        AgentSpec(12, AgentKind.CAR, CAR_SHAPE, Pose((28.0, 1.75, 0.0), (180.0, 0, 0)),
                  ControllerBinding(12, "vehicle_ai", route=e_to_n)),
        AgentSpec(13, AgentKind.CAR, CAR_SHAPE, Pose((1.75, -28.0, 0.0), (90.0, 0, 0)),
                  ControllerBinding(13, "vehicle_ai", route=s_to_e)),
    ]
    return ScenarioSpec(
        id="four_way_stop",
        map=MapSpec(
            lanes=(Lane(((-30.0, -1.75), (30.0, -1.75)), LANE_W, "east"),
                   Lane(((30.0, 1.75), (-30.0, 1.75)), LANE_W, "west"),
                   Lane(((1.75, -30.0), (1.75, 30.0)), LANE_W, "north"),
                   Lane(((-1.75, 30.0), (-1.75, -30.0)), LANE_W, "south")),
            crosswalks=(_rect(-3.5, -5.5, 3.5, -3.5),   # south
                        _rect(-3.5, 3.5, 3.5, 5.5),     # north
                        _rect(-5.5, -3.5, -3.5, 3.5),   # west
                        _rect(3.5, -3.5, 5.5, 3.5)),    # east
            sidewalks=tuple(_corner_block(sx, sy)
                            for sx in (1, -1) for sy in (1, -1)),
            drivable_area=(_rect(-30, -3.5, 30, 3.5), _rect(-3.5, -30, 3.5, 30)),
            bounds=(-32.0, -32.0, 32.0, 32.0),
        ),
        agents=tuple(agents),
        goal_region=_rect(-8, -6, -4.5, -3.6),
        termination=TerminationRules(timeout_s=28.0),
    )


def _parking_lot_entrance() -> ScenarioSpec:
    road = _rect(-30, -LANE_W, 30, 0)
    driveway = _rect(-3, 0, 3, 2)       # 6 m wide crossing of the sidewalk
    lot = _rect(-15, 2, 15, 20)
    walk_west = _rect(-30, 0, -3, 2)
    walk_east = _rect(3, 0, 30, 2)
    # left-turn arc into the lot: entry (-3, -1.75), center (-3, 1.25), R=3
    arc = []
    for k in range(7):
        th = math.radians(-90.0 + 90.0 * k / 6)
        arc.append((-3.0 + 3.0 * math.cos(th), 1.25 + 3.0 * math.sin(th)))
    fallback_route = Route(tuple([(-28.0, -1.75)] + arc + [(0.0, 12.0)]), cruise_speed=6.0)
    script = WalkerScript((
        Wait(2.0),
        Goto((-4.0, 1.0), 1.3),
        WaitUntilGap(4.0),
        Goto((12.0, 1.0), 1.3),
    ))
    agents = [
        AgentSpec(1, AgentKind.PEDESTRIAN, PEDESTRIAN_SHAPE,
                  Pose((-12.0, 1.0, 0.0), (0.0, 0, 0)),
                  ControllerBinding(1, "live", role="pedestrian", fallback_script=script)),
        AgentSpec(10, AgentKind.CAR, CAR_SHAPE, Pose((-26.0, -1.75, 0.0), (0.0, 0, 0)),
                  ControllerBinding(10, "manual_vehicle", role="vehicle",
                                    fallback_route=fallback_route)),
        AgentSpec(30, AgentKind.CAR, CAR_SHAPE, Pose((-8.0, 16.0, 0.0), (90.0, 0, 0)),
                  ControllerBinding(30, "parked")),
    ]
    return ScenarioSpec(
        id="parking_lot_entrance",
        map=MapSpec(
            lanes=(Lane(((-30.0, -1.75), (30.0, -1.75)), LANE_W, "east"),),
            parking_spots=tuple(OrientedRect((x, 16.0), 5.5, 2.4, 90.0)
                                for x in (-8.0, -3.0, 2.0)),
            sidewalks=(walk_west, walk_east),
            drivable_area=(road, driveway, lot),
            bounds=(-32.0, -8.0, 32.0, 22.0),
        ),
        agents=tuple(agents),
        goal_region=_rect(10, 0.1, 14, 1.9),
        termination=TerminationRules(timeout_s=28.0),
    )


def builtin_scenarios() -> list[ScenarioSpec]:
    """The four built-in pedestrian-vehicle interaction scenarios."""
    return [_jaywalk(), _parked_cars(), _four_way_stop(), _parking_lot_entrance()]


def builtin_scenario(scenario_id: str) -> ScenarioSpec:
    for spec in builtin_scenarios():
        if spec.id == scenario_id:
            return spec
    raise ScenarioError(f"unknown scenario {scenario_id!r}; "
                        f"built-ins: {[s.id for s in builtin_scenarios()]}")


# ---------------------------------------------------------------------------
# Semantic map rasterization

CLASS_OFFMAP = 0
CLASS_SIDEWALK = 1
CLASS_DRIVABLE = 2
CLASS_PARKING = 3
CLASS_CROSSWALK = 4

CLASS_GRAY = {CLASS_OFFMAP: 0, CLASS_SIDEWALK: 64, CLASS_DRIVABLE: 128,
              CLASS_PARKING: 160, CLASS_CROSSWALK: 200}


@dataclass(frozen=True)
class SemanticGrid:
    origin: Vec2                 # world position of the grid's (0, 0) cell corner
    resolution: float
    width: int                   # cells along x
    height: int                  # cells along y
    cells: np.ndarray            # (height, width) uint8 class codes; row 0 at ymin

    def class_counts(self) -> dict[int, int]:
        vals, counts = np.unique(self.cells, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


def _points_in_polygon(xs: np.ndarray, ys: np.ndarray, poly: Polygon) -> np.ndarray:
    """Vectorized even-odd containment for flat point arrays."""
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if y1 == y2:
            continue
        cond = (np.asarray(y1 > ys)) != (y2 > ys)
        x_cross = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (xs < x_cross)
    return inside


def rasterize_semantic_map(map_spec: MapSpec, resolution: float) -> SemanticGrid:
    """Classify every cell center by the highest-priority polygon containing
    it: crosswalk > parking > drivable > sidewalk > off-map."""
    if not 0.0 < resolution <= 1.0:
        raise ValueError(f"resolution {resolution} outside (0, 1]")
    xmin, ymin, xmax, ymax = map_spec.bounds
    width = max(1, int(math.ceil((xmax - xmin) / resolution - 1e-9)))
    height = max(1, int(math.ceil((ymax - ymin) / resolution - 1e-9)))
    xs = xmin + (np.arange(width) + 0.5) * resolution
    ys = ymin + (np.arange(height) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    fx, fy = gx.ravel(), gy.ravel()
    cells = np.zeros(fx.shape, dtype=np.uint8)

    layers = (
        (CLASS_SIDEWALK, map_spec.sidewalks),
        (CLASS_DRIVABLE, map_spec.drivable_area),
        (CLASS_PARKING, tuple(r.corners() for r in map_spec.parking_spots)),
        (CLASS_CROSSWALK, map_spec.crosswalks),
    )
    for code, polys in layers:   # ascending priority: later layers overwrite
        for poly in polys:
            cells[_points_in_polygon(fx, fy, poly)] = code
    return SemanticGrid(origin=(xmin, ymin), resolution=resolution,
                        width=width, height=height,
                        cells=cells.reshape(height, width))


def write_pgm(grid: SemanticGrid) -> str:
    """Plain P2 portable graymap with origin/resolution in a comment line.
    Rows are written north-first (top image row = largest y)."""
    lines = [
        "P2",
        f"# origin={grid.origin[0]} {grid.origin[1]} resolution={grid.resolution}",
        f"{grid.width} {grid.height}",
        "255",
    ]
    gray = np.vectorize(CLASS_GRAY.get)(grid.cells)
    for row in gray[::-1]:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
