"""Frame capture, scene files, replay logs.

Scene files hold one 10-30 s episode at 20 Hz: a JSON header line followed by
one JSON record per agent per frame, sorted by (frame, agent_id). Numbers are
written via Python's shortest-round-trip float repr, so write/read is
lossless and byte-stable. Replay logs hold the per-frame command stream
sufficient to re-simulate a session deterministically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .core import (
    AgentKind,
    Command,
    DriveCommand,
    RespawnCommand,
    Shape,
    WalkCommand,
    WorldSnapshot,
)

SCENE_FORMAT = "carla-vr-scene/1"
SCENE_SUFFIX = ".scene.jsonl"
REPLAY_SUFFIX = ".replay.jsonl"

MIN_SCENE_S = 10.0
MAX_SCENE_S = 30.0
SUPPORTED_RATES = (1, 2, 4, 5, 10, 20)   # integer divisors of the 20 Hz base


class SceneError(Exception):
    """Scene construction or parsing failure."""


class SceneTooShortError(SceneError):
    """Recording shorter than the 10 s scene minimum."""


@dataclass(frozen=True)
class AgentMeta:
    """Per-agent time-invariant data, stored once in the scene header."""

    id: int
    kind: AgentKind
    shape: Shape


@dataclass(frozen=True)
class AgentFrameRecord:
    """One agent's state at one frame: the dataset row."""

    frame: int
    t: float
    agent_id: int
    kind: AgentKind
    position: tuple[float, float, float]
    rotation: tuple[float, float, float]   # yaw, pitch, roll (deg)
    velocity: tuple[float, float, float]
    acceleration: tuple[float, float, float]


@dataclass(frozen=True)
class SceneHeader:
    scenario: str
    seed: int
    rate_hz: int
    frames: int
    agents: tuple[AgentMeta, ...]
    truncated: bool = False
    format: str = SCENE_FORMAT


@dataclass
class SceneFile:
    header: SceneHeader
    records: list[AgentFrameRecord]

    @property
    def duration_s(self) -> float:
        return self.header.frames / self.header.rate_hz

    def agent_records(self, agent_id: int) -> list[AgentFrameRecord]:
        return [r for r in self.records if r.agent_id == agent_id]


def capture_frame(snapshot: WorldSnapshot, rate_hz: int = 20) -> list[AgentFrameRecord]:
    """Turn a world snapshot into dataset rows, ordered by agent id."""
    records = []
    t = snapshot.frame / rate_hz
    for a in sorted(snapshot.agents, key=lambda a: a.id):
        yaw = a.pose.rotation[0]
        if not -180.0 <= yaw < 180.0:
            raise SceneError(f"agent {a.id} yaw {yaw} outside [-180, 180)")
        fields = a.pose.position + a.pose.rotation + a.velocity + a.acceleration
        if not all(math.isfinite(v) for v in fields):
            raise SceneError(f"agent {a.id} has non-finite kinematic fields")
        records.append(AgentFrameRecord(
            frame=snapshot.frame,
            t=t,
            agent_id=a.id,
            kind=a.kind,
            position=tuple(a.pose.position),
            rotation=tuple(a.pose.rotation),
            velocity=tuple(a.velocity),
            acceleration=tuple(a.acceleration),
        ))
    return records


def derive_kinematics(positions, rate_hz: float, timestamps=None):
    """Backward-difference velocity/acceleration from a uniformly sampled
    position series.

    v[i] = (p[i] - p[i-1]) * rate, a[i] = (v[i] - v[i-1]) * rate, with the
    first-frame convention v[0] = 0 and a[0] = a[1]. Accepts a sequence of
    position tuples (any dimension); returns (velocities, accelerations) of
    the same length. When timestamps are supplied they must be uniformly
    spaced at 1/rate_hz.
    """
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    n = len(positions)
    if n == 0:
        raise ValueError("need at least one sample")
    if timestamps is not None:
        if len(timestamps) != n:
            raise ValueError("timestamps and positions differ in length")
        dt = 1.0 / rate_hz
        for i in range(1, n):
            if abs((timestamps[i] - timestamps[i - 1]) - dt) > 1e-9:
                raise ValueError(
                    f"non-uniform timestamps at index {i}: "
                    f"{timestamps[i] - timestamps[i - 1]:.6f} s != {dt:.6f} s")
    dim = len(positions[0])
    zero = tuple(0.0 for _ in range(dim))
    vel = [zero]
    for i in range(1, n):
        vel.append(tuple((positions[i][d] - positions[i - 1][d]) * rate_hz
                         for d in range(dim)))
    acc = [zero]
    for i in range(1, n):
        acc.append(tuple((vel[i][d] - vel[i - 1][d]) * rate_hz for d in range(dim)))
    if n >= 2:
        acc[0] = acc[1]
    return vel, acc


def finalize_scene(records: list[AgentFrameRecord], scenario: str, seed: int,
                   agents: list[AgentMeta] | tuple[AgentMeta, ...],
                   rate_hz: int = 20) -> SceneFile:
    """Assemble and validate a SceneFile from captured records.

    The (frame, agent) grid must be complete. Recordings shorter than 10 s
    are rejected; recordings longer than 30 s are truncated to 30 s and
    flagged.
    """
    agents = tuple(sorted(agents, key=lambda m: m.id))
    if not records:
        raise SceneTooShortError("no records captured; scenes must be at least 10 s")
    records = sorted(records, key=lambda r: (r.frame, r.agent_id))
    frames = records[-1].frame + 1
    expected_ids = [m.id for m in agents]
    missing = []
    by_key = {(r.frame, r.agent_id) for r in records}
    for f in range(frames):
        for aid in expected_ids:
            if (f, aid) not in by_key:
                missing.append((f, aid))
    if missing:
        raise SceneError(f"incomplete frame grid; missing (frame, agent) pairs: {missing[:10]}"
                         + ("..." if len(missing) > 10 else ""))
    if len(records) != frames * len(expected_ids):
        raise SceneError("duplicate records in frame grid")

    duration = frames / rate_hz
    if duration < MIN_SCENE_S:
        raise SceneTooShortError(
            f"recording is {duration:.2f} s; scenes must be between {MIN_SCENE_S:.0f} "
            f"and {MAX_SCENE_S:.0f} s long")
    truncated = False
    max_frames = int(MAX_SCENE_S * rate_hz)
    if duration > MAX_SCENE_S:
        records = [r for r in records if r.frame < max_frames]
        frames = max_frames
        truncated = True

    header = SceneHeader(scenario=scenario, seed=seed, rate_hz=rate_hz,
                         frames=frames, agents=agents, truncated=truncated)
    return SceneFile(header, records)


def resample_scene(scene: SceneFile, target_hz: int) -> SceneFile:
    """Decimate a scene to a lower rate by keeping every (rate/target)-th
    frame starting at frame 0. Kept records are bit-identical to the
    originals except that frame indices are renumbered; no interpolation."""
    rate = scene.header.rate_hz
    if target_hz <= 0 or rate % target_hz != 0:
        raise ValueError(f"target rate {target_hz} Hz does not divide {rate} Hz")
    stride = rate // target_hz
    kept = [replace(r, frame=r.frame // stride)
            for r in scene.records if r.frame % stride == 0]
    frames = scene.header.frames // stride + (1 if scene.header.frames % stride else 0)
    header = replace(scene.header, rate_hz=target_hz, frames=frames)
    return SceneFile(header, kept)


# ---------------------------------------------------------------------------
# Serialization


def _header_to_json(h: SceneHeader) -> str:
    obj = {
        "format": h.format,
        "scenario": h.scenario,
        "seed": h.seed,
        "rate_hz": h.rate_hz,
        "frames": h.frames,
        "truncated": h.truncated,
        "agents": [{"id": m.id, "kind": m.kind.value,
                    "shape": [m.shape.length, m.shape.width, m.shape.height]}
                   for m in h.agents],
    }
    return json.dumps(obj, separators=(",", ":"))


def _record_to_json(r: AgentFrameRecord) -> str:
    obj = {
        "frame": r.frame,
        "t": r.t,
        "id": r.agent_id,
        "pos": list(r.position),
        "rot": list(r.rotation),
        "vel": list(r.velocity),
        "acc": list(r.acceleration),
    }
    return json.dumps(obj, separators=(",", ":"))


def write_scene(scene: SceneFile) -> str:
    """Serialize a scene to its line-delimited text form."""
    lines = [_header_to_json(scene.header)]
    lines.extend(_record_to_json(r) for r in scene.records)
    return "\n".join(lines) + "\n"


def _parse_line(text: str, lineno: int) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"line {lineno}: malformed JSON ({e.msg})") from e
    if not isinstance(obj, dict):
        raise SceneError(f"line {lineno}: expected an object")
    return obj


def _vec3(obj, key, lineno) -> tuple[float, float, float]:
    v = obj.get(key)
    if not (isinstance(v, list) and len(v) == 3
            and all(isinstance(c, (int, float)) and math.isfinite(c) for c in v)):
        raise SceneError(f"line {lineno}: field '{key}' must be 3 finite numbers")
    return (float(v[0]), float(v[1]), float(v[2]))


def read_scene(text: str) -> SceneFile:
    """Parse and validate a scene file. Raises SceneError with the offending
    line number on malformed input or invariant violations."""
    lines = text.splitlines()
    if not lines:
        raise SceneError("empty scene file")
    head = _parse_line(lines[0], 1)
    if head.get("format") != SCENE_FORMAT:
        raise SceneError(f"line 1: unsupported format {head.get('format')!r}")
    rate = head.get("rate_hz")
    if rate not in SUPPORTED_RATES:
        raise SceneError(f"line 1: unsupported rate {rate!r} (must be one of {SUPPORTED_RATES})")
    frames = head.get("frames")
    if not isinstance(frames, int) or frames <= 0:
        raise SceneError("line 1: frames must be a positive integer")
    duration = frames / rate
    if not (MIN_SCENE_S <= duration <= MAX_SCENE_S):
        raise SceneError(f"line 1: duration {duration:.2f} s violates the "
                         f"[{MIN_SCENE_S:.0f}, {MAX_SCENE_S:.0f}] s bound")
    try:
        agents = tuple(AgentMeta(id=int(a["id"]), kind=AgentKind(a["kind"]),
                                 shape=Shape(*a["shape"]))
                       for a in head["agents"])
    except (KeyError, TypeError, ValueError) as e:
        raise SceneError(f"line 1: bad agent table ({e})") from e
    if len({m.id for m in agents}) != len(agents):
        raise SceneError("line 1: duplicate agent ids in header")

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = _parse_line(line, lineno)
        frame = obj.get("frame")
        aid = obj.get("id")
        t = obj.get("t")
        if not isinstance(frame, int) or frame < 0:
            raise SceneError(f"line {lineno}: bad frame index")
        if not isinstance(aid, int):
            raise SceneError(f"line {lineno}: bad agent id")
        if not isinstance(t, (int, float)) or not math.isfinite(t):
            raise SceneError(f"line {lineno}: bad timestamp")
        kind = next((m.kind for m in agents if m.id == aid), None)
        if kind is None:
            raise SceneError(f"line {lineno}: agent id {aid} not in header table")
        rot = _vec3(obj, "rot", lineno)
        if not -180.0 <= rot[0] < 180.0:
            raise SceneError(f"line {lineno}: yaw {rot[0]} outside [-180, 180)")
        records.append(AgentFrameRecord(
            frame=frame, t=float(t), agent_id=aid, kind=kind,
            position=_vec3(obj, "pos", lineno),
            rotation=rot,
            velocity=_vec3(obj, "vel", lineno),
            acceleration=_vec3(obj, "acc", lineno),
        ))

    if len(records) != frames * len(agents):
        raise SceneError(f"record count {len(records)} != frames x agents "
                         f"({frames} x {len(agents)})")
    keys = [(r.frame, r.agent_id) for r in records]
    if keys != sorted(set(keys)):
        raise SceneError("records not strictly sorted by (frame, agent_id)")

    header = SceneHeader(scenario=str(head.get("scenario", "")), seed=int(head.get("seed", 0)),
                         rate_hz=rate, frames=frames, agents=agents,
                         truncated=bool(head.get("truncated", False)))
    return SceneFile(header, records)


# ---------------------------------------------------------------------------
# Replay logs


@dataclass
class ReplayLog:
    """Per-frame command stream for deterministic re-simulation."""

    scenario: str
    seed: int
    entries: list[tuple[int, int, Command]] = field(default_factory=list)

    def append(self, frame: int, agent_id: int, cmd: Command) -> None:
        if self.entries and frame < self.entries[-1][0]:
            raise ValueError("replay frames must be non-decreasing")
        self.entries.append((frame, agent_id, cmd))

    def commands_for(self, agent_id: int) -> dict[int, Command]:
        return {frame: cmd for frame, aid, cmd in self.entries if aid == agent_id}

    @property
    def last_frame(self) -> int:
        return self.entries[-1][0] if self.entries else -1


def encode_command(cmd: Command) -> dict:
    if isinstance(cmd, DriveCommand):
        return {"kind": "drive", "accel": cmd.accel, "yaw_rate": cmd.yaw_rate}
    if isinstance(cmd, WalkCommand):
        return {"kind": "walk", "velocity": list(cmd.velocity), "yaw": cmd.yaw}
    if isinstance(cmd, RespawnCommand):
        return {"kind": "respawn", "position": list(cmd.position),
                "yaw": cmd.yaw, "speed": cmd.speed}
    raise TypeError(f"unknown command type {type(cmd).__name__}")


def decode_command(obj: dict) -> Command:
    kind = obj.get("kind")
    if kind == "drive":
        return DriveCommand(float(obj["accel"]), float(obj["yaw_rate"]))
    if kind == "walk":
        vx, vy = obj["velocity"]
        return WalkCommand((float(vx), float(vy)), float(obj["yaw"]))
    if kind == "respawn":
        x, y, z = obj["position"]
        return RespawnCommand((float(x), float(y), float(z)),
                              float(obj["yaw"]), float(obj["speed"]))
    raise SceneError(f"unknown command kind {kind!r}")


def write_replay(log: ReplayLog) -> str:
    lines = [json.dumps({"scenario": log.scenario, "seed": log.seed},
                        separators=(",", ":"))]
    for frame, aid, cmd in log.entries:
        lines.append(json.dumps({"frame": frame, "id": aid, "cmd": encode_command(cmd)},
                                separators=(",", ":")))
    return "\n".join(lines) + "\n"


def read_replay(text: str) -> ReplayLog:
    lines = text.splitlines()
    if not lines:
        raise SceneError("empty replay file")
    head = _parse_line(lines[0], 1)
    log = ReplayLog(scenario=str(head.get("scenario", "")), seed=int(head.get("seed", 0)))
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = _parse_line(line, lineno)
        try:
            log.append(int(obj["frame"]), int(obj["id"]), decode_command(obj["cmd"]))
        except (KeyError, TypeError, ValueError) as e:
            raise SceneError(f"line {lineno}: bad replay entry ({e})") from e
    return log
