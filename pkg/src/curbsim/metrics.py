"""Trajectory-forecasting evaluation: marginal and joint top-K displacement
errors, collision rate over predicted futures, interactive-scene filtering,
and a constant-velocity baseline predictor.

Trajectories are (T, 2) float arrays at a uniform rate (2 Hz by default).
Sample-index ties always break toward the lowest index, so reports are
deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import AgentKind, Pose, Shape, obb_overlap
from .recorder import SceneFile


class MetricsError(Exception):
    pass


class WindowError(MetricsError):
    """Ground truth too short for the requested history/horizon window."""


def _as_traj(traj) -> np.ndarray:
    arr = np.asarray(traj, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise MetricsError(f"trajectory must be (T, 2) with T >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise MetricsError("trajectory has non-finite coordinates")
    return arr


def ade(pred, gt) -> float:
    """Mean Euclidean distance between corresponding trajectory points."""
    p, g = _as_traj(pred), _as_traj(gt)
    if p.shape != g.shape:
        raise MetricsError(f"length mismatch: {p.shape[0]} vs {g.shape[0]}")
    return float(np.linalg.norm(p - g, axis=1).mean())


def fde(pred, gt) -> float:
    """Euclidean distance at the final timestep."""
    p, g = _as_traj(pred), _as_traj(gt)
    if p.shape != g.shape:
        raise MetricsError(f"length mismatch: {p.shape[0]} vs {g.shape[0]}")
    return float(np.linalg.norm(p[-1] - g[-1]))


@dataclass(frozen=True)
class MarginalResult:
    min_ade: float
    min_fde: float
    ade_index: int
    fde_index: int


def min_marginal(samples, gt) -> MarginalResult:
    """Top-K minimum ADE/FDE over one agent's K sampled futures. The
    minimizing sample may differ between ADE and FDE."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise MetricsError("samples must be a non-empty (K, T, 2) array")
    ades = np.array([ade(s, gt) for s in arr])
    fdes = np.array([fde(s, gt) for s in arr])
    ai = int(np.argmin(ades))   # argmin returns the lowest index on ties
    fi = int(np.argmin(fdes))
    return MarginalResult(float(ades[ai]), float(fdes[fi]), ai, fi)


@dataclass(frozen=True)
class JointResult:
    min_jade: float
    min_jfde: float
    jade_index: int
    jfde_index: int


def min_joint(samples_by_agent: dict, gt_by_agent: dict) -> JointResult:
    """Scene-level joint errors: one sample index is chosen for the whole
    scene; per-sample error is the mean over agents, then minimized over k.
    Agents cannot be mixed and matched across samples."""
    if not samples_by_agent:
        raise MetricsError("no agents")
    ks = {np.asarray(s).shape[0] for s in samples_by_agent.values()}
    if len(ks) != 1:
        raise MetricsError(f"ragged sample counts across agents: {sorted(ks)}")
    k = ks.pop()
    agents = sorted(samples_by_agent)
    jade = np.zeros(k)
    jfde = np.zeros(k)
    for aid in agents:
        samples = np.asarray(samples_by_agent[aid], dtype=float)
        gt = gt_by_agent[aid]
        jade += np.array([ade(s, gt) for s in samples])
        jfde += np.array([fde(s, gt) for s in samples])
    jade /= len(agents)
    jfde /= len(agents)
    ji = int(np.argmin(jade))
    fi = int(np.argmin(jfde))
    return JointResult(float(jade[ji]), float(jfde[fi]), ji, fi)


def trajectory_headings(traj) -> np.ndarray:
    """Per-step headings (degrees) from consecutive points. The first step
    takes the first segment's direction; stationary steps keep the previous
    heading; a fully stationary trajectory faces 0 degrees."""
    arr = _as_traj(traj)
    n = arr.shape[0]
    headings = np.zeros(n)
    diffs = np.diff(arr, axis=0)
    first = 0.0
    for d in diffs:
        if abs(d[0]) > 1e-9 or abs(d[1]) > 1e-9:
            first = math.degrees(math.atan2(d[1], d[0]))
            break
    headings[0] = first
    for t in range(1, n):
        d = arr[t] - arr[t - 1]
        if abs(d[0]) > 1e-9 or abs(d[1]) > 1e-9:
            headings[t] = math.degrees(math.atan2(d[1], d[0]))
        else:
            headings[t] = headings[t - 1]
    return headings


@dataclass(frozen=True)
class CollisionStats:
    collisions: int      # (agent, sample) pairs that collide
    total: int           # (agent, sample) pairs evaluated

    @property
    def rate(self) -> float:
        return self.collisions / self.total if self.total else 0.0


def collision_counts(samples_by_agent: dict, shapes: dict, mode: str = "all",
                     joint_index: int | None = None) -> CollisionStats:
    """Count colliding (agent, sample) predictions.

    For each joint sample k, agent a collides if at any timestep its
    footprint (shape + heading derived from consecutive predicted points)
    overlaps any other agent's footprint in the SAME sample k. Mode "all"
    evaluates every sample; "best" only the scene's joint-ADE minimizer."""
    agents = sorted(samples_by_agent)
    for aid in agents:
        if aid not in shapes:
            raise MetricsError(f"missing shape for agent {aid}")
    if len(agents) == 0:
        return CollisionStats(0, 0)
    arrs = {aid: np.asarray(samples_by_agent[aid], dtype=float) for aid in agents}
    k_total = arrs[agents[0]].shape[0]
    horizon = arrs[agents[0]].shape[1]
    if mode == "best":
        if joint_index is None:
            raise MetricsError("mode 'best' needs the joint sample index")
        sample_indices = [joint_index]
    elif mode == "all":
        sample_indices = list(range(k_total))
    else:
        raise MetricsError(f"unknown collision-rate mode {mode!r}")

    headings = {aid: [trajectory_headings(arrs[aid][k]) for k in range(k_total)]
                for aid in agents}
    collisions = 0
    for k in sample_indices:
        collided = {aid: False for aid in agents}
        for t in range(horizon):
            for i, a in enumerate(agents):
                for b in agents[i + 1:]:
                    if collided[a] and collided[b]:
                        continue
                    pa = Pose((arrs[a][k, t, 0], arrs[a][k, t, 1], 0.0),
                              (headings[a][k][t], 0.0, 0.0))
                    pb = Pose((arrs[b][k, t, 0], arrs[b][k, t, 1], 0.0),
                              (headings[b][k][t], 0.0, 0.0))
                    if obb_overlap(pa, shapes[a], pb, shapes[b]):
                        collided[a] = True
                        collided[b] = True
        collisions += sum(collided.values())
    return CollisionStats(collisions, len(agents) * len(sample_indices))


# ---------------------------------------------------------------------------
# Scene access helpers


def scene_tracks(scene: SceneFile) -> dict[int, np.ndarray]:
    """Per-agent (frames, 2) position arrays in frame order."""
    ids = [m.id for m in scene.header.agents]
    frames = scene.header.frames
    tracks = {aid: np.zeros((frames, 2)) for aid in ids}
    for r in scene.records:
        tracks[r.agent_id][r.frame] = (r.position[0], r.position[1])
    return tracks


def scene_speeds(scene: SceneFile) -> dict[int, np.ndarray]:
    ids = [m.id for m in scene.header.agents]
    frames = scene.header.frames
    speeds = {aid: np.zeros(frames) for aid in ids}
    for r in scene.records:
        speeds[r.agent_id][r.frame] = math.hypot(r.velocity[0], r.velocity[1])
    return speeds


def scene_is_interactive(scene: SceneFile, d_max: float = 8.0,
                         v_min: float = 0.5) -> bool:
    """True when some pedestrian and some vehicle are within d_max of each
    other at a timestep where the vehicle's planar speed exceeds v_min."""
    peds = [m.id for m in scene.header.agents if m.kind is AgentKind.PEDESTRIAN]
    cars = [m.id for m in scene.header.agents if m.kind is AgentKind.CAR]
    if not peds or not cars:
        return False
    tracks = scene_tracks(scene)
    speeds = scene_speeds(scene)
    for pid in peds:
        for cid in cars:
            dist = np.linalg.norm(tracks[pid] - tracks[cid], axis=1)
            if bool(np.any((dist <= d_max) & (speeds[cid] > v_min))):
                return True
    return False


def filter_interactive(scenes, d_max: float = 8.0, v_min: float = 0.5):
    """Keep scenes containing at least one pedestrian-vehicle interaction."""
    if d_max <= 0:
        raise MetricsError("d_max must be positive")
    if v_min < 0:
        raise MetricsError("v_min must be >= 0")
    return [s for s in scenes if scene_is_interactive(s, d_max, v_min)]


# ---------------------------------------------------------------------------
# Constant-velocity baseline


def constant_velocity_baseline(history, horizon_steps: int, k: int,
                               seed: int) -> np.ndarray:
    """K sampled futures from linear extrapolation of the last step.

    Sample 0 extrapolates the final velocity; samples 1..K-1 rotate that
    velocity by seed-derived offsets drawn uniformly from +/-20 degrees."""
    hist = _as_traj(history)
    if horizon_steps < 1 or k < 1:
        raise MetricsError("horizon_steps and k must be >= 1")
    step = hist[-1] - hist[-2] if hist.shape[0] >= 2 else np.zeros(2)
    rng = np.random.default_rng(seed)
    offsets = np.concatenate(([0.0], rng.uniform(-20.0, 20.0, size=k - 1)))
    out = np.zeros((k, horizon_steps, 2))
    for i, deg in enumerate(offsets):
        rad = math.radians(deg)
        c, s = math.cos(rad), math.sin(rad)
        d = np.array([step[0] * c - step[1] * s, step[0] * s + step[1] * c])
        out[i] = hist[-1] + np.outer(np.arange(1, horizon_steps + 1), d)
    return out


# ---------------------------------------------------------------------------
# Prediction sets and files


@dataclass
class PredictionSet:
    """K candidate futures per agent for one scene. start_step is the ground
    truth index of the first predicted point."""

    scene: str
    rate_hz: int
    horizon_steps: int
    k: int
    start_step: int
    samples: dict[int, np.ndarray] = field(default_factory=dict)  # aid -> (K, T, 2)

    def validate(self) -> None:
        for aid, arr in self.samples.items():
            arr = np.asarray(arr)
            if arr.shape != (self.k, self.horizon_steps, 2):
                raise MetricsError(
                    f"agent {aid}: samples shape {arr.shape} != "
                    f"({self.k}, {self.horizon_steps}, 2)")


def write_predictions(pred: PredictionSet) -> str:
    pred.validate()
    lines = [json.dumps({"scene": pred.scene, "rate_hz": pred.rate_hz,
                         "horizon_steps": pred.horizon_steps, "k": pred.k,
                         "start_step": pred.start_step}, separators=(",", ":"))]
    for aid in sorted(pred.samples):
        arr = np.asarray(pred.samples[aid])
        for k in range(pred.k):
            lines.append(json.dumps(
                {"id": aid, "k": k, "traj": [[float(x), float(y)] for x, y in arr[k]]},
                separators=(",", ":")))
    return "\n".join(lines) + "\n"


def read_predictions(text: str, default_start_step: int = 4) -> PredictionSet:
    lines = text.splitlines()
    if not lines:
        raise MetricsError("empty prediction file")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise MetricsError(f"line 1: malformed JSON ({e.msg})") from e
    pred = PredictionSet(scene=str(head["scene"]), rate_hz=int(head["rate_hz"]),
                         horizon_steps=int(head["horizon_steps"]), k=int(head["k"]),
                         start_step=int(head.get("start_step", default_start_step)))
    raw: dict[int, dict[int, list]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            raw.setdefault(int(obj["id"]), {})[int(obj["k"])] = obj["traj"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise MetricsError(f"line {lineno}: bad prediction entry ({e})") from e
    for aid, by_k in raw.items():
        if sorted(by_k) != list(range(pred.k)):
            raise MetricsError(f"agent {aid}: expected samples 0..{pred.k - 1}, "
                               f"got {sorted(by_k)}")
        pred.samples[aid] = np.array([by_k[k] for k in range(pred.k)], dtype=float)
    pred.validate()
    return pred


def choose_interactive_split(scene: SceneFile, history_steps: int,
                             horizon_steps: int, d_near: float = 10.0,
                             ped_v_min: float = 0.3) -> int:
    """Ground-truth index where predictions should start: the first step at
    which a moving pedestrian is near a moving vehicle (the interaction
    moment), clamped so history and horizon both fit. Falls back to the
    window midpoint for non-interactive scenes."""
    frames = scene.header.frames
    lo = history_steps
    hi = frames - horizon_steps
    if hi < lo:
        raise WindowError(
            f"scene {scene.header.scenario}: {frames} steps cannot fit "
            f"history {history_steps} + horizon {horizon_steps}")
    tracks = scene_tracks(scene)
    speeds = scene_speeds(scene)
    peds = [m.id for m in scene.header.agents if m.kind is AgentKind.PEDESTRIAN]
    cars = [m.id for m in scene.header.agents if m.kind is AgentKind.CAR]
    for t in range(frames):
        for pid in peds:
            if speeds[pid][t] <= ped_v_min:
                continue
            for cid in cars:
                if speeds[cid][t] > 0.5 and \
                        np.linalg.norm(tracks[pid][t] - tracks[cid][t]) <= d_near:
                    return min(max(t, lo), hi)
    return (lo + hi) // 2


def build_cv_predictions(scene: SceneFile, history_steps: int, horizon_steps: int,
                         k: int, seed: int, start_step: int | None = None) -> PredictionSet:
    """Constant-velocity baseline predictions for every agent of a scene."""
    if start_step is None:
        start_step = choose_interactive_split(scene, history_steps, horizon_steps)
    frames = scene.header.frames
    if start_step < 1 or start_step + horizon_steps > frames:
        raise WindowError(f"split {start_step} leaves no room for the horizon")
    tracks = scene_tracks(scene)
    pred = PredictionSet(scene=scene.header.scenario, rate_hz=scene.header.rate_hz,
                         horizon_steps=horizon_steps, k=k, start_step=start_step)
    for meta in scene.header.agents:
        history = tracks[meta.id][max(0, start_step - history_steps):start_step]
        pred.samples[meta.id] = constant_velocity_baseline(
            history, horizon_steps, k, seed ^ (meta.id * 0x9E3779B1) & 0x7FFFFFFF)
    return pred


# ---------------------------------------------------------------------------
# Corpus evaluation


@dataclass
class SceneMetrics:
    scene: str
    n_agents: int
    sum_min_ade: float
    sum_min_fde: float
    min_jade: float
    min_jfde: float
    collisions: CollisionStats


@dataclass
class MetricsReport:
    min_ade: float
    min_fde: float
    min_jade: float
    min_jfde: float
    collision_rate: float
    scenes: int
    agents: int
    skipped: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "minADE": self.min_ade, "minFDE": self.min_fde,
            "minJADE": self.min_jade, "minJFDE": self.min_jfde,
            "CR": self.collision_rate,
            "scenes": self.scenes, "agents": self.agents, "skipped": self.skipped,
        }, indent=2) + "\n"


def gt_futures(scene: SceneFile, start_step: int, horizon_steps: int) -> dict[int, np.ndarray]:
    frames = scene.header.frames
    if start_step + horizon_steps > frames:
        raise WindowError(
            f"scene {scene.header.scenario}: horizon [{start_step}, "
            f"{start_step + horizon_steps}) exceeds {frames} ground-truth steps")
    tracks = scene_tracks(scene)
    return {aid: tr[start_step:start_step + horizon_steps] for aid, tr in tracks.items()}


def evaluate_scene(pred: PredictionSet, scene: SceneFile,
                   cr_mode: str = "all") -> SceneMetrics:
    if pred.rate_hz != scene.header.rate_hz:
        raise MetricsError(f"rate mismatch: predictions {pred.rate_hz} Hz, "
                           f"scene {scene.header.rate_hz} Hz")
    pred.validate()
    gts = gt_futures(scene, pred.start_step, pred.horizon_steps)
    missing = set(pred.samples) - set(gts)
    if missing:
        raise MetricsError(f"predictions for unknown agents {sorted(missing)}")
    sum_ade = sum_fde = 0.0
    for aid, samples in pred.samples.items():
        res = min_marginal(samples, gts[aid])
        sum_ade += res.min_ade
        sum_fde += res.min_fde
    joint = min_joint(pred.samples, gts)
    shapes = {m.id: m.shape for m in scene.header.agents}
    stats = collision_counts(pred.samples, shapes, mode=cr_mode,
                             joint_index=joint.jade_index)
    return SceneMetrics(scene=pred.scene, n_agents=len(pred.samples),
                        sum_min_ade=sum_ade, sum_min_fde=sum_fde,
                        min_jade=joint.min_jade, min_jfde=joint.min_jfde,
                        collisions=stats)


def aggregate(scene_metrics: list[SceneMetrics], skipped: int = 0) -> MetricsReport:
    """Agent-weighted aggregation across scenes."""
    agents = sum(m.n_agents for m in scene_metrics)
    if agents == 0:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, skipped)
    collisions = sum(m.collisions.collisions for m in scene_metrics)
    pairs = sum(m.collisions.total for m in scene_metrics)
    return MetricsReport(
        min_ade=sum(m.sum_min_ade for m in scene_metrics) / agents,
        min_fde=sum(m.sum_min_fde for m in scene_metrics) / agents,
        min_jade=sum(m.min_jade * m.n_agents for m in scene_metrics) / agents,
        min_jfde=sum(m.min_jfde * m.n_agents for m in scene_metrics) / agents,
        collision_rate=collisions / pairs if pairs else 0.0,
        scenes=len(scene_metrics),
        agents=agents,
        skipped=skipped,
    )


def format_report(report: MetricsReport, model: str = "predictions") -> str:
    """Fixed-width table with the standard metric column names."""
    header = (f"{'Model':<24} {'minADE[m]':>10} {'minFDE[m]':>10} "
              f"{'minJADE[m]':>11} {'minJFDE[m]':>11} {'CR mean[-]':>11}")
    row = (f"{model:<24} {report.min_ade:>10.4f} {report.min_fde:>10.4f} "
           f"{report.min_jade:>11.4f} {report.min_jfde:>11.4f} "
           f"{report.collision_rate:>11.4f}")
    tail = (f"scenes evaluated: {report.scenes}   agents: {report.agents}   "
            f"skipped: {report.skipped}")
    return "\n".join((header, row, tail))
