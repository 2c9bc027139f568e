"""Command-line entry point tying simulation, recording, resampling,
filtering, evaluation, and serving together.

Exit codes: 0 success, 2 configuration error, 3 validation error,
4 evaluation skipped every scene.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .metrics import (
    MetricsError,
    WindowError,
    aggregate,
    build_cv_predictions,
    evaluate_scene,
    filter_interactive,
    format_report,
    read_predictions,
)
from .recorder import (
    SCENE_SUFFIX,
    SceneError,
    read_replay,
    read_scene,
    resample_scene,
    write_scene,
)
from .runner import RunnerError, run_headless
from .scenarios import (
    ScenarioError,
    builtin_scenario,
    builtin_scenarios,
    load_scenario,
    rasterize_semantic_map,
    write_pgm,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_SKIP_ALL = 4


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _load_spec(ref: str):
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise CliError(f"scenario file {ref} not found", EXIT_CONFIG)
        return load_scenario(path.read_text(encoding="utf-8"))
    return builtin_scenario(ref)


def _scene_paths(ref: str) -> list[Path]:
    path = Path(ref)
    if path.is_dir():
        return sorted(path.glob(f"*{SCENE_SUFFIX}"))
    if path.is_file():
        return [path]
    raise CliError(f"no scene file or directory at {ref}", EXIT_CONFIG)


def _scene_stem(path: Path) -> str:
    return path.name[:-len(SCENE_SUFFIX)]


def cmd_run(args) -> int:
    spec = _load_spec(args.scenario)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(out)
    except (OSError, PermissionError) as e:
        raise CliError(f"output directory not writable: {e}", EXIT_CONFIG) from e

    walker_replay = None
    if args.walker != "scripted":
        if not args.walker.startswith("replay:"):
            raise CliError(f"--walker must be 'scripted' or 'replay:<file>', "
                           f"got {args.walker!r}", EXIT_CONFIG)
        replay_path = Path(args.walker.split(":", 1)[1])
        if not replay_path.is_file():
            raise CliError(f"replay file {replay_path} not found", EXIT_CONFIG)
        walker_replay = read_replay(replay_path.read_text(encoding="utf-8"))

    results = []
    for i in range(args.count):
        seed = args.seed + i
        result, scene, _ = run_headless(spec, seed, out_dir=out,
                                        walker_replay=walker_replay)
        results.append(result)
        status = result.scene_path.name if result.scene_path else \
            f"replay only ({result.invalid_reason})"
        print(f"seed {seed:>6}  {result.reason:<9} {result.duration_s:6.2f} s  "
              f"{result.frames:>4} frames  {status}")
    valid = [r for r in results if r.scene_valid]
    total_frames = sum(r.frames + 1 for r in valid)
    if valid:
        mean = sum(r.duration_s for r in valid) / len(valid)
        print(f"{len(valid)}/{len(results)} scenes, {total_frames} frames at 20 Hz "
              f"({total_frames // 10} at 2 Hz), mean duration {mean:.2f} s")
    return EXIT_OK if valid else EXIT_VALIDATION


def cmd_serve(args) -> int:
    import uvicorn
    from .server import create_app

    static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(out_dir=args.out, pace=True, static_dir=static)
    if args.scenario is not None:
        session = app.state.manager.create(args.scenario, args.seed)
        print(f"created session {session.id} for {args.scenario} "
              f"(roles: {session.roles_required}); connect to /ws/{session.id}")
    print(f"scene output: {args.out}; UI at http://{args.host}:{args.port}/ui/"
          if static.is_dir() else f"scene output: {args.out}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_resample(args) -> int:
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in [p for ref in args.scenes for p in _scene_paths(ref)]:
        scene = read_scene(path.read_text(encoding="utf-8"))
        low = resample_scene(scene, args.to_hz)
        target = (out or path.parent) / f"{_scene_stem(path)}@{args.to_hz}hz{SCENE_SUFFIX}"
        target.write_text(write_scene(low), encoding="utf-8", newline="\n")
        print(f"{path.name}: {scene.header.frames} frames @ {scene.header.rate_hz} Hz "
              f"-> {low.header.frames} @ {args.to_hz} Hz  {target.name}")
        count += 1
    if count == 0:
        raise CliError("no scene files found", EXIT_CONFIG)
    return EXIT_OK


def cmd_filter(args) -> int:
    paths = [p for ref in args.scenes for p in _scene_paths(ref)]
    if not paths:
        raise CliError("no scene files found", EXIT_CONFIG)
    scenes = [(p, read_scene(p.read_text(encoding="utf-8"))) for p in paths]
    kept_scenes = filter_interactive([s for _, s in scenes],
                                     d_max=args.dist, v_min=args.min_speed)
    kept_ids = {id(s) for s in kept_scenes}
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    kept_count = 0
    for path, scene in scenes:
        keep = id(scene) in kept_ids
        if keep:
            kept_count += 1
            print(f"keep  {path.name}")
            if out is not None:
                (out / path.name).write_text(write_scene(scene), encoding="utf-8",
                                             newline="\n")
        else:
            print(f"drop  {path.name}")
    print(f"kept {kept_count}/{len(scenes)} scenes "
          f"(d_max={args.dist} m, v_min={args.min_speed} m/s)")
    return EXIT_OK


def cmd_predict(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [p for ref in args.gt for p in _scene_paths(ref)]
    if not paths:
        raise CliError("no ground-truth scenes found", EXIT_CONFIG)
    written = 0
    for path in paths:
        scene = read_scene(path.read_text(encoding="utf-8"))
        try:
            pred = build_cv_predictions(scene, args.history_steps, args.horizon_steps,
                                        k=args.k, seed=args.seed)
        except WindowError as e:
            print(f"skip  {path.name}: {e}", file=sys.stderr)
            continue
        pred.scene = _scene_stem(path)
        from .metrics import write_predictions
        target = out / f"{pred.scene}.pred.jsonl"
        target.write_text(write_predictions(pred), encoding="utf-8", newline="\n")
        print(f"wrote {target.name} (start_step={pred.start_step})")
        written += 1
    return EXIT_OK if written else EXIT_SKIP_ALL


def cmd_eval(args) -> int:
    gt_dir = Path(args.gt)
    pred_paths = sorted(Path(args.pred).glob("*.pred.jsonl")) \
        if Path(args.pred).is_dir() else [Path(args.pred)]
    if not pred_paths:
        raise CliError(f"no prediction files in {args.pred}", EXIT_CONFIG)
    per_scene = []
    skipped = 0
    for path in pred_paths:
        try:
            pred = read_predictions(path.read_text(encoding="utf-8"),
                                    default_start_step=args.history_steps)
            if args.k is not None and pred.k != args.k:
                raise MetricsError(f"expected K={args.k}, file has K={pred.k}")
            gt_path = gt_dir / f"{pred.scene}{SCENE_SUFFIX}"
            if not gt_path.is_file():
                raise MetricsError(f"no ground-truth scene {gt_path.name}")
            scene = read_scene(gt_path.read_text(encoding="utf-8"))
            per_scene.append(evaluate_scene(pred, scene, cr_mode=args.cr_mode))
        except (MetricsError, SceneError) as e:
            skipped += 1
            print(f"skip  {path.name}: {e}", file=sys.stderr)
    report = aggregate(per_scene, skipped=skipped)
    print(format_report(report, model=args.model))
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8", newline="\n")
        print(f"report written to {args.report}")
    return EXIT_SKIP_ALL if not per_scene else EXIT_OK


def cmd_map(args) -> int:
    spec = _load_spec(args.scenario)
    grid = rasterize_semantic_map(spec.map, args.resolution)
    out = Path(args.out) if args.out else Path(f"{spec.id}.pgm")
    out.write_text(write_pgm(grid), encoding="utf-8", newline="\n")
    print(f"{spec.id}: {grid.width} x {grid.height} cells at "
          f"{args.resolution} m/cell -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curbsim",
        description="Deterministic pedestrian-vehicle interaction simulator, "
                    "scene recorder, and forecasting-metrics harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate scenarios headlessly and record scenes")
    p.add_argument("--scenario", default="jaywalk",
                   help="built-in id or scenario file path")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--count", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--out", default="scenes")
    p.add_argument("--walker", default="scripted",
                   help="'scripted' or 'replay:<replay file>' for the pedestrian slot")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="run the live session service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--out", default="scenes")
    p.add_argument("--scenario", default=None, help="pre-create a session")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("resample", help="decimate scenes to a lower rate")
    p.add_argument("scenes", nargs="+", help="scene files or directories")
    p.add_argument("--to-hz", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("filter", help="keep pedestrian-vehicle interactive scenes")
    p.add_argument("scenes", nargs="+", help="scene files or directories")
    p.add_argument("--dist", type=float, default=8.0)
    p.add_argument("--min-speed", type=float, default=0.5)
    p.add_argument("--out", default=None, help="copy kept scenes here")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("predict", help="constant-velocity baseline predictions")
    p.add_argument("gt", nargs="+", help="ground-truth scene files or directories")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history-steps", type=int, default=4)
    p.add_argument("--horizon-steps", type=int, default=6)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score prediction files against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth scene directory")
    p.add_argument("--pred", required=True, help="prediction file or directory")
    p.add_argument("--k", type=int, default=None, help="expected sample count")
    p.add_argument("--history-steps", type=int, default=4)
    p.add_argument("--horizon-steps", type=int, default=6)
    p.add_argument("--cr-mode", choices=("all", "best"), default="all")
    p.add_argument("--report", default=None, help="write the report object here")
    p.add_argument("--model", default="predictions", help="label for the table row")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("map", help="rasterize a scenario's semantic map to P2 PGM")
    p.add_argument("--scenario", required=True)
    p.add_argument("--resolution", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_map)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ScenarioError, SceneError, RunnerError, MetricsError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
