"""Replay closure and the live session service.

Part 1 (runs here): record a scripted session, re-simulate it purely from
its replay log, and verify the rebuilt scene is byte-identical.

Part 2 (instructions): drive the pedestrian yourself in a browser.

Run:  python3 demos/06_replay_and_live.py
"""

from curbsim import builtin_scenario, run_headless, run_replay, write_scene

spec = builtin_scenario("four_way_stop")
result, scene, log = run_headless(spec, seed=21)
print(f"recorded {spec.id} seed 21: {result.reason} after {result.duration_s:.2f} s, "
      f"{len(log.entries)} logged commands")

rebuilt = run_replay(spec, log)
identical = write_scene(rebuilt) == write_scene(scene)
print(f"replay re-simulation byte-identical: {identical}")
assert identical

print("""
To drive the pedestrian live instead:

  1. build the web client once:   cd frontend && npm install && npm run build
  2. start the service:           curbsim serve --port 8000 --out scenes
  3. open http://127.0.0.1:8000/ui/ in a browser, create a jaywalk session,
     join as the pedestrian, press Start, and walk with WASD (Shift sprints,
     Q/E turn). Sessions end on goal/timeout; scene + replay land in ./scenes.
""")
