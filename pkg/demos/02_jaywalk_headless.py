"""Run the built-in jaywalk scenario headlessly at a few seeds and look at
what the scripted pedestrian and the yielding traffic produce.

Run:  python3 demos/02_jaywalk_headless.py
"""

import math

from curbsim import builtin_scenario, run_headless
from curbsim.core import AgentKind

spec = builtin_scenario("jaywalk")
print(f"scenario {spec.id}: {len(spec.agents)} agents, "
      f"timeout {spec.termination.timeout_s} s\n")

for seed in (1, 2, 3):
    result, scene, log = run_headless(spec, seed, out_dir="demo_scenes")
    ped_track = scene.agent_records(1)
    crossing_started = next((r.t for r in ped_track if r.position[1] > -3.5), None)
    min_gap = math.inf
    for r in scene.records:
        if r.kind is not AgentKind.PEDESTRIAN:
            continue
        for other in scene.records:
            if other.frame == r.frame and other.kind is AgentKind.CAR:
                d = math.hypot(r.position[0] - other.position[0],
                               r.position[1] - other.position[1])
                min_gap = min(min_gap, d)
    print(f"seed {seed}: ended on {result.reason} at {result.duration_s:.2f} s, "
          f"stepped off the curb at t={crossing_started:.2f} s, "
          f"closest car approach {min_gap:.2f} m")
    print(f"  scene -> {result.scene_path}")
    print(f"  replay -> {result.replay_path}")
