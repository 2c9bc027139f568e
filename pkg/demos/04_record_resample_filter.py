"""The dataset pipeline end to end: record 20 Hz scenes, decimate to 2 Hz,
and keep only scenes with real pedestrian-vehicle interaction.

Run:  python3 demos/04_record_resample_filter.py
"""

from curbsim import builtin_scenario, filter_interactive, resample_scene, run_headless

scenes = []
for scenario_id in ("jaywalk", "parked_cars"):
    spec = builtin_scenario(scenario_id)
    for seed in (1, 2):
        _, scene, _ = run_headless(spec, seed)
        scenes.append(scene)
        print(f"recorded {scenario_id} seed {seed}: {scene.header.frames} frames "
              f"({scene.duration_s:.2f} s at {scene.header.rate_hz} Hz)")

low_rate = [resample_scene(s, 2) for s in scenes]
print(f"\nresampled to 2 Hz: {[s.header.frames for s in low_rate]} frames per scene")
total = sum(s.header.frames * len(s.header.agents) for s in low_rate)
print(f"total 2 Hz records: {total}")

kept = filter_interactive(low_rate, d_max=8.0, v_min=0.5)
print(f"\ninteraction filter (8 m, 0.5 m/s) kept {len(kept)}/{len(low_rate)} scenes")
for s in kept:
    print(f"  kept: {s.header.scenario} seed {s.header.seed}")
