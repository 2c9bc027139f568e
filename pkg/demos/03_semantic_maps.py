"""Rasterize every built-in scenario map to a bird's-eye semantic grid and
export plain P2 graymaps (off-map 0, sidewalk 64, drivable 128, parking 160,
crosswalk 200).

Run:  python3 demos/03_semantic_maps.py
"""

from pathlib import Path

from curbsim import builtin_scenarios, rasterize_semantic_map, write_pgm
from curbsim.scenarios import CLASS_GRAY

out = Path("demo_maps")
out.mkdir(exist_ok=True)

for spec in builtin_scenarios():
    grid = rasterize_semantic_map(spec.map, resolution=0.25)
    counts = grid.class_counts()
    area = {code: n * grid.resolution ** 2 for code, n in counts.items()}
    target = out / f"{spec.id}.pgm"
    target.write_text(write_pgm(grid), encoding="utf-8")
    print(f"{spec.id}: {grid.width} x {grid.height} cells -> {target}")
    for code, gray in CLASS_GRAY.items():
        if code in area:
            name = {0: "off-map", 1: "sidewalk", 2: "drivable",
                    3: "parking", 4: "crosswalk"}[code]
            print(f"    {name:<9} gray {gray:>3}: {area[code]:8.1f} m^2")
