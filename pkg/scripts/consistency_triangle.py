"""Per-scene agreement of the dense and sparse geometry paths with the top-down truth.

    python scripts/consistency_triangle.py --scenes 10 --height 512 --width 1024
"""

import argparse
import json

from panobev.config import PipelineConfig
from panobev.pipeline import consistency_triangle, lidar_triangle
from panobev.scene import random_scene, render_panorama


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=10)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--height", type=int, default=512)
    ap.add_argument("--width", type=int, default=1024)
    ap.add_argument("--json", action="store_true", help="emit one JSON object per scene")
    args = ap.parse_args()
    cfg = PipelineConfig(pano_height=args.height, pano_width=args.width)
    print(f"{'seed':>4} {'boxes':>5} {'dense':>8} {'cells':>7} {'lidar':>8} {'cells':>7}")
    for seed in range(args.first_seed, args.first_seed + args.scenes):
        scene = random_scene(seed)
        ren = render_panorama(scene, cfg.pano_height, cfg.pano_width)
        dense = consistency_triangle(scene, cfg, render=ren)
        sparse = lidar_triangle(scene, cfg)
        if args.json:
            print(json.dumps({"seed": seed, "dense": dense.agreement, "dense_cells": dense.cells,
                              "lidar": sparse.agreement, "lidar_cells": sparse.cells}))
        else:
            print(f"{seed:>4} {len(scene.boxes):>5} {dense.agreement:>8.4f} {dense.cells:>7} "
                  f"{sparse.agreement:>8.4f} {sparse.cells:>7}")


if __name__ == "__main__":
    main()
