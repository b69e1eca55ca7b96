"""Mutual overlap and steps-to-90% as the team grows.

Runs one planner over seeded procedural scenes at several team sizes and
reports how much of the explorable area pairs of agents covered twice by the
time the team first hit 90% coverage.

    python scripts/team_size_overlap.py --planner voronoi --sizes 2,3,4
"""

import argparse
import statistics
import sys

from coexplore.bench import run_episode
from coexplore.scenes import GeneratorParams, generate_scene

SCENE_PARAMS = GeneratorParams(rooms=(4, 6), side=(100, 130), room_side=(22, 40))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--planner", default="nearest")
    ap.add_argument("--sizes", default="2,3,4",
                    help="comma-separated team sizes (default: 2,3,4)")
    ap.add_argument("--scenes", type=int, default=10)
    ap.add_argument("--first-seed", type=int, default=200)
    ap.add_argument("--length", type=int, default=300)
    args = ap.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    print(f"{'agents':>6s} {'episodes':>9s} {'hit 90%':>8s} "
          f"{'mean steps':>11s} {'mean overlap':>13s}")
    for n in sizes:
        steps, overlaps = [], []
        for i in range(args.scenes):
            scene = generate_scene(args.first_seed + i, SCENE_PARAMS)
            rec = run_episode(scene, args.planner, str(n),
                              seed=3000 + args.first_seed + i, length=args.length)
            steps.append(rec.steps_to_90)
            if rec.overlap_at_90 is not None:
                overlaps.append(rec.overlap_at_90)
        overlap = (f"{statistics.mean(overlaps):13.4f}"
                   if overlaps else f"{'n/a':>13s}")
        print(f"{n:6d} {args.scenes:9d} {len(overlaps):8d} "
              f"{statistics.mean(steps):11.2f} {overlap}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
