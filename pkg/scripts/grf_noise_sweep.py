"""Detected gait cycles as per-cell insole noise grows."""

import argparse

from lvlkit.gait import analyze_gait
from lvlkit.model import Side
from lvlkit.sim import NoiseSpec, SimConfig, Stand, Walk, generate_session


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--walk-s", type=float, default=30.0)
    ap.add_argument("--levels", type=float, nargs="+", default=[0.0, 0.5, 0.9, 1.0, 1.1, 1.2, 1.4])
    args = ap.parse_args()
    speeds = ("slow", "normal", "fast")
    print("grf_n " + " ".join(f"{s:>7}" for s in speeds) + "   (simulated cycles, both feet, in parentheses)")
    for n in args.levels:
        cells = []
        for speed in speeds:
            cfg = SimConfig(seed=args.seed, script=(Stand(10.0), Walk(args.walk_s, speed), Stand(5.0)),
                            noise=NoiseSpec(2.0, 2.0, n))
            sim = generate_session(cfg)
            g = analyze_gait(sim.insole[Side.LEFT], sim.insole[Side.RIGHT])
            truth = sum(len(v) for v in sim.truth.cycles.values())
            cells.append(f"{len(g.cycles):3d}({truth:3d})")
        print(f"{n:5.2f} " + " ".join(cells))


if __name__ == "__main__":
    main()
