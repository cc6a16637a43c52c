"""Anchor detection rates against arm-swing amplitude and walking speed."""

import argparse

from lvlkit.experiments import detection_rates
from lvlkit.kvlu import COMBOS
from lvlkit.sim import SimConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[2, 3, 4, 5, 6, 8, 10, 15, 22])
    args = ap.parse_args()
    print("speed   amplitude " + " ".join(f"{c:>7}" for c in COMBOS))
    for amp in args.amplitudes:
        rates = detection_rates(amp, "normal", seed=args.seed)
        print(f"normal {amp:10.1f} " + " ".join(f"{rates[c]:7.1f}" for c in COMBOS))
    for speed, amp in SimConfig().arm_swing.items():
        rates = detection_rates(amp, speed, seed=args.seed)
        print(f"{speed:6} {amp:10.1f} " + " ".join(f"{rates[c]:7.1f}" for c in COMBOS))


if __name__ == "__main__":
    main()
