"""Half CSMSM, half TFT on a torus: fractions and payoffs per generation, several seeds.

    python3 scripts/tft_invasion.py --side 100 --seeds 0-9 --out out/tft_invasion.csv
"""

import argparse
import csv
from pathlib import Path

from csmsm import CANONICAL, StrategyKind
from csmsm.spatial import RngPolicy, init_random, run


def seed_range(text):
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=100)
    ap.add_argument("--generations", type=int, default=40)
    ap.add_argument("--seeds", type=seed_range, default=seed_range("0-9"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("out/tft_invasion.csv"))
    args = ap.parse_args()

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "generation", "csmsm_frac", "tft_frac", "master_ppm", "slave_ppm", "tft_ppm"])
        for seed in args.seeds:
            rng = RngPolicy(seed)
            g = init_random(args.side, args.side, {"CSMSM": 0.5, "TFT": 0.5}, rng)
            res = run(g, args.generations, 50, CANONICAL, 0.7, rng, workers=args.workers)
            for s in res.stats:
                a = s.avg_payoff_per_move
                w.writerow([seed, s.generation, f"{s.kind_fraction(StrategyKind.CSMSM):.6f}",
                            f"{s.kind_fraction(StrategyKind.TFT):.6f}",
                            f"{a['CSMSM_MASTER']:.4f}", f"{a['CSMSM_SLAVE']:.4f}", f"{a['TFT']:.4f}"])
            extinct = next((s.generation for s in res.stats if s.kind_fraction(StrategyKind.TFT) == 0), None)
            print(f"seed {seed}: TFT extinct at generation {extinct}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
