"""20% CSMSM against 80% of each roster strategy; generation at which CSMSM reaches a level.

    python3 scripts/roster_invasion.py --side 100 --seeds 0-9 --out out/roster.csv
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from csmsm import CANONICAL, StrategyKind
from csmsm.spatial import RngPolicy, init_random, run

OPPONENTS = ("ALLC", "ALLD", "RANDOM", "TFT", "TFTT", "GRIM", "ADAPTIVE")


def seed_range(text):
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=100)
    ap.add_argument("--generations", type=int, default=200)
    ap.add_argument("--seeds", type=seed_range, default=seed_range("0-9"))
    ap.add_argument("--level", type=float, default=0.99)
    ap.add_argument("--opponents", nargs="+", default=list(OPPONENTS))
    ap.add_argument("--out", type=Path, default=Path("out/roster.csv"))
    args = ap.parse_args()

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["opponent", "seed", "reached_level_gen", "fixation_gen", "final_csmsm_frac", "slave_share_after_fix"])
        for opp in args.opponents:
            hits = 0
            for seed in args.seeds:
                rng = RngPolicy(seed)
                g = init_random(args.side, args.side, {"CSMSM": 0.2, opp: 0.8}, rng)
                res = run(g, args.generations, 50, CANONICAL, 0.7, rng, stop_on_fixation=True, extra_after_fixation=20)
                fr = [(s.generation, s.kind_fraction(StrategyKind.CSMSM)) for s in res.stats]
                reached = next((gen for gen, f in fr if f >= args.level), None)
                hits += reached is not None
                share = ""
                if res.fixation_kind is StrategyKind.CSMSM:
                    after = [s.slave_share for s in res.stats if s.generation >= res.fixation_generation]
                    share = f"{np.mean(after):.4f}" if after else ""
                w.writerow([opp, seed, reached, res.fixation_generation, f"{fr[-1][1]:.6f}", share])
            print(f"{opp}: reached {args.level} in {hits}/{len(args.seeds)} seeds")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
