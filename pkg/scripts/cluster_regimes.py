"""Sweep border-master slave counts and match lengths through the scenario engine.

For each l in 0..5 a 3x3 cluster in a TFT sea is built so that the top-middle
master has exactly l slave neighbours; one generation is played with frozen
roles and the outcome is compared with the closed-form verdict. In this
layout a shrinking border master usually copies the centre master rather than
TFT, so "shrink" rows can show no loss.

    python3 scripts/cluster_regimes.py --rounds 50
"""

import argparse

import numpy as np

from csmsm import CANONICAL, Phenotype, StrategyKind
from csmsm.analysis import master_payoff, tft_payoff, thresholds
from csmsm.spatial import Scenario, init_scenario, step_generation

# kin neighbours of the border master at (4,3), in the order they turn into slaves
KIN = [(3, 3), (5, 3), (3, 4), (5, 4), (4, 4)]
REST = [(3, 5), (4, 5), (5, 5)]


def scenario(l):
    slaves = KIN[:l] + REST
    text = "grid 9 9\nbackground TFT\ncluster 3 3 3 3\nfreeze_roles on\n"
    return Scenario.parse(text + "".join(f"role {x} {y} SLAVE\n" for x, y in slaves))


def csmsm_mask(cells):
    return np.isin(cells, [Phenotype.MASTER, Phenotype.SLAVE])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=50)
    args = ap.parse_args()
    n, p = args.rounds, CANONICAL
    print(f"n={n}: T0={tft_payoff(0, n, p)} T1={tft_payoff(1, n, p)}")
    print("l  C1    verdict  converted lost")
    for l in range(6):
        g = init_scenario(scenario(l))
        res = step_generation(g, n, p)
        before, after = csmsm_mask(g.cells), csmsm_mask(res.grid.cells)
        verdict = thresholds(n, p, l=l).verdicts["border"]
        print(f"{l}  {master_payoff('BORDER', l, n, p):<5} {verdict:<8} {int((after & ~before).sum()):<9} "
              f"{int((before & ~after).sum())}")


if __name__ == "__main__":
    main()
