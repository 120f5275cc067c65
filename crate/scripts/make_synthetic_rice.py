#!/usr/bin/env python3
"""Writes a synthetic CSV in the rice-production layout with a known frontier.

ln PROD = 1.0 + 0.35 ln AREA + 0.35 ln LABOR + 0.25 ln NPK + v - e,
v ~ N(0, 0.2^2), e ~ TN(0.2, 0.4^2) truncated at zero. Standard library only.
"""
import math
import random
import sys

THETA_X = (1.0, 0.35, 0.35, 0.25)
MU, SIGMA_V, SIGMA_E = 0.2, 0.2, 0.4


def truncated_normal(rng):
    while True:
        e = rng.gauss(MU, SIGMA_E)
        if e >= 0.0:
            return e


def main(path, n=344, seed=20240611):
    rng = random.Random(seed)
    with open(path, "w", newline="\n") as f:
        f.write("YEARDUM,FMERCODE,PROD,AREA,LABOR,NPK\n")
        for i in range(n):
            area = math.exp(rng.gauss(-0.3, 0.6))
            labor = math.exp(rng.gauss(4.5, 0.7))
            npk = math.exp(rng.gauss(4.8, 0.8))
            ln_y = (THETA_X[0] + THETA_X[1] * math.log(area) + THETA_X[2] * math.log(labor)
                    + THETA_X[3] * math.log(npk) + rng.gauss(0.0, SIGMA_V) - truncated_normal(rng))
            f.write(f"{i % 8 + 1},{i // 8 + 1},{math.exp(ln_y):.6f},{area:.6f},{labor:.6f},{npk:.6f}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/cli/tests/fixtures/synthetic_rice.csv")
