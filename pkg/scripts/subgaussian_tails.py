"""Empirical survival function of the normalized random factor under Phi_G.

Compares P(tau0 > u) with exp(-u^2/2) and the bound 2 exp(-u^2/2) that
follows from ||tau0||_{Phi_G} = 1 by Markov's inequality.
"""

import argparse
import math

import numpy as np

from factorable.factorize import build_factorization
from factorable.fields import simulate_brownian
from factorable.orlicz import LuxemburgNorm, OrliczFunction


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=100_000)
    ap.add_argument("--n", type=int, default=129)
    ap.add_argument("--seed", type=int, default=2025)
    args = ap.parse_args()

    ens = simulate_brownian(np.linspace(0, 1 / math.e, args.n), args.M, args.seed)
    res = build_factorization(ens, norm=LuxemburgNorm(OrliczFunction.gaussian()))
    tau0 = res.tau0
    print(f"tau0: mean {tau0.mean():.4f}, sd {tau0.std():.4f}, max {tau0.max():.4f}")
    print(f"{'u':>5} {'P(tau0>u)':>11} {'exp(-u^2/2)':>12} {'2exp(-u^2/2)':>13}")
    for u in np.arange(0.5, 3.01, 0.25):
        p = float(np.mean(tau0 > u))
        g = math.exp(-u * u / 2)
        print(f"{u:5.2f} {p:11.5f} {g:12.5f} {min(1.0, 2 * g):13.5f}")


if __name__ == "__main__":
    main()
