"""Metric-entropy bound versus the empirical L2 modulus of Brownian motion."""

import argparse
import math

import numpy as np

from factorable.bounds import entropy_integral_bound
from factorable.fields import simulate_brownian
from factorable.metric import natural_distance
from factorable.modulus import theta_function
from factorable.orlicz import LuxemburgNorm, OrliczFunction, PsiFunction


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, default=10_000)
    ap.add_argument("--n", type=int, default=257)
    ap.add_argument("--seed", type=int, default=2026)
    args = ap.parse_args()

    ens = simulate_brownian(np.linspace(0, 1 / math.e, args.n), args.M, args.seed)
    psi = PsiFunction.degenerate(2.0)
    d_xi = natural_distance(ens, psi)
    # deltas are radii in the natural distance, whose smallest value is sqrt(h)
    deltas = np.geomspace(0.04, 0.6, 12)
    bound = entropy_integral_bound(d_xi, psi, deltas)
    emp = theta_function(ens, d_xi, deltas, LuxemburgNorm(OrliczFunction.power(2))).y
    print(f"{'delta':>10} {'empirical':>11} {'bound':>11} {'ratio':>8}")
    for d, e, b in zip(deltas, emp, bound):
        print(f"{d:10.4e} {e:11.4e} {b:11.4e} {b / e if e > 0 else math.inf:8.1f}")


if __name__ == "__main__":
    main()
