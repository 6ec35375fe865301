"""Grid search over the sequence parameters (nu, theta) for a small g(delta_ref).

A heuristic only: different reference points favour different sequences.
"""

import argparse
import math

import numpy as np

from factorable.factorize import tune_sequences
from factorable.fields import simulate_brownian


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=2000)
    ap.add_argument("--n", type=int, default=513)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--delta-ref", type=float, default=1e-3)
    args = ap.parse_args()

    ens = simulate_brownian(np.linspace(0, 1 / math.e, args.n), args.M, args.seed)
    out = tune_sequences(ens, args.delta_ref, nu_grid=(0.5, 1.0, 2.0), theta_grid=(0.25, 0.5, 1.0, 2.0))
    print(f"{'nu':>5} {'theta':>6} {'g(delta_ref)':>13}")
    for row in out["table"]:
        print(f"{row['nu']:5.2f} {row['theta_param']:6.2f} {row['g_ref']:13.4e}")
    b = out["best"]
    print(f"best: nu={b['nu']}, theta={b['theta_param']}, g={b['g_ref']:.4e}")


if __name__ == "__main__":
    main()
