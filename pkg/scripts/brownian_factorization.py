"""Factorize the modulus of continuity of Brownian motion on [0, 1/e].

Prints the knots, the scaling function g and the norm of the random factor,
and compares g with the classical c * sqrt(delta * ln(1/delta)) shape.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from factorable import io as fio
from factorable.factorize import build_factorization
from factorable.fields import simulate_brownian


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=10_000)
    ap.add_argument("--n", type=int, default=2049)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    ens = simulate_brownian(np.linspace(0, 1 / math.e, args.n), args.M, args.seed)
    res = build_factorization(ens)
    s = res.summary()
    print(f"usable knots {s['usable_knots']}, clamped {s['clamped']}")
    print(f"||tau|| = {s['tau_norm']:.4f}, ||tau0|| = {s['tau0_norm']:.6f}, "
          f"pathwise fraction {s['pathwise_fraction']:.4f}")
    print(f"{'n':>3} {'delta_n':>12} {'g(delta_n)':>12} {'sqrt(d ln 1/d)':>15}")
    for k, d in zip(res.n_index, res.deltas):
        levy = math.sqrt(d * math.log(1 / d)) if 0 < d < 1 else float("nan")
        print(f"{k:3d} {d:12.4e} {float(res.g(d)):12.4e} {levy:15.4e}")
    if args.out is not None:
        fio.write_factorization(args.out, res)
        fio.write_json(args.out / "factorization.json", fio.factorization_to_dict(res))
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
