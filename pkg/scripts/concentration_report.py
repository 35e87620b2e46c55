#!/usr/bin/env python3
"""Monte-Carlo check of the projection concentration claims.

Prints how the normalized inner product between two projected vectors
concentrates on their raw inner product as the projection width grows, and
how the relative spread of the projected norm shrinks.
"""

import argparse

import numpy as np

from gramcl.theory import inner_product_test, norm_concentration_test


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--M", type=int, nargs="+",
                        default=[64, 256, 1024, 4096])
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.Generator(np.random.PCG64(args.seed))
    f = rng.standard_normal(args.dim)
    f /= np.linalg.norm(f)
    g = rng.standard_normal(args.dim)
    g /= np.linalg.norm(g)

    ip = inner_product_test(args.dim, args.M, f, g, trials=args.trials,
                            epsilon=0.25, seed=args.seed)
    print(f"inner-product target f.f' = {ip.target:+.4f}")
    print(f"{'M':>6} {'mean':>9} {'std_err':>9} {'mad':>9} {'tail>0.25':>10}")
    for r in ip.rows():
        print(f"{r['M']:>6} {r['mean']:+9.4f} {r['std_error']:9.5f} "
              f"{r['mean_abs_deviation']:9.5f} {r['tail_fraction']:10.4f}")

    nc = norm_concentration_test(args.dim, args.M, f, trials=args.trials,
                                 seed=args.seed)
    print("\nprojected norm concentration")
    print(f"{'M':>6} {'mean_norm':>10} {'rel_std':>9}")
    for r in nc.rows():
        print(f"{r['M']:>6} {r['mean']:10.4f} {r['mean_abs_deviation']:9.5f}")


if __name__ == "__main__":
    main()
