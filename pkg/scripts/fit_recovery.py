"""Sample -> fit -> compare for a grid of stable laws.

    python3 scripts/fit_recovery.py --n 100000
"""
import argparse

import numpy as np

from gazewalk.stable import AlphaStableParams, fit_alpha_stable, sample_alpha_stable


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(" alpha   beta  gamma |  alpha_hat  beta_hat  gamma_hat  delta_hat")
    for alpha in (0.8, 1.0, 1.2, 1.5, 1.8, 2.0):
        for beta, gamma in ((0.0, 1.0), (0.5, 3.0)):
            if alpha == 2.0 and beta:
                continue
            true = AlphaStableParams(alpha, beta, gamma, 0.0)
            fit = fit_alpha_stable(sample_alpha_stable(true, rng, args.n))
            print(f"{alpha:6.2f} {beta:6.2f} {gamma:6.2f} | {fit.alpha:10.3f} {fit.beta:9.3f} "
                  f"{fit.gamma:10.3f} {fit.delta:10.3f}")


if __name__ == "__main__":
    main()
