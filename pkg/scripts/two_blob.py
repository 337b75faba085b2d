"""Dwell preference for the stronger of two Gaussian blobs (9:1 peaks).

    python3 scripts/two_blob.py --seeds 100 --temperature 1.0
"""
import argparse

import numpy as np

from gazewalk.saliency import SaliencyMap
from gazewalk.walker import SaliencySource, WalkerConfig, run_scanpath


def blob_map(h=192, w=256, ratio=9.0, sigma=20.0):
    yy, xx = np.mgrid[:h, :w]
    g = lambda cx: np.exp(-((xx - cx) ** 2 + (yy - h / 2) ** 2) / (2 * sigma ** 2))
    return ratio * g(w / 4) + g(3 * w / 4)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--ticks", type=int, default=10_000)
    ap.add_argument("--candidates", type=int, default=WalkerConfig.n_candidates)
    ap.add_argument("--temperature", type=float, default=WalkerConfig.temperature)
    args = ap.parse_args()

    values = blob_map()
    source = SaliencySource.from_maps(SaliencyMap.from_scores(values))
    frac = np.array([
        np.mean(run_scanpath(source, WalkerConfig(seed=s, max_ticks=args.ticks,
                                                  n_candidates=args.candidates,
                                                  temperature=args.temperature))
                .positions()[:, 0] < values.shape[1] / 2)
        for s in range(args.seeds)])
    print(f"dwell fraction on the stronger half: median {np.median(frac):.3f}, "
          f"min {frac.min():.3f}; runs > 0.5: {(frac > 0.5).sum()}/{args.seeds}")


if __name__ == "__main__":
    main()
