#!/usr/bin/env python3
"""How often the spectral threshold dominates the noise matrix.

Draws a block-model signal, observes it through a Bernoulli mask with
bounded noise, and tallies (a) how often the threshold lambda exceeds the
spectral norm of the effective noise W = Y/p - theta, and (b) the worst
ratio of spectral estimation error to 2*lambda on those events. The theory
says (a) should approach certainty and (b) should stay at or below 1.

Usage:
    python3 scripts/threshold_events.py [--n 60] [--k 3] [--p 0.3,1.0]
        [--replicas 100] [--c 3.0] [--seed 0]
"""

import argparse
import sys

import numpy as np

from structmc import (
    ModelFamily,
    NoiseKind,
    assemble,
    derive_seed,
    generate,
    hard_threshold,
    observe,
    sample_mask,
    sample_noise,
    spectral_threshold,
)


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--p", default="0.3,1.0", help="comma-separated observation probabilities")
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--b", type=float, default=3.0, help="noise sup bound")
    ap.add_argument("--c", type=float, default=3.0, help="threshold constant")
    ap.add_argument("--replicas", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    n = args.n
    fact, _ = generate(ModelFamily.sbm(n=n, k=args.k), seed=args.seed)
    theta = assemble(fact)
    theta = theta / max(1.0, float(np.abs(theta).max()))
    kind = NoiseKind.truncated_gaussian(args.sigma, args.b)
    print(f"{'p':>6}{'lambda':>12}{'dominated':>12}{'max err/2l':>12}")
    for p in (float(v) for v in args.p.split(",")):
        lam = spectral_threshold(args.b, args.sigma, n, n, p, c=args.c)
        held = 0
        worst = 0.0
        for r in range(args.replicas):
            seed = derive_seed(args.seed, int(p * 1000), r)
            mask = sample_mask(n, n, p, seed)
            noise = sample_noise(kind, n, n, seed)
            obs = observe(theta, mask, noise, p, sigma=args.sigma, b=args.b)
            w = obs.y / p - theta
            if lam >= np.linalg.norm(w, 2):
                held += 1
                est = hard_threshold(obs, lam)
                err = float(np.linalg.norm(est.theta_hat - theta, 2))
                worst = max(worst, err / (2 * lam))
        frac = held / args.replicas
        print(f"{p:>6g}{lam:>12.4f}{frac:>12.1%}{worst:>12.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
