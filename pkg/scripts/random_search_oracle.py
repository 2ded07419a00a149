"""Best return found by evaluating random Glorot-initialized GaitPoint policies.

Serves as the reference point for judging a trained greedy actor.

    python3 scripts/random_search_oracle.py --policies 10000 --seed 0
"""
from __future__ import annotations

import argparse
import json

import numpy as np

from dqdrl.core import Stream, rng_stream
from dqdrl.envs import GaitPoint


def random_search(env: GaitPoint, n_policies: int, rng: np.random.Generator,
                  chunk: int = 500) -> tuple[float, np.ndarray]:
    """``(best return, best policy)`` over ``n_policies`` random policies."""
    best, best_phi = -np.inf, None
    done = 0
    while done < n_policies:
        m = min(chunk, n_policies - done)
        X = np.array([env.random_solution(rng) for _ in range(m)])
        f = env.evaluate_batch(X).objectives
        i = int(np.argmax(f))
        if f[i] > best:
            best, best_phi = float(f[i]), X[i]
        done += m
    return best, best_phi


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--policies", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hidden", default="32,32")
    args = ap.parse_args()
    hidden = tuple(int(h) for h in args.hidden.split(","))
    env = GaitPoint(hidden=hidden)
    best, _ = random_search(env, args.policies, rng_stream(args.seed, Stream.ORACLE))
    print(json.dumps({"best_return": best, "policies": args.policies, "seed": args.seed,
                      "hidden": list(hidden)}))


if __name__ == "__main__":
    main()
