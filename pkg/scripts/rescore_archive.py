"""Recompute QD score, coverage, best performance and (optionally) mean
elite robustness straight from an archive CSV.

Deliberately independent of the package's metric code: the CSV is parsed
with the ``csv`` module and every number is recomputed in plain Python, so
it can cross-check the runner's outputs.

    python3 scripts/rescore_archive.py out/archive.csv --min-objective -20 --cells 1024
    python3 scripts/rescore_archive.py out/archive.csv --robustness gait_point --episodes 10
"""
from __future__ import annotations

import argparse
import csv
import json
import math


def read_archive(path) -> tuple[list, list, list]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    k = sum(1 for h in header if h.startswith("cell_index_"))
    objectives, params, measures = [], [], []
    for row in rows[1:]:
        if not row:
            continue
        measures.append([float(x) for x in row[k:2 * k]])
        objectives.append(float(row[2 * k]))
        params.append([float(x) for x in row[2 * k + 1:]])
    return objectives, params, measures


def scores(objectives: list, min_objective: float, cells: int) -> dict:
    return {
        "qd_score": math.fsum(f - min_objective for f in objectives),
        "coverage": len(objectives) / cells,
        "best_performance": max(objectives) if objectives else None,
    }


def robustness(objectives: list, params: list, env_id: str, episodes: int, seed: int,
               obs_noise: float = 0.0) -> float:
    import numpy as np

    from dqdrl.envs import make_env

    env = make_env(env_id, **({"obs_noise": obs_noise} if obs_noise else {}))
    rng = np.random.default_rng(seed)
    diffs = []
    for f, phi in zip(objectives, params):
        runs = [env.evaluate_batch(np.array([phi]), rng=rng).objectives[0]
                for _ in range(episodes)]
        diffs.append(math.fsum(r - f for r in runs) / episodes)
    return math.fsum(diffs) / len(diffs)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("archive")
    ap.add_argument("--min-objective", type=float, default=0.0)
    ap.add_argument("--cells", type=int, default=32 * 32)
    ap.add_argument("--robustness", metavar="ENV_ID")
    ap.add_argument("--episodes", type=int, default=10)
    ap.add_argument("--obs-noise", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    objectives, params, _ = read_archive(args.archive)
    out = scores(objectives, args.min_objective, args.cells)
    if args.robustness:
        out["mean_elite_robustness"] = robustness(objectives, params, args.robustness,
                                                  args.episodes, args.seed, args.obs_noise)
    print(json.dumps(out))


if __name__ == "__main__":
    main()
