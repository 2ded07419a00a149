"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeats 5]

Both implementations are called directly, so the result does not depend on
``DQDRL_DISABLE_NUMBA``.  Compile time is excluded by a warm-up call.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dqdrl import _accel, _kernels
from dqdrl.envs import GaitPoint


def best_of(fn, repeats: int) -> float:
    fn()
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def rollout_case(hidden, batch, rng):
    env = GaitPoint(hidden=hidden)
    X = np.array([env.random_solution(rng) for _ in range(batch)])
    sizes = np.array(env.policy_spec.layer_sizes, dtype=np.int64)
    empty = np.zeros((0, 0, 0))
    args = (X, sizes, True, env.episode_length, env.period, empty, empty,
            env.decay, env.gain, env.torque_cost)
    return (lambda: _kernels.gait_rollout_numba(*args)), (lambda: _kernels.gait_rollout_numpy(*args))


def novelty_case(queries, store, rng):
    P = rng.random((queries, 2))
    S = rng.random((store, 2))
    return (lambda: _kernels.knn_novelty_numba(P, S, 10)), (lambda: _kernels.knn_novelty_numpy(P, S, 10))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    cases = []
    for hidden in ((16, 16), (32, 32)):
        for batch in (1, 100):
            cases.append((f"rollout hidden={hidden} batch={batch}",
                          *rollout_case(hidden, batch, rng)))
    for q, s in ((200, 250), (200, 5000)):
        cases.append((f"knn novelty queries={q} store={s}", *novelty_case(q, s, rng)))
    print(f"{'case':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, nb, npy in cases:
        t_nb = best_of(nb, args.repeats) * 1e3
        t_np = best_of(npy, args.repeats) * 1e3
        print(f"{name:40s} {t_nb:10.3f} {t_np:10.3f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
