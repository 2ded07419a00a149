"""Command line: ``run``, ``plot``, ``rescore`` and ``robustness``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..archive import GridArchive, GridSpec, infer_grid_from_header, read_csv_header
from ..core import ConfigurationError, Stream, rng_stream
from ..envs import ENVIRONMENTS, make_env
from .config import ENV_PARAMS, ExperimentConfig, load_config
from .metrics import mean_elite_robustness, rescore
from .plots import emit_heatmap, emit_histogram
from .runner import load_grid_json, run_trials


def _load_archive(path: Path, grid: str | None) -> tuple:
    """Archive plus the sibling config, if the run directory has one."""
    grid_path = Path(grid) if grid else path.parent / "grid.json"
    if grid_path.exists():
        spec = load_grid_json(grid_path)
    else:
        k = infer_grid_from_header(read_csv_header(path))
        spec = GridSpec.uniform(k, 32)
        logging.warning("no grid.json next to %s; assuming %d x 32 cells on [0, 1]", path, k)
    cfg_path = path.parent / "config.txt"
    cfg = load_config(cfg_path) if cfg_path.exists() else None
    return GridArchive.from_csv(path, spec), cfg


def _objective_range(args, cfg: ExperimentConfig | None) -> tuple:
    lo, hi = args.min_objective, args.max_objective
    if cfg is not None:
        env = cfg.make_env()
        lo = cfg.resolved_min_objective(env) if lo is None else lo
        hi = cfg.resolved_max_objective(env) if hi is None else hi
    return lo, hi


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.deterministic:
        cfg = replace(cfg, mode="deterministic", threads=1)
    elif args.threads is not None:
        cfg = replace(cfg, threads=args.threads,
                      mode="parallel" if args.threads > 1 else "deterministic")
    results = run_trials(cfg, args.out)
    for r in results:
        print(json.dumps(r.summary, sort_keys=True))
    return 0


def cmd_plot(args) -> int:
    archive, cfg = _load_archive(Path(args.archive), args.grid)
    lo, hi = _objective_range(args, cfg)
    if args.kind == "heatmap":
        paths = emit_heatmap(archive, args.out, lo, hi)
    else:
        paths = (emit_histogram(archive, args.out, args.bins, lo, hi),)
    for p in paths:
        print(p)
    return 0


def cmd_rescore(args) -> int:
    archive, _ = _load_archive(Path(args.archive), args.grid)
    print(json.dumps(rescore(archive, args.min_objective), sort_keys=True))
    return 0


def cmd_robustness(args) -> int:
    archive, cfg = _load_archive(Path(args.archive), args.grid)
    params = {}
    if cfg is not None and cfg.env == args.env:
        params = dict(cfg.env_params)
    if args.obs_noise is not None:
        if "obs_noise" not in ENV_PARAMS.get(args.env, ()):
            raise ConfigurationError(f"{args.env} has no observation noise")
        params["obs_noise"] = args.obs_noise
    env = make_env(args.env, **params)
    value = mean_elite_robustness(archive, env, args.episodes,
                                  rng_stream(args.seed, Stream.ROBUSTNESS))
    print(json.dumps({"mean_elite_robustness": value, "episodes": args.episodes,
                      "elites": len(archive)}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dqdrl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", required=True)
    run.add_argument("--threads", type=int)
    run.add_argument("--deterministic", action="store_true")
    run.set_defaults(func=cmd_run)

    plot = sub.add_parser("plot", help="emit a heatmap or histogram of an archive")
    plot.add_argument("kind", choices=("heatmap", "histogram"))
    plot.add_argument("--archive", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--grid", help="grid.json (default: next to the archive)")
    plot.add_argument("--min-objective", type=float)
    plot.add_argument("--max-objective", type=float)
    plot.add_argument("--bins", type=int, default=40)
    plot.set_defaults(func=cmd_plot)

    rs = sub.add_parser("rescore", help="recompute metrics with a different min objective")
    rs.add_argument("--archive", required=True)
    rs.add_argument("--min-objective", type=float, required=True)
    rs.add_argument("--grid")
    rs.set_defaults(func=cmd_rescore)

    rob = sub.add_parser("robustness", help="mean elite robustness of an archive")
    rob.add_argument("--archive", required=True)
    rob.add_argument("--env", required=True, choices=sorted(ENVIRONMENTS))
    rob.add_argument("--episodes", type=int, default=10)
    rob.add_argument("--obs-noise", type=float)
    rob.add_argument("--seed", type=int, default=0)
    rob.add_argument("--grid")
    rob.set_defaults(func=cmd_robustness)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as err:
        print("configuration error:", file=sys.stderr)
        for problem in err.problems:
            print(f"  - {problem}", file=sys.stderr)
        return 2
    except (ValueError, LookupError, NotImplementedError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
