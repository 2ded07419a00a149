"""Experiment runner: drive a scheduler to its budget, record per-iteration
metrics and persist the archive, metrics and summary."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

from ..algorithms import (BudgetPlan, Evaluator, IterationReport, Rngs, make_scheduler,
                          plan_budget)
from ..archive import GridArchive, GridSpec
from ..core import Stream, atomic_write_text
from .config import ExperimentConfig
from .metrics import MetricsRow, metrics_csv_text, qd_score_auc

log = logging.getLogger(__name__)

SUMMARY_KEYS = ("qd_score", "coverage", "best_performance", "qd_score_auc", "evaluations",
                "seed", "config_hash")


@dataclass
class RunResult:
    archive: GridArchive
    history: list
    summary: dict
    plan: BudgetPlan
    reports: list
    wall_times: list


def grid_json_text(spec: GridSpec) -> str:
    return json.dumps({"dims": list(spec.dims), "lower": list(spec.lower),
                       "upper": list(spec.upper)}, sort_keys=True) + "\n"


def load_grid_json(path) -> GridSpec:
    with open(path) as fh:
        d = json.load(fh)
    return GridSpec(tuple(d["dims"]), tuple(d["lower"]), tuple(d["upper"]))


def run_experiment(cfg: ExperimentConfig, out_dir=None,
                   on_iteration: Optional[Callable[[IterationReport, MetricsRow], None]] = None
                   ) -> RunResult:
    """Run one trial with ``cfg.seed``.

    Deterministic mode uses one worker and writes ``wall_time_s = 0`` into
    the metrics CSV so identical configs produce identical bytes; measured
    times always go to ``wall_time.csv``.
    """
    env = cfg.make_env()
    spec = cfg.grid_spec()
    archive = GridArchive(spec, env.solution_dim)
    min_obj = cfg.resolved_min_objective(env)
    plan = plan_budget(cfg.algo, cfg.budget)
    rngs = Rngs(cfg.seed)
    deterministic = cfg.mode == "deterministic" or cfg.threads == 1
    executor = None if deterministic else ThreadPoolExecutor(max_workers=cfg.threads)
    try:
        evaluator = Evaluator(env, noise_rng=rngs[Stream.ENV_NOISE], executor=executor)
        scheduler = make_scheduler(env, archive, cfg.algo, rngs, evaluator)
        history, reports, wall = [], [], []
        t0 = time.perf_counter()
        for i in range(plan.iterations):
            report = scheduler.step()
            elapsed = time.perf_counter() - t0
            row = MetricsRow(
                iteration=i + 1, evaluations=evaluator.count,
                qd_score=archive.qd_score(min_obj), coverage=archive.coverage(),
                best_performance=archive.best_performance() if not archive.empty else float("nan"),
                wall_time_s=0.0 if deterministic else elapsed)
            history.append(row)
            reports.append(report)
            wall.append(elapsed)
            if on_iteration is not None:
                on_iteration(report, row)
    finally:
        if executor is not None:
            executor.shutdown()
    if evaluator.count != plan.evaluations:
        raise RuntimeError(f"scheduler spent {evaluator.count} evaluations, planned "
                           f"{plan.evaluations}")
    if plan.unspent:
        log.info("%d evaluations of the budget left unspent (partial iteration)", plan.unspent)
    summary = {
        "qd_score": archive.qd_score(min_obj),
        "coverage": archive.coverage(),
        "best_performance": archive.best_performance(),
        "qd_score_auc": qd_score_auc(history),
        "evaluations": evaluator.count,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
    }
    result = RunResult(archive, history, summary, plan, reports, wall)
    if out_dir is not None:
        write_outputs(result, cfg, Path(out_dir))
    return result


def write_outputs(result: RunResult, cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "metrics.csv", metrics_csv_text(result.history))
    atomic_write_text(out / "archive.csv", result.archive.to_csv_text())
    atomic_write_text(out / "summary.json", json.dumps(result.summary, indent=2) + "\n")
    atomic_write_text(out / "grid.json", grid_json_text(result.archive.spec))
    atomic_write_text(out / "config.txt", cfg.to_text())
    atomic_write_text(out / "wall_time.csv", "iteration,wall_time_s\n" + "".join(
        f"{i + 1},{t:.6f}\n" for i, t in enumerate(result.wall_times)))


def run_trials(cfg: ExperimentConfig, out_dir=None) -> list:
    """``cfg.trials`` runs with seeds ``seed, seed+1, ...``; each trial gets
    its own ``trial_<n>`` directory when there is more than one."""
    results = []
    for t in range(cfg.trials):
        trial_cfg = replace(cfg, seed=cfg.seed + t)
        sub = None
        if out_dir is not None:
            sub = Path(out_dir) if cfg.trials == 1 else Path(out_dir) / f"trial_{t}"
        results.append(run_experiment(trial_cfg, sub))
    return results
