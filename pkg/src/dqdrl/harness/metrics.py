"""Run-level metrics: QD score AUC, mean elite robustness and rescoring."""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..archive import GridArchive
from ..core import EmptyArchiveError, InvalidInputError

METRICS_HEADER = ("iteration", "evaluations", "qd_score", "coverage", "best_performance",
                  "wall_time_s")


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    evaluations: int
    qd_score: float
    coverage: float
    best_performance: float
    wall_time_s: float


def metrics_csv_text(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        it, ev, *rest = astuple(row)
        writer.writerow([str(it), str(ev)] + [format(x, ".17g") for x in rest])
    return buf.getvalue()


def read_metrics_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != METRICS_HEADER:
            raise InvalidInputError(f"unexpected metrics header {header}")
        return [MetricsRow(int(r[0]), int(r[1]), *(float(x) for x in r[2:])) for r in reader if r]


def qd_score_auc(history: Sequence[MetricsRow], cost: Optional[Union[int, Sequence[int]]] = None
                 ) -> float:
    """Riemann sum of QD score over evaluations.

    ``cost`` is the per-iteration evaluation count, either one number or one
    per row.  When omitted it is read off the rows' cumulative evaluations.
    """
    if not history:
        raise InvalidInputError("qd_score_auc needs at least one metrics row")
    scores = np.array([r.qd_score for r in history], dtype=np.float64)
    if cost is None:
        evals = np.array([r.evaluations for r in history], dtype=np.float64)
        widths = np.diff(np.concatenate([[0.0], evals]))
    else:
        widths = np.broadcast_to(np.asarray(cost, dtype=np.float64), scores.shape)
    return float(np.sum(widths * scores))


def mean_elite_robustness(archive: GridArchive, env, n_episodes: int = 10,
                          rng: Optional[np.random.Generator] = None) -> float:
    """Mean over elites of (average of ``n_episodes`` re-evaluations minus
    the archived objective)."""
    if archive.empty:
        raise EmptyArchiveError("robustness of an empty archive is undefined")
    if n_episodes < 1:
        raise InvalidInputError(f"n_episodes must be positive, got {n_episodes}")
    sols = archive.solutions()
    stored = archive.objectives()
    repeated = np.repeat(sols, n_episodes, axis=0)
    res = env.evaluate_batch(repeated, rng=rng)
    # Average the per-episode differences, not the returns, so a reproducible
    # rollout gives exactly zero.
    diffs = res.objectives.reshape(len(stored), n_episodes) - stored[:, None]
    return float(np.mean(diffs.mean(axis=1)))


def rescore(archive: GridArchive, min_objective: float) -> dict:
    return {
        "qd_score": archive.qd_score(min_objective),
        "coverage": archive.coverage(),
        "best_performance": archive.best_performance() if not archive.empty else None,
        "elites": len(archive),
        "min_objective": min_objective,
    }
