"""MAP-Elites with isotropic Gaussian mutation of uniformly chosen elites."""
from __future__ import annotations

import numpy as np

from ..archive import GridArchive
from ..core import Stream
from .base import Evaluator, IterationReport, MapElitesConfig, Rngs


def map_elites_iteration(archive: GridArchive, cfg: MapElitesConfig, evaluator: Evaluator,
                         rng: np.random.Generator, iteration: int,
                         phi0: np.ndarray) -> IterationReport:
    """First iteration (or any iteration on an empty archive) samples around
    ``phi0``; later ones mutate elites drawn uniformly with replacement."""
    start = evaluator.count
    n, dim = cfg.batch_size, archive.solution_dim
    if iteration == 0 or archive.empty:
        parents = np.broadcast_to(phi0, (n, dim))
    else:
        parents = archive.sample_elites(rng, n)
    children = parents + cfg.sigma * rng.standard_normal((n, dim))
    res = evaluator(children)
    outcomes = archive.add_batch(children, res.objectives, res.measures)
    return IterationReport.from_outcomes(iteration, evaluator.count - start, outcomes)


class MapElites:
    def __init__(self, env, archive: GridArchive, cfg: MapElitesConfig, rngs: Rngs,
                 evaluator: Evaluator):
        self.archive, self.cfg, self.rngs, self.evaluator = archive, cfg, rngs, evaluator
        self.phi0 = np.asarray(env.initial_solution(rngs[Stream.INIT]), dtype=np.float64)
        self.iteration = 0

    def step(self) -> IterationReport:
        report = map_elites_iteration(self.archive, self.cfg, self.evaluator,
                                      self.rngs[Stream.VARIATION], self.iteration, self.phi0)
        self.iteration += 1
        return report
