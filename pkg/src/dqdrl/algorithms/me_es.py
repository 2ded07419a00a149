"""ME-ES explore-exploit: a single ES search point that alternates between
following the objective and following measure-space novelty, inserting its
mean into the archive every generation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..archive import GridArchive
from ..core import Stream
from ..es_grad import Adam, mirrored_gradient, mirrored_perturbations
from .base import Evaluator, IterationReport, MeEsConfig, Rngs

EMPTY_NOVELTY = 1e9


class NoveltyStore:
    """Growable set of measure vectors with k-nearest-neighbour novelty."""

    def __init__(self, measure_dim: int, k: int = 10):
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        self.k = int(k)
        self._points = np.zeros((0, measure_dim))

    def __len__(self) -> int:
        return self._points.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self._points.copy()

    def add(self, m) -> None:
        m = np.asarray(m, dtype=np.float64).reshape(-1, self._points.shape[1])
        self._points = np.concatenate([self._points, m])

    def novelty_batch(self, measures) -> np.ndarray:
        M = np.atleast_2d(np.asarray(measures, dtype=np.float64))
        if len(self) == 0:
            return np.full(M.shape[0], EMPTY_NOVELTY)
        return _kernels.knn_novelty(M, self._points, self.k)


def novelty(m, store: NoveltyStore) -> float:
    return float(store.novelty_batch(m)[0])


@dataclass
class MeEsState:
    mean: np.ndarray
    optimizer: Adam
    store: NoveltyStore
    phase: str = "exploit"
    gens_in_phase: int = 0
    iteration: int = 0
    phase_log: list = field(default_factory=list)


def init_me_es(env, cfg: MeEsConfig, rngs: Rngs) -> MeEsState:
    phi0 = np.asarray(env.initial_solution(rngs[Stream.INIT]), dtype=np.float64)
    return MeEsState(phi0, _optimizer(phi0.shape[0], cfg),
                     NoveltyStore(env.measure_dim, cfg.k_novelty))


def _optimizer(n: int, cfg: MeEsConfig) -> Adam:
    return Adam(n, cfg.alpha, l2_coeff=cfg.alpha2)


def _switch_phase(state: MeEsState, archive: GridArchive, cfg: MeEsConfig,
                  rng: np.random.Generator) -> None:
    state.phase = "explore" if state.phase == "exploit" else "exploit"
    state.gens_in_phase = 0
    if not archive.empty:
        if state.phase == "exploit":
            top = archive.top_elites(2)
            state.mean = top[rng.integers(len(top))].solution
        else:
            state.mean = archive.random_elite(rng).solution
    state.optimizer = _optimizer(state.mean.shape[0], cfg)


def me_es_iteration(archive: GridArchive, state: MeEsState, cfg: MeEsConfig,
                    evaluator: Evaluator, rngs: Rngs) -> IterationReport:
    start = evaluator.count
    if state.gens_in_phase == cfg.n_optim_gens:
        _switch_phase(state, archive, cfg, rngs[Stream.SELECTION])
    pairs = cfg.batch_size // 2
    eps, points = mirrored_perturbations(state.mean, cfg.sigma, pairs, rngs[Stream.ES])
    res = evaluator(points)
    if state.phase == "exploit":
        values = res.objectives
    else:
        values = state.store.novelty_batch(res.measures)
    grad = mirrored_gradient(eps, values[:pairs], values[pairs:], cfg.sigma)
    state.mean = state.mean + state.optimizer.ascent(grad, params=state.mean)

    ev = evaluator(state.mean)
    outcome = archive.add(state.mean, ev.objectives[0], ev.measures[0])
    state.store.add(ev.measures[0])

    report = IterationReport.from_outcomes(state.iteration, evaluator.count - start, [outcome],
                                           phase=state.phase)
    state.phase_log.append(state.phase)
    state.gens_in_phase += 1
    state.iteration += 1
    return report


class MeEs:
    def __init__(self, env, archive: GridArchive, cfg: MeEsConfig, rngs: Rngs,
                 evaluator: Evaluator):
        self.archive, self.cfg, self.rngs, self.evaluator = archive, cfg, rngs, evaluator
        self.state = init_me_es(env, cfg, rngs)

    def step(self) -> IterationReport:
        return me_es_iteration(self.archive, self.state, self.cfg, self.evaluator, self.rngs)
