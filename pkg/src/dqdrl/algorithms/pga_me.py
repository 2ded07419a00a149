"""Policy-gradient-assisted MAP-Elites: half the batch from directional
(iso-line) variation, the rest from critic-guided Adam ascent on elites,
plus the greedy actor."""
from __future__ import annotations

import logging

import numpy as np

from ..archive import GridArchive
from ..core import Stream
from ..es_grad import Adam
from ..td3 import (Td3State, init_td3, stacked_policy_gradients, td3_objective_gradient,
                   train_td3)
from .base import Evaluator, IterationReport, PgaMeConfig, Rngs

log = logging.getLogger(__name__)


def iso_line_variation(phi1, phi2, sigma1: float, sigma2: float,
                       rng: np.random.Generator) -> np.ndarray:
    """``phi1 + sigma1 * N(0, I) + sigma2 * (phi2 - phi1) * N(0, 1)``."""
    phi1 = np.asarray(phi1, dtype=np.float64)
    phi2 = np.asarray(phi2, dtype=np.float64)
    if phi1.shape != phi2.shape:
        raise ValueError(f"parents differ in shape: {phi1.shape} vs {phi2.shape}")
    iso = rng.standard_normal(phi1.shape)
    line = rng.standard_normal()
    return phi1 + sigma1 * iso + sigma2 * (phi2 - phi1) * line


def variation_batch(archive: GridArchive, count: int, cfg: PgaMeConfig,
                    rng: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.zeros((0, archive.solution_dim))
    if len(archive) < 2:
        log.info("archive has %d elite(s); using Gaussian perturbation", len(archive))
        parents = archive.sample_elites(rng, count)
        return parents + cfg.sigma1 * rng.standard_normal(parents.shape)
    first = archive.sample_elites(rng, count)
    second = archive.sample_elites(rng, count)
    return np.array([iso_line_variation(a, b, cfg.sigma1, cfg.sigma2, rng)
                     for a, b in zip(first, second)])


def pg_variation(phi: np.ndarray, td3: Td3State, cfg: PgaMeConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """``n_grad`` Adam ascent steps on the critic value, fresh optimizer."""
    opt = Adam(phi.shape[0], cfg.alpha_grad)
    for _ in range(cfg.n_grad):
        phi = phi + opt.ascent(td3_objective_gradient(phi, td3, cfg.td3, rng))
    return phi


def pg_variation_batch(parents: np.ndarray, td3: Td3State, cfg: PgaMeConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """:func:`pg_variation` for every row of ``parents`` at once.  Each step
    draws a fresh, distinct set of replay states per child."""
    phis = np.array(parents, dtype=np.float64)
    opt = Adam(phis.shape, cfg.alpha_grad)
    size = len(td3.buffer)
    count = min(cfg.td3.n_pg, size)
    for _ in range(cfg.n_grad):
        idx = np.stack([rng.choice(size, size=count, replace=False) for _ in range(len(phis))])
        states = td3.buffer.states_at(idx)
        grads = stacked_policy_gradients(td3.policy_spec, phis, td3.critic_spec, td3.critic1,
                                         states)
        phis = phis + opt.ascent(grads)
    return phis


def pga_me_iteration(archive: GridArchive, td3: Td3State | None, cfg: PgaMeConfig,
                     evaluator: Evaluator, rngs: Rngs, iteration: int,
                     env) -> IterationReport:
    start = evaluator.count
    if iteration == 0:
        batch = np.array([env.random_solution(rngs[Stream.INIT])
                          for _ in range(cfg.initial_solutions)])
    else:
        rng = rngs[Stream.VARIATION]
        evo = variation_batch(archive, cfg.n_evo, cfg, rng)
        if td3 is not None and len(td3.buffer) > 0:
            parents = archive.sample_elites(rngs[Stream.SELECTION], cfg.n_pg_children)
            pg = pg_variation_batch(parents, td3, cfg, rngs[Stream.TD3])
            greedy = td3.actor[None, :]
        else:
            # No critic to follow: fill those slots with more directional variation.
            pg = variation_batch(archive, cfg.n_pg_children + 1, cfg, rng)
            greedy = np.zeros((0, archive.solution_dim))
        batch = np.concatenate([evo, pg, greedy])
    res = evaluator(batch)
    outcomes = archive.add_batch(batch, res.objectives, res.measures)
    if td3 is not None:
        trans = evaluator.drain_transitions()
        if trans is not None:
            td3.buffer.add(trans)
        train_td3(td3, cfg.td3, rngs[Stream.TD3])
    return IterationReport.from_outcomes(iteration, evaluator.count - start, outcomes)


class PgaMe:
    def __init__(self, env, archive: GridArchive, cfg: PgaMeConfig, rngs: Rngs,
                 evaluator: Evaluator):
        self.env, self.archive, self.cfg, self.rngs = env, archive, cfg, rngs
        self.evaluator = evaluator
        self.td3 = None
        if getattr(env, "episodic", False):
            self.td3 = init_td3(env.policy_spec, cfg.td3, rngs[Stream.TD3])
            evaluator.record_transitions = True
        else:
            log.warning("%s has no transitions; PGA-ME runs variation only", env.id)
        self.iteration = 0

    def step(self) -> IterationReport:
        report = pga_me_iteration(self.archive, self.td3, self.cfg, self.evaluator,
                                  self.rngs, self.iteration, self.env)
        self.iteration += 1
        return report
