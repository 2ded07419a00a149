"""CMA-MEGA: branch from a search point along sampled combinations of the
objective and measure gradients, rank branches by archive improvement and
adapt the coefficient distribution with CMA-ES."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..archive import GridArchive
from ..cma import CmaState, cma_init, cma_reset, cma_sample, cma_update, improvement_rank, restart_check
from ..core import GradientBundle, GradientUnavailableError, Stream, normalize_to_unit
from ..es_grad import es_gradients
from ..td3 import Td3State, init_td3, td3_objective_gradient, train_td3
from .base import CmaMegaConfig, Evaluator, IterationReport, Rngs

log = logging.getLogger(__name__)


@dataclass
class CmaMegaState:
    archive: GridArchive
    cma: CmaState
    phi_star: np.ndarray
    td3: Optional[Td3State] = None
    iteration: int = 0
    restarts: int = 0


def init_cma_mega(env, archive: GridArchive, cfg: CmaMegaConfig, rngs: Rngs) -> CmaMegaState:
    phi0 = np.asarray(env.initial_solution(rngs[Stream.INIT]), dtype=np.float64)
    td3 = None
    if cfg.variant == "td3_es":
        if getattr(env, "episodic", False):
            td3 = init_td3(env.policy_spec, cfg.td3, rngs[Stream.TD3])
        else:
            log.warning("%s has no transitions; td3_es runs with ES objective gradients", env.id)
    cma = cma_init(env.measure_dim + 1, cfg.lambda_prime, cfg.sigma_g)
    return CmaMegaState(archive, cma, phi0, td3)


def _gradients(env, state: CmaMegaState, cfg: CmaMegaConfig, evaluator: Evaluator,
               rngs: Rngs) -> GradientBundle:
    if cfg.exact_gradients:
        return env.analytic_gradients(state.phi_star)
    bundle, _ = es_gradients(evaluator, state.phi_star, cfg.es, rngs[Stream.ES])
    if state.td3 is not None:
        try:
            grad_f = td3_objective_gradient(state.phi_star, state.td3, cfg.td3, rngs[Stream.TD3])
            bundle = GradientBundle(grad_f, bundle.grad_m)
        except GradientUnavailableError as err:
            log.info("iteration %d: %s; using the ES objective gradient", state.iteration, err)
    return bundle


def cma_mega_iteration(env, state: CmaMegaState, cfg: CmaMegaConfig, evaluator: Evaluator,
                       rngs: Rngs) -> IterationReport:
    """One outer iteration; mutates ``state`` and returns a report."""
    start = evaluator.count
    archive = state.archive

    ev = evaluator(state.phi_star)
    archive.add(state.phi_star, ev.objectives[0], ev.measures[0])

    bundle = _gradients(env, state, cfg, evaluator, rngs)
    grads = np.array([normalize_to_unit(g)[0] for g in bundle.stacked])

    coeffs = cma_sample(state.cma, cfg.lambda_prime, rngs[Stream.CMA])
    steps = coeffs @ grads
    branches = state.phi_star + steps
    res = evaluator(branches)
    outcomes = archive.add_batch(branches, res.objectives, res.measures)

    ranked = improvement_rank(outcomes)
    weights = state.cma.weights
    state.cma = cma_update(state.cma, ranked, coeffs)
    state.phi_star = state.phi_star + cfg.eta * (weights @ steps[ranked.order])

    restarted = restart_check(outcomes)
    if restarted:
        state.cma = cma_reset(state.cma)
        state.phi_star = archive.random_elite(rngs[Stream.SELECTION]).solution
        state.restarts += 1

    if cfg.variant == "td3_es":
        _td3_tail(state, cfg, evaluator, rngs)

    report = IterationReport.from_outcomes(state.iteration, evaluator.count - start, outcomes,
                                           restarted=restarted)
    state.iteration += 1
    return report


def _td3_tail(state: CmaMegaState, cfg: CmaMegaConfig, evaluator: Evaluator, rngs: Rngs):
    # The reserved slot evaluates the greedy actor.  Without a critic (no
    # transitions) it re-evaluates the stepped search point instead, so the
    # per-iteration cost stays the same.
    candidate = state.td3.actor if state.td3 is not None else state.phi_star
    ev = evaluator(candidate)
    state.archive.add(candidate, ev.objectives[0], ev.measures[0])
    if state.td3 is None:
        return
    trans = evaluator.drain_transitions()
    if trans is not None:
        state.td3.buffer.add(trans)
    train_td3(state.td3, cfg.td3, rngs[Stream.TD3])


class CmaMega:
    def __init__(self, env, archive: GridArchive, cfg: CmaMegaConfig, rngs: Rngs,
                 evaluator: Evaluator):
        if cfg.exact_gradients and not hasattr(env, "analytic_gradients"):
            raise ValueError(f"{env.id} has no analytic gradients")
        self.env, self.cfg, self.rngs, self.evaluator = env, cfg, rngs, evaluator
        evaluator.record_transitions = cfg.variant == "td3_es"
        self.state = init_cma_mega(env, archive, cfg, rngs)

    @property
    def archive(self) -> GridArchive:
        return self.state.archive

    def step(self) -> IterationReport:
        return cma_mega_iteration(self.env, self.state, self.cfg, self.evaluator, self.rngs)
