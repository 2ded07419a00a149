"""Pieces shared by every scheduler: configs, budget planning, the counting
evaluator, random streams and per-iteration reports."""
from __future__ import annotations

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import numpy as np

from ..core import (BatchEvaluation, ConfigurationError, EvaluationError, Stream,
                    TransitionBatch, rng_stream)
from ..es_grad import EsConfig
from ..td3 import Td3Config

log = logging.getLogger(__name__)


# -- configs ---------------------------------------------------------------


def _positive(problems: list, **values):
    for name, v in values.items():
        if not v > 0:
            problems.append(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class CmaMegaConfig:
    """``variant`` is ``es`` or ``td3_es``; ``exact_gradients`` swaps the ES
    estimate for the environment's analytic gradients (no extra evaluations)."""

    algorithm: ClassVar[str] = "cma_mega"
    variant: str = "es"
    batch_size: int = 100
    sigma_g: float = 1.0
    eta: float = 1.0
    es: EsConfig = field(default_factory=EsConfig)
    td3: Td3Config = field(default_factory=Td3Config)
    exact_gradients: bool = False

    def __post_init__(self):
        problems = []
        if self.variant not in ("es", "td3_es"):
            problems.append(f"variant must be 'es' or 'td3_es', got {self.variant!r}")
        elif self.lambda_prime < 2:
            problems.append(f"batch_size {self.batch_size} leaves fewer than 2 branched solutions")
        if self.exact_gradients and self.variant != "es":
            problems.append("exact_gradients is only available for the es variant")
        _positive(problems, sigma_g=self.sigma_g, eta=self.eta)
        if problems:
            raise ConfigurationError(problems)

    @property
    def lambda_prime(self) -> int:
        return self.batch_size - (2 if self.variant == "td3_es" else 1)

    def iteration_cost(self, iteration: int) -> int:
        return self.batch_size + (0 if self.exact_gradients else self.es.lambda_es)


@dataclass(frozen=True)
class MapElitesConfig:
    algorithm: ClassVar[str] = "map_elites"
    batch_size: int = 100
    sigma: float = 0.02

    def __post_init__(self):
        problems = []
        _positive(problems, batch_size=self.batch_size, sigma=self.sigma)
        if problems:
            raise ConfigurationError(problems)

    def iteration_cost(self, iteration: int) -> int:
        return self.batch_size


@dataclass(frozen=True)
class PgaMeConfig:
    """The batch holds ``n_evo`` iso-line children, ``batch_size - n_evo - 1``
    critic-optimized children and the greedy actor."""

    algorithm: ClassVar[str] = "pga_me"
    batch_size: int = 100
    n_evo: Optional[int] = None
    n_grad: int = 10
    alpha_grad: float = 0.001
    sigma1: float = 0.005
    sigma2: float = 0.05
    initial_solutions: int = 100
    td3: Td3Config = field(default_factory=lambda: Td3Config(n_crit=300, n_pg=256))

    def __post_init__(self):
        if self.n_evo is None:
            object.__setattr__(self, "n_evo", self.batch_size // 2)
        problems = []
        _positive(problems, batch_size=self.batch_size, n_grad=self.n_grad,
                  alpha_grad=self.alpha_grad, initial_solutions=self.initial_solutions)
        if self.sigma1 < 0 or self.sigma2 < 0:
            problems.append("sigma1 and sigma2 must be non-negative")
        if not 0 <= self.n_evo <= self.batch_size - 1:
            problems.append(f"n_evo must lie in [0, batch_size - 1], got {self.n_evo}")
        if problems:
            raise ConfigurationError(problems)

    @property
    def n_pg_children(self) -> int:
        return self.batch_size - self.n_evo - 1

    def iteration_cost(self, iteration: int) -> int:
        return self.initial_solutions if iteration == 0 else self.batch_size


@dataclass(frozen=True)
class MeEsConfig:
    """``accounting='strict'`` charges the mean evaluation against the
    budget (cost ``batch_size + 1``); ``'paper'`` plans ``budget //
    batch_size`` iterations and overspends by one evaluation per iteration."""

    algorithm: ClassVar[str] = "me_es"
    batch_size: int = 200
    sigma: float = 0.02
    n_optim_gens: int = 10
    alpha: float = 0.01
    alpha2: float = 0.005
    k_novelty: int = 10
    accounting: str = "strict"

    def __post_init__(self):
        problems = []
        if self.batch_size < 2 or self.batch_size % 2:
            problems.append(f"batch_size must be an even integer >= 2, got {self.batch_size}")
        _positive(problems, sigma=self.sigma, n_optim_gens=self.n_optim_gens, alpha=self.alpha,
                  k_novelty=self.k_novelty)
        if self.alpha2 < 0:
            problems.append(f"alpha2 must be non-negative, got {self.alpha2}")
        if self.accounting not in ("strict", "paper"):
            problems.append(f"accounting must be 'strict' or 'paper', got {self.accounting!r}")
        if problems:
            raise ConfigurationError(problems)

    @property
    def es(self) -> EsConfig:
        return EsConfig(self.batch_size, self.sigma)

    def iteration_cost(self, iteration: int) -> int:
        return self.batch_size + 1

    def declared_cost(self) -> int:
        return self.batch_size + (1 if self.accounting == "strict" else 0)


AlgoConfig = CmaMegaConfig | MapElitesConfig | PgaMeConfig | MeEsConfig


# -- budget ----------------------------------------------------------------


@dataclass(frozen=True)
class BudgetPlan:
    iterations: int
    evaluations: int  # what the scheduler will actually spend
    unspent: int


def plan_budget(cfg: AlgoConfig, budget: int) -> BudgetPlan:
    """Number of iterations a budget buys, validated for exact division."""
    if budget < 1:
        raise ConfigurationError(f"budget must be positive, got {budget}")
    if isinstance(cfg, MeEsConfig):
        per = cfg.declared_cost()
        iters = budget // per
        if iters < 1:
            raise ConfigurationError(f"budget {budget} is below one iteration ({per})")
        if cfg.accounting == "paper" and budget % per:
            raise ConfigurationError(
                f"budget {budget} is not a multiple of the per-iteration cost {per}")
        spent = iters * cfg.iteration_cost(1)
        return BudgetPlan(iters, spent, max(0, budget - spent))
    first = cfg.iteration_cost(0)
    per = cfg.iteration_cost(1)
    if budget < first or (budget - first) % per:
        raise ConfigurationError(
            f"budget {budget} does not divide into a first iteration of {first} plus "
            f"iterations of {per} evaluations")
    iters = 1 + (budget - first) // per
    return BudgetPlan(iters, budget, 0)


# -- evaluation ------------------------------------------------------------


class Evaluator:
    """Counts evaluations, validates results and optionally keeps the
    transitions of every call until :meth:`drain_transitions`."""

    def __init__(self, env, noise_rng: Optional[np.random.Generator] = None,
                 executor: Optional[Executor] = None, record_transitions: bool = False):
        self.env = env
        self.noise_rng = noise_rng
        self.executor = executor
        self.record_transitions = record_transitions
        self.count = 0
        self._pending: list = []

    def __call__(self, solutions) -> BatchEvaluation:
        X = np.asarray(solutions, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        try:
            res = self.env.evaluate_batch(X, rng=self.noise_rng, executor=self.executor)
        except Exception as err:
            raise EvaluationError(self._locate_failure(X), err) from err
        bad = ~(np.isfinite(res.objectives) & np.all(np.isfinite(res.measures), axis=1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise EvaluationError(i, ValueError(
                f"non-finite result: objective {res.objectives[i]!r}, measures {res.measures[i]!r}"))
        self.count += X.shape[0]
        if self.record_transitions and res.transitions is not None:
            self._pending.append(res.transitions)
        return res

    def _locate_failure(self, X) -> int:
        for i in range(X.shape[0]):
            try:
                self.env.evaluate_batch(X[i:i + 1])
            except Exception:
                return i
        return -1

    def drain_transitions(self) -> Optional[TransitionBatch]:
        if not self._pending:
            return None
        out = TransitionBatch.concatenate(self._pending)
        self._pending = []
        return out


class Rngs:
    """One generator per purpose, all derived from a single seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gens: dict = {}

    def __getitem__(self, stream: Stream) -> np.random.Generator:
        if stream not in self._gens:
            self._gens[stream] = rng_stream(self.seed, stream)
        return self._gens[stream]


@dataclass
class IterationReport:
    iteration: int
    evaluations: int
    new_cells: int = 0
    improved_cells: int = 0
    restarted: bool = False
    phase: Optional[str] = None
    notes: tuple = ()

    @classmethod
    def from_outcomes(cls, iteration: int, evaluations: int, outcomes, **kw) -> "IterationReport":
        status = [int(o.status) for o in outcomes]
        return cls(iteration, evaluations, new_cells=status.count(2),
                   improved_cells=status.count(1), **kw)
