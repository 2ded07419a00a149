"""CMA-ES over gradient-coefficient space, driven by archive-improvement ranking.

This is the (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation,
rank-one and rank-mu covariance updates, and non-negative recombination
weights on the parent half.  States are immutable; every operation returns a
new :class:`CmaState`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .archive import InsertOutcome, InsertStatus
from .core import ConfigurationError, InvalidInputError

log = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-12


@dataclass(frozen=True)
class CmaParams:
    """Strategy constants derived from dimension and population size."""

    dim: int
    popsize: int
    mu: int
    weights: np.ndarray  # length popsize, zeros past mu
    mueff: float
    cs: float
    ds: float
    cc: float
    c1: float
    cmu: float
    chi_n: float

    @classmethod
    def default(cls, dim: int, popsize: int) -> "CmaParams":
        N = dim
        mu = popsize // 2
        raw = np.log((popsize + 1) / 2) - np.log(np.arange(1, mu + 1))
        w = np.zeros(popsize)
        w[:mu] = raw / raw.sum()
        mueff = 1.0 / np.sum(w[:mu] ** 2)
        cs = (mueff + 2) / (N + mueff + 5)
        ds = 1 + 2 * max(0.0, np.sqrt((mueff - 1) / (N + 1)) - 1) + cs
        cc = (4 + mueff / N) / (N + 4 + 2 * mueff / N)
        c1 = 2 / ((N + 1.3) ** 2 + mueff)
        cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((N + 2) ** 2 + mueff))
        chi_n = np.sqrt(N) * (1 - 1 / (4 * N) + 1 / (21 * N ** 2))
        return cls(N, popsize, mu, w, float(mueff), float(cs), float(ds), float(cc),
                   float(c1), float(cmu), float(chi_n))


@dataclass(frozen=True)
class CmaState:
    params: CmaParams
    mean: np.ndarray
    covariance: np.ndarray
    step_size: float
    path_sigma: np.ndarray
    path_c: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    generation: int = 0
    initial_step_size: float = 1.0

    @property
    def weights(self) -> np.ndarray:
        return self.params.weights


@dataclass(frozen=True)
class RankedBatch:
    order: np.ndarray
    outcomes: tuple


def cma_init(dim: int, lambda_prime: int, sigma_g: float) -> CmaState:
    """Fresh state: zero mean, identity covariance, step size ``sigma_g``."""
    problems = []
    if lambda_prime < 2:
        problems.append(f"CMA-ES population must be at least 2, got {lambda_prime}")
    if dim < 1:
        problems.append(f"coefficient dimension must be positive, got {dim}")
    if not sigma_g > 0:
        problems.append(f"initial step size must be positive, got {sigma_g}")
    if problems:
        raise ConfigurationError(problems)
    params = CmaParams.default(dim, lambda_prime)
    return CmaState(params=params, mean=np.zeros(dim), covariance=np.eye(dim),
                    step_size=float(sigma_g), path_sigma=np.zeros(dim),
                    path_c=np.zeros(dim), eigvals=np.ones(dim), eigvecs=np.eye(dim),
                    generation=0, initial_step_size=float(sigma_g))


def cma_reset(state: CmaState) -> CmaState:
    return cma_init(state.params.dim, state.params.popsize, state.initial_step_size)


def cma_sample(state: CmaState, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` draws from N(mean, step_size^2 * covariance), shape (count, dim)."""
    z = rng.standard_normal((count, state.params.dim))
    y = (z * np.sqrt(state.eigvals)) @ state.eigvecs.T
    return state.mean + state.step_size * y


def improvement_rank(outcomes: Sequence[InsertOutcome]) -> RankedBatch:
    """Order batch indices: new cells, then improved cells, then rejections;
    larger improvement first inside each tier, lower index on ties."""
    outcomes = tuple(outcomes)
    if not outcomes:
        return RankedBatch(np.zeros(0, dtype=np.int64), outcomes)
    status = np.array([int(o.status) for o in outcomes])
    delta = np.array([o.improvement for o in outcomes], dtype=np.float64)
    index = np.arange(len(outcomes))
    order = np.lexsort((index, -delta, -status))
    return RankedBatch(order.astype(np.int64), outcomes)


def restart_check(outcomes: Sequence[InsertOutcome]) -> bool:
    """True when none of the branched solutions entered the archive."""
    if len(outcomes) == 0:
        raise ConfigurationError("restart check on an empty batch")
    return all(o.status == InsertStatus.NOT_ADDED for o in outcomes)


def cma_update(state: CmaState, ranked: RankedBatch, samples: np.ndarray) -> CmaState:
    p = state.params
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (p.popsize, p.dim) or ranked.order.shape != (p.popsize,):
        raise InvalidInputError(
            f"expected {p.popsize} ranked samples of dim {p.dim}, got samples "
            f"{samples.shape} and ranking of {ranked.order.shape[0]}")
    sigma = state.step_size
    y = (samples[ranked.order] - state.mean) / sigma
    y_w = p.weights @ y
    mean = state.mean + sigma * y_w

    inv_sqrt_c = state.eigvecs @ np.diag(1 / np.sqrt(state.eigvals)) @ state.eigvecs.T
    ps = (1 - p.cs) * state.path_sigma + np.sqrt(p.cs * (2 - p.cs) * p.mueff) * (inv_sqrt_c @ y_w)
    gen = state.generation + 1
    ps_norm = np.linalg.norm(ps)
    h_sigma = float(ps_norm / np.sqrt(1 - (1 - p.cs) ** (2 * gen))
                    < (1.4 + 2 / (p.dim + 1)) * p.chi_n)
    pc = (1 - p.cc) * state.path_c + h_sigma * np.sqrt(p.cc * (2 - p.cc) * p.mueff) * y_w

    delta_h = (1 - h_sigma) * p.cc * (2 - p.cc)
    rank_mu = (p.weights[:, None] * y).T @ y
    C = ((1 + p.c1 * delta_h - p.c1 - p.cmu * p.weights.sum()) * state.covariance
         + p.c1 * np.outer(pc, pc) + p.cmu * rank_mu)
    C = (C + C.T) / 2
    eigvals, eigvecs = np.linalg.eigh(C)
    floor = EIGEN_FLOOR * eigvals.max()
    if eigvals.min() < floor:
        log.info("covariance reconditioned: min eigenvalue %.3g floored at %.3g",
                 eigvals.min(), floor)
        eigvals = np.maximum(eigvals, floor)
        C = (eigvecs * eigvals) @ eigvecs.T
        C = (C + C.T) / 2

    step = sigma * np.exp((p.cs / p.ds) * (ps_norm / p.chi_n - 1))
    return replace(state, mean=mean, covariance=C, step_size=float(step), path_sigma=ps,
                   path_c=pc, eigvals=eigvals, eigvecs=eigvecs, generation=gen)
