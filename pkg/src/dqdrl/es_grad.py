"""Mirrored-sampling ES gradient estimates with centered rank normalization,
plus the Adam optimizer used by the ES-style searchers."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import (BatchEvaluation, ConfigurationError, EvaluationError, GradientBundle,
                   InvalidInputError)


@dataclass(frozen=True)
class EsConfig:
    lambda_es: int = 100
    sigma_e: float = 0.02

    def __post_init__(self):
        problems = []
        if self.lambda_es <= 0 or self.lambda_es % 2:
            problems.append(f"lambda_es must be a positive even integer, got {self.lambda_es}")
        if not self.sigma_e > 0:
            problems.append(f"sigma_e must be positive, got {self.sigma_e}")
        if problems:
            raise ConfigurationError(problems)


def centered_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks of ``values`` mapped linearly onto [-0.5, 0.5].

    Ties keep input order (stable sort).  The result is computed as
    ``(2r - N) / (2N)`` with ``N = len - 1`` so that ranks ``r`` and
    ``N - r`` map to exact negatives of each other.
    """
    values = np.asarray(values, dtype=np.float64)
    size = values.shape[0]
    if size < 2:
        raise InvalidInputError("need at least two values to rank")
    ranks = np.empty(size, dtype=np.int64)
    ranks[np.argsort(values, kind="stable")] = np.arange(size)
    top = size - 1
    return (2 * ranks - top) / (2.0 * top)


def rank_normalize(values_primary, values_mirror) -> tuple[np.ndarray, np.ndarray]:
    """Rank both lists jointly and split the normalized ranks back.

    On ties, primaries rank below mirrors, then lower index below higher.
    """
    primary = np.asarray(values_primary, dtype=np.float64)
    mirror = np.asarray(values_mirror, dtype=np.float64)
    if primary.shape != mirror.shape or primary.ndim != 1 or primary.shape[0] < 1:
        raise InvalidInputError("primary and mirror value lists must be equal-length 1-D")
    if not (np.all(np.isfinite(primary)) and np.all(np.isfinite(mirror))):
        raise InvalidInputError("values to rank must be finite")
    r = centered_ranks(np.concatenate([primary, mirror]))
    p = primary.shape[0]
    return r[:p], r[p:]


def mirrored_gradient(eps: np.ndarray, values_primary, values_mirror, sigma: float) -> np.ndarray:
    """``1 / (p * sigma) * sum_i eps_i (R_i - R'_i)`` over rank-normalized values."""
    rp, rm = rank_normalize(values_primary, values_mirror)
    p = eps.shape[0]
    return eps.T @ (rp - rm) / (p * sigma)


def mirrored_perturbations(phi: np.ndarray, sigma: float, pairs: int,
                           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``pairs`` noise vectors; returns ``(eps, points)`` with points
    ordered as all ``phi + sigma*eps`` followed by all ``phi - sigma*eps``."""
    eps = rng.standard_normal((pairs, phi.shape[0]))
    points = np.concatenate([phi + sigma * eps, phi - sigma * eps])
    return eps, points


def es_gradients(evaluate: Callable[[np.ndarray], BatchEvaluation], phi, cfg: EsConfig,
                 rng: np.random.Generator) -> tuple[GradientBundle, BatchEvaluation]:
    """Estimate objective and measure gradients at ``phi`` from ``lambda_es``
    mirrored evaluations.

    All gradients reuse the same evaluations.  The batch is returned so
    callers can insert the samples elsewhere or harvest their transitions.
    """
    phi = np.asarray(phi, dtype=np.float64)
    pairs = cfg.lambda_es // 2
    eps, points = mirrored_perturbations(phi, cfg.sigma_e, pairs, rng)
    try:
        results = evaluate(points)
    except EvaluationError as err:
        side = "mirror" if err.index >= pairs else "primary"
        raise EvaluationError(err.index, RuntimeError(
            f"perturbation {err.index % pairs} ({side}): {err.cause!r}")) from err
    columns = np.column_stack([results.objectives, results.measures])
    grads = [mirrored_gradient(eps, columns[:pairs, j], columns[pairs:, j], cfg.sigma_e)
             for j in range(columns.shape[1])]
    return GradientBundle(grads[0], np.array(grads[1:])), results


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2_coeff: float = 0.0

    @classmethod
    def zeros(cls, n: int, alpha: float, **kwargs) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, alpha, **kwargs)


def adam_step(state: AdamState, gradient, params: Optional[np.ndarray] = None
              ) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam step for gradient *ascent*.

    Returns the displacement to add to the parameters and the new state.
    With ``l2_coeff > 0`` the gradient is first decayed by ``l2_coeff * params``.
    """
    g = np.asarray(gradient, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("Adam gradient contains non-finite entries")
    if state.l2_coeff > 0:
        if params is None:
            raise InvalidInputError("params are required when l2_coeff > 0")
        g = g - state.l2_coeff * np.asarray(params, dtype=np.float64)
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    step = state.alpha * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return step, replace(state, first_moment=m, second_moment=v, step_count=t)


class Adam:
    """Mutable wrapper around :func:`adam_step` for long training loops."""

    def __init__(self, n: int, alpha: float, **kwargs):
        self.state = AdamState.zeros(n, alpha, **kwargs)

    def ascent(self, gradient, params=None) -> np.ndarray:
        step, self.state = adam_step(self.state, gradient, params)
        return step

    def descent(self, gradient, params=None) -> np.ndarray:
        step, self.state = adam_step(self.state, -np.asarray(gradient), params)
        return step
