"""Built-in evaluation environments.

Any object with the attributes and methods of :class:`Environment` can be
handed to the schedulers.  A third-party evaluator must supply:

* ``solution_dim``, ``measure_dim`` and ``measure_bounds`` (lower, upper);
* ``evaluate_batch(solutions, rng=None) -> BatchEvaluation`` returning the
  objective and measures of every row, plus transitions when episodic;
* ``initial_solution(rng)`` and ``random_solution(rng)``;
* optionally ``analytic_gradients(phi) -> GradientBundle``;
* optionally, for TD3-based schedulers, ``episodic = True`` together with
  ``policy_spec``, ``state_dim`` and ``action_dim``.
"""
from __future__ import annotations

from concurrent.futures import Executor
from typing import Optional, Protocol

import numpy as np

from . import _kernels
from .core import (BatchEvaluation, GradientBundle, InvalidInputError, TransitionBatch,
                   UnsupportedOperationError)
from .nn import MlpSpec, xavier_init


class Environment(Protocol):
    id: str
    solution_dim: int
    measure_dim: int
    measure_bounds: tuple
    objective_bounds: tuple
    episodic: bool

    def evaluate_batch(self, solutions: np.ndarray, rng: Optional[np.random.Generator] = None,
                       executor: Optional[Executor] = None) -> BatchEvaluation: ...

    def initial_solution(self, rng: np.random.Generator) -> np.ndarray: ...

    def random_solution(self, rng: np.random.Generator) -> np.ndarray: ...


def _check_batch(solutions, dim: int) -> np.ndarray:
    X = np.asarray(solutions, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise InvalidInputError(f"solutions must have shape (B, {dim}), got {np.shape(solutions)}")
    return X


class LinearProjectionSphere:
    """Shifted sphere objective with clipped linear-projection measures.

    The first half of the coordinates drives measure 0 and the second half
    measure 1; each clipped sum is rescaled onto [0, 1].  Exact gradients
    are available, which makes this the reference for gradient estimators.
    """

    id = "lp_sphere"
    episodic = False
    measure_dim = 2

    def __init__(self, n: int = 20, shift: float = 0.4, bound: float = 5.12):
        if n < 2 or n % 2:
            raise InvalidInputError(f"lp_sphere needs an even dimension >= 2, got {n}")
        self.n = int(n)
        self.shift = float(shift)
        self.bound = float(bound)
        self.solution_dim = self.n
        self.measure_bounds = (np.zeros(2), np.ones(2))
        # Lowest objective reachable inside the clip box.
        self.objective_bounds = (-self.n * (self.bound + abs(self.shift)) ** 2, 0.0)

    @property
    def _half(self) -> int:
        return self.n // 2

    def evaluate_batch(self, solutions, rng=None, executor=None) -> BatchEvaluation:
        X = _check_batch(solutions, self.n)
        f = -np.sum((X - self.shift) ** 2, axis=1)
        clipped = np.clip(X, -self.bound, self.bound)
        span = 2 * self.bound * self._half
        m = np.column_stack([
            (clipped[:, :self._half].sum(axis=1) + self.bound * self._half) / span,
            (clipped[:, self._half:].sum(axis=1) + self.bound * self._half) / span,
        ])
        return BatchEvaluation(f, m)

    def analytic_gradients(self, phi) -> GradientBundle:
        phi = np.asarray(phi, dtype=np.float64)
        if phi.shape != (self.n,):
            raise InvalidInputError(f"expected a solution of dimension {self.n}")
        grad_f = -2 * (phi - self.shift)
        inside = (np.abs(phi) < self.bound).astype(np.float64)
        scale = 1.0 / (2 * self.bound * self._half)
        grad_m = np.zeros((2, self.n))
        grad_m[0, :self._half] = scale * inside[:self._half]
        grad_m[1, self._half:] = scale * inside[self._half:]
        return GradientBundle(grad_f, grad_m)

    def initial_solution(self, rng) -> np.ndarray:
        return np.zeros(self.n)

    def random_solution(self, rng) -> np.ndarray:
        return rng.uniform(-self.bound, self.bound, size=self.n)


class GaitPoint:
    """Toy locomotion MDP with two alternating 'feet'.

    State is ``(velocity, gait phase, previous action)``.  Pushing with foot
    ``j`` (action component > 0) accelerates only during that foot's half of
    the gait period; every action pays a quadratic torque cost.  Measures
    are the fraction of steps each action component is positive.  Episodes
    end by timeout only.
    """

    id = "gait_point"
    episodic = True
    measure_dim = 2
    action_dim = 2
    state_dim = 4

    def __init__(self, hidden: tuple = (32, 32), episode_length: int = 200, period: int = 20,
                 obs_noise: float = 0.0, decay: float = 0.9, gain: float = 0.1,
                 torque_cost: float = 0.05):
        self.policy_spec = MlpSpec((self.state_dim, *hidden, self.action_dim), "tanh")
        self.solution_dim = self.policy_spec.n_params
        self.episode_length = int(episode_length)
        self.period = int(period)
        self.obs_noise = float(obs_noise)
        self.decay, self.gain, self.torque_cost = float(decay), float(gain), float(torque_cost)
        self.measure_bounds = (np.zeros(2), np.ones(2))
        # Velocity never goes negative, so the only losses are torque costs.
        self.objective_bounds = (-self.torque_cost * self.action_dim * self.episode_length,
                                 self.gain / (1 - self.decay) * self.episode_length)
        self._sizes = np.array(self.policy_spec.layer_sizes, dtype=np.int64)

    def initial_solution(self, rng) -> np.ndarray:
        return xavier_init(self.policy_spec, rng)

    def random_solution(self, rng) -> np.ndarray:
        return xavier_init(self.policy_spec, rng)

    def evaluate_batch(self, solutions, rng=None, executor=None,
                       action_noise: float = 0.0) -> BatchEvaluation:
        X = _check_batch(solutions, self.solution_dim)
        B, T = X.shape[0], self.episode_length
        empty = np.zeros((0, 0, 0))
        obs = empty
        act = empty
        if self.obs_noise > 0 or action_noise > 0:
            if rng is None:
                raise InvalidInputError("a random generator is required for noisy rollouts")
            if self.obs_noise > 0:
                obs = rng.normal(0.0, self.obs_noise, size=(B, T, self.state_dim))
            if action_noise > 0:
                act = rng.normal(0.0, action_noise, size=(B, T, self.action_dim))
        if executor is None or B < 2:
            parts = [self._rollout(X, obs, act)]
        else:
            workers = getattr(executor, "_max_workers", 1)
            bounds = np.linspace(0, B, min(B, workers) + 1).astype(int)
            futures = [executor.submit(self._rollout, X[a:b],
                                       obs[a:b] if obs.shape[0] else obs,
                                       act[a:b] if act.shape[0] else act)
                       for a, b in zip(bounds[:-1], bounds[1:])]
            parts = [f.result() for f in futures]
        return BatchEvaluation.concatenate(parts)

    def _rollout(self, X, obs, act) -> BatchEvaluation:
        T = self.episode_length
        returns, counts, states, actions, rewards = _kernels.gait_rollout(
            X, self._sizes, self.policy_spec.tanh_output, T, self.period, obs, act,
            self.decay, self.gain, self.torque_cost)
        B = X.shape[0]
        S, A = self.state_dim, self.action_dim
        trans = TransitionBatch(
            states=states[:, :T].reshape(B * T, S),
            actions=actions.reshape(B * T, A),
            rewards=rewards.reshape(B * T),
            next_states=states[:, 1:].reshape(B * T, S),
            dones=np.zeros(B * T, dtype=bool),
        )
        return BatchEvaluation(returns, counts / T, trans, T)

    def analytic_gradients(self, phi):
        raise UnsupportedOperationError("gait_point has no analytic gradients; estimate them")


ENVIRONMENTS = {
    "lp_sphere": LinearProjectionSphere,
    "gait_point": GaitPoint,
}


def make_env(env_id: str, **params):
    try:
        cls = ENVIRONMENTS[env_id]
    except KeyError:
        raise InvalidInputError(
            f"unknown environment {env_id!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(**params)


def evaluate(env, phi, rng=None):
    """Evaluate a single solution; returns an :class:`~dqdrl.core.Evaluation`."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (env.solution_dim,):
        raise InvalidInputError(
            f"solution has shape {phi.shape}, environment expects ({env.solution_dim},)")
    return env.evaluate_batch(phi[None, :], rng=rng)[0]


def analytic_gradients(env, phi) -> GradientBundle:
    fn = getattr(env, "analytic_gradients", None)
    if fn is None:
        raise UnsupportedOperationError(f"{env.id} has no analytic gradients")
    return fn(phi)
