"""Twin-critic deterministic actor-critic: replay buffer, critic and greedy
actor training with delayed target updates, and the large-batch policy
gradient estimate for arbitrary policies."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .core import (ConfigurationError, GradientUnavailableError, InvalidInputError,
                   TransitionBatch)
from .es_grad import Adam
from .nn import (MlpSpec, backward, forward, forward_cache, stacked_backward,
                 stacked_forward_cache, xavier_init)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool = False

    def __post_init__(self):
        for name in ("state", "action", "next_state"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"transition {name} must be a finite vector")
            object.__setattr__(self, name, arr)
        if not np.isfinite(self.reward):
            raise InvalidInputError("transition reward must be finite")
        object.__setattr__(self, "reward", float(self.reward))
        object.__setattr__(self, "done", bool(self.done))


def _as_transition_batch(items) -> TransitionBatch:
    if isinstance(items, TransitionBatch):
        return items
    items = list(items)
    if not items:
        return None
    return TransitionBatch(
        states=np.array([t.state for t in items]),
        actions=np.array([t.action for t in items]),
        rewards=np.array([t.reward for t in items]),
        next_states=np.array([t.next_state for t in items]),
        dones=np.array([t.done for t in items], dtype=bool),
    )


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions stored column-wise."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ConfigurationError(f"buffer capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.state_dim, self.action_dim = int(state_dim), int(action_dim)
        self._s = np.empty((self.capacity, self.state_dim))
        self._a = np.empty((self.capacity, self.action_dim))
        self._r = np.empty(self.capacity)
        self._s2 = np.empty((self.capacity, self.state_dim))
        self._d = np.empty(self.capacity, dtype=bool)
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, transitions: Union[TransitionBatch, Iterable[Transition]]) -> "ReplayBuffer":
        batch = _as_transition_batch(transitions)
        if batch is None or len(batch) == 0:
            return self
        if batch.states.shape[1] != self.state_dim or batch.actions.shape[1] != self.action_dim:
            raise InvalidInputError("transition dimensions do not match the buffer")
        n = len(batch)
        cols = (batch.states, batch.actions, batch.rewards, batch.next_states, batch.dones)
        if n >= self.capacity:
            # Only the newest `capacity` items survive.
            cols = tuple(c[n - self.capacity:] for c in cols)
            n = self.capacity
        slots = (self._next + np.arange(n)) % self.capacity
        for dst, src in zip((self._s, self._a, self._r, self._s2, self._d), cols):
            dst[slots] = src
        self._next = int((self._next + n) % self.capacity)
        self.size = min(self.capacity, self.size + n)
        return self

    def take(self, idx: np.ndarray) -> TransitionBatch:
        """Transitions at ring positions ``idx`` (positions < size)."""
        return TransitionBatch(self._s[idx], self._a[idx], self._r[idx], self._s2[idx],
                               self._d[idx])

    def states_at(self, idx: np.ndarray) -> np.ndarray:
        return self._s[idx]

    def contents(self) -> TransitionBatch:
        """All stored transitions, oldest first."""
        start = self._next if self.size == self.capacity else 0
        return self.take((start + np.arange(self.size)) % self.capacity)


def buffer_add(buffer: ReplayBuffer, transitions) -> ReplayBuffer:
    return buffer.add(transitions)


@dataclass(frozen=True)
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    d: int = 2
    sigma_p: float = 0.2
    c_clip: float = 0.5
    n_q: int = 256
    alpha_crit: float = 3e-4
    n_crit: int = 600
    n_pg: int = 65_536
    buffer_capacity: int = 1_000_000
    critic_hidden: tuple = (256, 256)

    def __post_init__(self):
        object.__setattr__(self, "critic_hidden", tuple(int(h) for h in self.critic_hidden))
        problems = []
        if not 0 < self.gamma < 1:
            problems.append(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 < self.tau <= 1:
            problems.append(f"tau must lie in (0, 1], got {self.tau}")
        for name in ("d", "n_q", "n_crit", "n_pg", "buffer_capacity"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.sigma_p < 0:
            problems.append(f"sigma_p must be non-negative, got {self.sigma_p}")
        if self.c_clip < 0:
            problems.append(f"c_clip must be non-negative, got {self.c_clip}")
        if not self.alpha_crit > 0:
            problems.append(f"alpha_crit must be positive, got {self.alpha_crit}")
        if not self.critic_hidden or any(h < 1 for h in self.critic_hidden):
            problems.append(f"critic_hidden must list positive widths, got {self.critic_hidden}")
        if problems:
            raise ConfigurationError(problems)


@dataclass
class Td3State:
    """Live and target networks, their optimizers and the replay buffer.

    The twin critics are stored stacked, row 0 and row 1 of ``critics``
    (likewise ``target_critics``).  Mutated in place by :func:`train_td3`.
    ``steps`` counts critic updates over the whole run; the actor and
    targets move when it hits a multiple of ``d``.
    """

    policy_spec: MlpSpec
    critic_spec: MlpSpec
    critics: np.ndarray
    actor: np.ndarray
    target_critics: np.ndarray
    target_actor: np.ndarray
    buffer: ReplayBuffer
    critic_opt: Adam
    actor_opt: Adam
    action_low: float = -1.0
    action_high: float = 1.0
    steps: int = 0
    actor_updates: int = 0
    skipped: int = 0
    last_critic_loss: float = field(default=float("nan"))

    @property
    def critic1(self) -> np.ndarray:
        return self.critics[0]

    @property
    def critic2(self) -> np.ndarray:
        return self.critics[1]

    @property
    def state_dim(self) -> int:
        return self.policy_spec.input_dim

    @property
    def action_dim(self) -> int:
        return self.policy_spec.output_dim


def init_td3(policy_spec: MlpSpec, cfg: Td3Config, rng: np.random.Generator,
             action_bounds: tuple = (-1.0, 1.0)) -> Td3State:
    """Random critics and greedy actor; targets start as exact copies."""
    S, A = policy_spec.input_dim, policy_spec.output_dim
    critic_spec = MlpSpec((S + A, *cfg.critic_hidden, 1), "identity")
    critics = np.stack([xavier_init(critic_spec, rng), xavier_init(critic_spec, rng)])
    actor = xavier_init(policy_spec, rng)
    return Td3State(
        policy_spec=policy_spec, critic_spec=critic_spec,
        critics=critics, actor=actor,
        target_critics=critics.copy(), target_actor=actor.copy(),
        buffer=ReplayBuffer(cfg.buffer_capacity, S, A),
        critic_opt=Adam(critics.shape, cfg.alpha_crit),
        actor_opt=Adam(policy_spec.n_params, cfg.alpha_crit),
        action_low=float(action_bounds[0]), action_high=float(action_bounds[1]),
    )


def critic_targets(state: Td3State, cfg: Td3Config, batch: TransitionBatch,
                   noise: np.ndarray) -> np.ndarray:
    """Bootstrapped regression targets from the target networks.

    ``noise`` is the already clipped smoothing noise, shape (n, action_dim).
    """
    a2 = forward(state.policy_spec, state.target_actor, batch.next_states) + noise
    a2 = np.clip(a2, state.action_low, state.action_high)
    x2 = np.concatenate([batch.next_states, a2], axis=1)
    q = stacked_forward_cache(state.critic_spec, state.target_critics, x2)[-1][..., 0]
    return batch.rewards + cfg.gamma * (1.0 - batch.dones) * np.minimum(q[0], q[1])


def critic_regression_step(state: Td3State, batch: TransitionBatch, y: np.ndarray) -> float:
    """One Adam step of both critics on mean squared error to ``y``.

    Returns the mean of the two pre-step losses.
    """
    x = np.concatenate([batch.states, batch.actions], axis=1)
    n = x.shape[0]
    acts = stacked_forward_cache(state.critic_spec, state.critics, x)
    err = acts[-1][..., 0] - y
    grad, _ = stacked_backward(state.critic_spec, state.critics, acts, (2.0 / n) * err[..., None])
    state.critics = state.critics + state.critic_opt.descent(grad)
    return float(np.mean(err * err))


def critic_mse(state: Td3State, batch: TransitionBatch, y: np.ndarray) -> float:
    x = np.concatenate([batch.states, batch.actions], axis=1)
    q = stacked_forward_cache(state.critic_spec, state.critics, x)[-1][..., 0]
    return float(np.mean((q - y) ** 2))


def policy_gradient(policy_spec: MlpSpec, phi: np.ndarray, critic_spec: MlpSpec,
                    critic: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Gradient of the mean critic value ``Q(s, pi_phi(s))`` over ``states``
    with respect to the policy parameters."""
    n = states.shape[0]
    pacts = forward_cache(policy_spec, phi, states)
    x = np.concatenate([states, pacts[-1]], axis=1)
    cacts = forward_cache(critic_spec, critic, x)
    _, gin = backward(critic_spec, critic, cacts, np.full((n, 1), 1.0 / n))
    dq_da = gin[:, policy_spec.input_dim:]
    grad, _ = backward(policy_spec, phi, pacts, dq_da)
    return grad


def stacked_policy_gradients(policy_spec: MlpSpec, phis: np.ndarray, critic_spec: MlpSpec,
                             critic: np.ndarray, states: np.ndarray) -> np.ndarray:
    """:func:`policy_gradient` for C policies at once; ``states`` is (C, n, S)."""
    C, n, S = states.shape
    pacts = stacked_forward_cache(policy_spec, phis, states)
    # The critic is shared, so run it once over all C * n rows.
    x = np.concatenate([states, pacts[-1]], axis=2).reshape(C * n, -1)
    cacts = forward_cache(critic_spec, critic, x)
    _, gin = backward(critic_spec, critic, cacts, np.full((C * n, 1), 1.0 / n))
    dq_da = gin[:, S:].reshape(C, n, -1)
    grad, _ = stacked_backward(policy_spec, phis, pacts, dq_da)
    return grad


def polyak(target: np.ndarray, live: np.ndarray, tau: float) -> None:
    """In place: ``target <- tau * live + (1 - tau) * target``."""
    target *= 1.0 - tau
    target += tau * live


def actor_and_target_step(state: Td3State, cfg: Td3Config, states: np.ndarray) -> None:
    grad = policy_gradient(state.policy_spec, state.actor, state.critic_spec,
                           state.critic1, states)
    state.actor = state.actor + state.actor_opt.ascent(grad)
    polyak(state.target_critics, state.critics, cfg.tau)
    polyak(state.target_actor, state.actor, cfg.tau)
    state.actor_updates += 1


def train_td3(state: Td3State, cfg: Td3Config, rng: np.random.Generator,
              steps: Optional[int] = None) -> Td3State:
    """Run ``steps`` (default ``cfg.n_crit``) critic updates with delayed
    actor and target updates.  Skips with a warning while the buffer holds
    fewer than ``n_q`` transitions."""
    steps = cfg.n_crit if steps is None else int(steps)
    size = len(state.buffer)
    if size < cfg.n_q:
        state.skipped += 1
        log.warning("TD3 training skipped: buffer holds %d < %d transitions", size, cfg.n_q)
        return state
    for _ in range(steps):
        batch = state.buffer.take(rng.integers(0, size, size=cfg.n_q))
        noise = np.clip(rng.normal(0.0, cfg.sigma_p, size=batch.actions.shape),
                        -cfg.c_clip, cfg.c_clip)
        y = critic_targets(state, cfg, batch, noise)
        state.last_critic_loss = critic_regression_step(state, batch, y)
        state.steps += 1
        if state.steps % cfg.d == 0:
            actor_and_target_step(state, cfg, batch.states)
    return state


def td3_objective_gradient(phi: np.ndarray, state: Td3State, cfg: Td3Config,
                           rng: np.random.Generator) -> np.ndarray:
    """Critic-based objective gradient for policy ``phi`` from replayed states.

    Draws ``min(n_pg, buffer size)`` distinct transitions; no environment
    interaction happens here.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (state.policy_spec.n_params,):
        raise InvalidInputError(
            f"policy has {phi.shape} parameters, expected ({state.policy_spec.n_params},)")
    size = len(state.buffer)
    if size == 0:
        raise GradientUnavailableError("replay buffer is empty")
    count = min(cfg.n_pg, size)
    idx = rng.choice(size, size=count, replace=False)
    states = state.buffer.states_at(idx)
    return policy_gradient(state.policy_spec, phi, state.critic_spec, state.critic1, states)


@dataclass(frozen=True)
class Td3RunResult:
    greedy_return: float
    train_steps: int
    episodes: int
    history: tuple  # (train steps so far, greedy return) checkpoints


def td3_training_run(env, cfg: Td3Config, train_steps: int, rng: np.random.Generator,
                     warmup_policies: int = 20, exploration_noise: float = 0.1,
                     steps_per_episode: Optional[int] = None,
                     checkpoint_every: int = 10_000) -> Td3RunResult:
    """Plain TD3 on an episodic environment, outside any QD loop.

    Starts the buffer with episodes from random policies, then alternates one
    noisy greedy-actor episode with ``steps_per_episode`` training steps
    (default: the episode length) until ``train_steps`` updates are done.
    """
    if not getattr(env, "episodic", False):
        raise InvalidInputError(f"{env.id} is not episodic; TD3 needs transitions")
    state = init_td3(env.policy_spec, cfg, rng)
    per_episode = steps_per_episode or env.episode_length
    warm = np.array([env.random_solution(rng) for _ in range(warmup_policies)])
    state.buffer.add(env.evaluate_batch(warm, rng=rng, action_noise=exploration_noise).transitions)
    episodes = warmup_policies
    history = []
    next_check = checkpoint_every
    while state.steps < train_steps:
        ev = env.evaluate_batch(state.actor[None, :], rng=rng, action_noise=exploration_noise)
        state.buffer.add(ev.transitions)
        episodes += 1
        train_td3(state, cfg, rng, steps=min(per_episode, train_steps - state.steps))
        if state.steps >= next_check:
            history.append((state.steps, float(env.evaluate_batch(state.actor[None, :]).objectives[0])))
            next_check += checkpoint_every
    final = float(env.evaluate_batch(state.actor[None, :]).objectives[0])
    return Td3RunResult(final, state.steps, episodes, tuple(history))
