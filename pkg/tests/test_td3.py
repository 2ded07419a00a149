import logging
from dataclasses import replace

import numpy as np
import pytest

from dqdrl.core import ConfigurationError, GradientUnavailableError, TransitionBatch
from dqdrl.nn import MlpSpec, forward, xavier_init
from dqdrl.td3 import (ReplayBuffer, Td3Config, Transition, buffer_add, critic_mse,
                       critic_regression_step, critic_targets, init_td3, policy_gradient,
                       polyak, stacked_policy_gradients, td3_objective_gradient, train_td3)

POLICY = MlpSpec((4, 8, 2), "tanh")
SMALL = Td3Config(n_q=16, n_crit=4, n_pg=64, buffer_capacity=10_000, critic_hidden=(16, 16))


def _transitions(rng, n, done=False):
    return TransitionBatch(rng.standard_normal((n, 4)), rng.uniform(-1, 1, (n, 2)),
                           rng.standard_normal(n), rng.standard_normal((n, 4)),
                           np.full(n, done))


def _tr(tag):
    return Transition(np.full(2, tag), np.zeros(1), tag, np.zeros(2))


def test_fifo_capacity_three():
    buf = ReplayBuffer(3, 2, 1)
    buffer_add(buf, [_tr(1.0), _tr(2.0), _tr(3.0), _tr(4.0)])
    assert buf.contents().rewards.tolist() == [2.0, 3.0, 4.0]
    buffer_add(buf, [])
    assert len(buf) == 3
    buffer_add(buf, [_tr(5.0)])
    assert buf.contents().rewards.tolist() == [3.0, 4.0, 5.0]


def test_fifo_property_against_deque(rng):
    from collections import deque
    buf = ReplayBuffer(7, 2, 1)
    ref = deque(maxlen=7)
    counter = 0
    for _ in range(40):
        n = int(rng.integers(0, 12))
        items = [_tr(float(counter + i)) for i in range(n)]
        counter += n
        buf.add(items)
        ref.extend(t.reward for t in items)
        assert buf.contents().rewards.tolist() == list(ref)


def test_buffer_fills_to_capacity():
    buf = ReplayBuffer(1_000_000, 1, 1)
    n = 1_000_000
    z = np.zeros((n, 1))
    buf.add(TransitionBatch(z, z, np.zeros(n), z, np.zeros(n, dtype=bool)))
    assert len(buf) == 1_000_000


def test_transition_validation():
    with pytest.raises(Exception):
        Transition(np.array([np.nan]), np.zeros(1), 0.0, np.zeros(1))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        Td3Config(d=0)
    with pytest.raises(ConfigurationError):
        Td3Config(c_clip=-1.0)


def test_targets_start_as_copies(rng):
    s = init_td3(POLICY, SMALL, rng)
    assert np.array_equal(s.target_critics, s.critics)
    assert np.array_equal(s.target_actor, s.actor)
    assert s.target_critics is not s.critics


def test_polyak_moves_half_percent_of_gap():
    target = np.array([0.0, 10.0, -4.0])
    live = np.array([1.0, 0.0, 4.0])
    gap = live - target
    polyak(target, live, 0.005)
    np.testing.assert_allclose(target - np.array([0.0, 10.0, -4.0]), 0.005 * gap,
                               rtol=0, atol=1e-15)


def test_polyak_closed_form_after_many_updates(rng):
    t0 = rng.standard_normal(50)
    live = rng.standard_normal(50)
    t = t0.copy()
    for _ in range(300):
        polyak(t, live, 0.005)
    k = (1 - 0.005) ** 300
    np.testing.assert_allclose(t, k * t0 + (1 - k) * live, rtol=0, atol=1e-12)


def test_delay_two_gives_two_updates_in_four_steps(rng):
    s = init_td3(POLICY, SMALL, rng)
    s.buffer.add(_transitions(rng, 64))
    before = s.target_actor.copy()
    train_td3(s, SMALL, rng)
    assert s.steps == 4 and s.actor_updates == 2
    assert not np.array_equal(s.target_actor, before)


def test_targets_untouched_between_delayed_steps(rng):
    cfg = replace(SMALL, n_crit=1)
    s = init_td3(POLICY, cfg, rng)
    s.buffer.add(_transitions(rng, 64))
    tc = s.target_critics.copy()
    train_td3(s, cfg, rng)
    assert s.actor_updates == 0 and np.array_equal(s.target_critics, tc)
    train_td3(s, cfg, rng)
    assert s.actor_updates == 1 and not np.array_equal(s.target_critics, tc)


def test_training_skips_small_buffer(rng, caplog):
    s = init_td3(POLICY, SMALL, rng)
    s.buffer.add(_transitions(rng, 5))
    with caplog.at_level(logging.WARNING):
        train_td3(s, SMALL, rng)
    assert s.steps == 0 and s.skipped == 1
    assert "skipped" in caplog.text


def test_critic_mse_decreases_on_frozen_batch(rng):
    s = init_td3(POLICY, SMALL, rng)
    batch = _transitions(rng, 32)
    noise = np.clip(rng.normal(0, 0.2, (32, 2)), -0.5, 0.5)
    y = critic_targets(s, SMALL, batch, noise)
    losses = [critic_mse(s, batch, y)]
    for _ in range(50):
        critic_regression_step(s, batch, y)
        losses.append(critic_mse(s, batch, y))
    assert all(b < a for a, b in zip(losses[:11], losses[1:11]))


def test_terminal_target_is_reward(rng):
    s = init_td3(POLICY, SMALL, rng)
    batch = _transitions(rng, 10, done=True)
    y = critic_targets(s, SMALL, batch, np.zeros((10, 2)))
    assert np.array_equal(y, batch.rewards)


def test_target_symmetric_in_critic_order(rng):
    s = init_td3(POLICY, SMALL, rng)
    batch = _transitions(rng, 20)
    noise = np.clip(rng.normal(0, 0.2, (20, 2)), -0.5, 0.5)
    y = critic_targets(s, SMALL, batch, noise)
    s.target_critics = s.target_critics[::-1].copy()
    assert np.array_equal(critic_targets(s, SMALL, batch, noise), y)


def _linear_critic(spec):
    """Critic weights giving Q(s, a) = a_1 exactly."""
    flat = np.zeros(spec.n_params)
    flat[spec.input_dim - 2] = 1.0
    return flat


def test_policy_gradient_linear_critic_finite_differences(rng):
    pspec = MlpSpec((4, 2), "tanh")
    cspec = MlpSpec((6, 1), "identity")
    critic = _linear_critic(cspec)
    phi = xavier_init(pspec, rng)
    states = rng.standard_normal((200, 4))
    g = policy_gradient(pspec, phi, cspec, critic, states)

    def mean_a1(p):
        return forward(pspec, p, states)[:, 0].mean()

    for j in range(pspec.n_params):
        e = np.zeros(pspec.n_params)
        e[j] = 1e-6
        fd = (mean_a1(phi + e) - mean_a1(phi - e)) / 2e-6
        assert abs(fd - g[j]) <= 1e-4 * max(abs(fd), 1e-8) + 1e-10


def test_objective_gradient_zero_for_flat_critic(rng):
    s = init_td3(POLICY, SMALL, rng)
    s.critics[:] = 0.0
    s.buffer.add(_transitions(rng, 50))
    g = td3_objective_gradient(np.zeros(POLICY.n_params), s, SMALL, rng)
    assert not g.any()


def test_objective_gradient_deterministic_and_no_env(rng):
    s = init_td3(POLICY, SMALL, rng)
    s.buffer.add(_transitions(rng, 100))
    phi = xavier_init(POLICY, rng)
    a = td3_objective_gradient(phi, s, SMALL, np.random.default_rng(5))
    b = td3_objective_gradient(phi, s, SMALL, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_objective_gradient_uses_whole_small_buffer(rng):
    s = init_td3(POLICY, replace(SMALL, n_pg=10_000), rng)
    s.buffer.add(_transitions(rng, 30))
    phi = xavier_init(POLICY, rng)
    g = td3_objective_gradient(phi, s, replace(SMALL, n_pg=10_000), rng)
    full = policy_gradient(POLICY, phi, s.critic_spec, s.critic1, s.buffer.contents().states)
    np.testing.assert_allclose(g, full, atol=1e-14)


def test_objective_gradient_empty_buffer(rng):
    s = init_td3(POLICY, SMALL, rng)
    with pytest.raises(GradientUnavailableError):
        td3_objective_gradient(np.zeros(POLICY.n_params), s, SMALL, rng)


def test_stacked_policy_gradients_match_single(rng):
    s = init_td3(POLICY, SMALL, rng)
    phis = np.stack([xavier_init(POLICY, rng) for _ in range(4)])
    states = rng.standard_normal((4, 25, 4))
    G = stacked_policy_gradients(POLICY, phis, s.critic_spec, s.critic1, states)
    for c in range(4):
        np.testing.assert_allclose(
            G[c], policy_gradient(POLICY, phis[c], s.critic_spec, s.critic1, states[c]),
            atol=1e-13)


def test_training_deterministic(rng):
    runs = []
    for _ in range(2):
        r = np.random.default_rng(11)
        s = init_td3(POLICY, SMALL, r)
        s.buffer.add(_transitions(np.random.default_rng(1), 200))
        train_td3(s, SMALL, r, steps=20)
        runs.append((s.critics.copy(), s.actor.copy(), s.target_actor.copy()))
    for a, b in zip(*runs):
        assert np.array_equal(a, b)
