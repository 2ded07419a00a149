"""Hot loops, each with a numba kernel and a numpy twin.

The public wrappers pick the implementation from ``_accel.USE_NUMBA``; the
``*_numpy`` and ``*_numba`` functions stay importable for tests and the
benchmark.  Both paths do the same arithmetic in the same order per element,
so results agree to rounding (tanh/sum implementations may differ by an ulp).
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit

# -- gait rollout ----------------------------------------------------------


@njit
def _gait_rollout_nb(params, sizes, tanh_out, T, period, obs_noise, act_noise,
                     decay, gain, cost):
    B = params.shape[0]
    L = sizes.shape[0] - 1
    S = sizes[0]
    A = sizes[L]
    width = 0
    for s in sizes:
        if s > width:
            width = s
    states = np.zeros((B, T + 1, S))
    actions = np.zeros((B, T, A))
    rewards = np.zeros((B, T))
    returns = np.zeros(B)
    counts = np.zeros((B, A))
    h = np.empty(width)
    h2 = np.empty(width)
    use_obs = obs_noise.shape[0] > 0
    use_act = act_noise.shape[0] > 0
    half = period // 2
    for b in range(B):
        v = 0.0
        ret = 0.0
        for t in range(T):
            for i in range(S):
                h[i] = states[b, t, i]
                if use_obs:
                    h[i] += obs_noise[b, t, i]
            pos = 0
            for l in range(L):
                nin = sizes[l]
                nout = sizes[l + 1]
                bpos = pos + nin * nout
                for o in range(nout):
                    acc = 0.0
                    row = pos + o * nin
                    for i in range(nin):
                        acc += params[b, row + i] * h[i]
                    acc += params[b, bpos + o]
                    if l < L - 1 or tanh_out:
                        acc = math.tanh(acc)
                    h2[o] = acc
                for o in range(nout):
                    h[o] = h2[o]
                pos = bpos + nout
            first = (t % period) < half
            drive = 0.0
            sq = 0.0
            for j in range(A):
                a = h[j]
                if use_act:
                    a = min(1.0, max(-1.0, a + act_noise[b, t, j]))
                actions[b, t, j] = a
                sq += a * a
                if a > 0.0:
                    counts[b, j] += 1.0
                    if (j == 0) == first:
                        drive += a
            v = decay * v + gain * drive
            r = v - cost * sq
            rewards[b, t] = r
            ret += r
            states[b, t + 1, 0] = v
            states[b, t + 1, 1] = ((t + 1) % period) / period
            for j in range(A):
                states[b, t + 1, 2 + j] = actions[b, t, j]
        returns[b] = ret
    return returns, counts, states, actions, rewards


def _gait_rollout_np(params, sizes, tanh_out, T, period, obs_noise, act_noise,
                     decay, gain, cost):
    B = params.shape[0]
    L = len(sizes) - 1
    S, A = int(sizes[0]), int(sizes[L])
    layers, pos = [], 0
    for l in range(L):
        nin, nout = int(sizes[l]), int(sizes[l + 1])
        W = params[:, pos:pos + nin * nout].reshape(B, nout, nin)
        b = params[:, pos + nin * nout:pos + nin * nout + nout]
        layers.append((W, b))
        pos += nin * nout + nout
    states = np.zeros((B, T + 1, S))
    actions = np.zeros((B, T, A))
    rewards = np.zeros((B, T))
    counts = np.zeros((B, A))
    v = np.zeros(B)
    half = period // 2
    for t in range(T):
        h = states[:, t, :]
        if obs_noise.shape[0] > 0:
            h = h + obs_noise[:, t, :]
        for l, (W, b) in enumerate(layers):
            h = np.einsum("boi,bi->bo", W, h) + b
            if l < L - 1 or tanh_out:
                h = np.tanh(h)
        a = h
        if act_noise.shape[0] > 0:
            a = np.clip(a + act_noise[:, t, :], -1.0, 1.0)
        actions[:, t, :] = a
        pos_mask = a > 0.0
        counts += pos_mask
        window = np.zeros(A, dtype=bool)
        window[0 if (t % period) < half else 1] = True
        drive = np.where(pos_mask & window, a, 0.0).sum(axis=1)
        v = decay * v + gain * drive
        r = v - cost * (a * a).sum(axis=1)
        rewards[:, t] = r
        states[:, t + 1, 0] = v
        states[:, t + 1, 1] = ((t + 1) % period) / period
        states[:, t + 1, 2:] = a
    returns = rewards.sum(axis=1)
    return returns, counts, states, actions, rewards


def gait_rollout_numba(*args):
    return _gait_rollout_nb(*args)


def gait_rollout_numpy(*args):
    return _gait_rollout_np(*args)


def gait_rollout(params, sizes, tanh_out, T, period, obs_noise, act_noise,
                 decay, gain, cost):
    fn = _gait_rollout_nb if _accel.USE_NUMBA else _gait_rollout_np
    return fn(np.ascontiguousarray(params, dtype=np.float64), np.asarray(sizes, dtype=np.int64),
              bool(tanh_out), int(T), int(period), obs_noise, act_noise,
              float(decay), float(gain), float(cost))


# -- k-nearest-neighbour novelty ---------------------------------------------


@njit
def _knn_novelty_nb(points, store, k):
    Q = points.shape[0]
    S = store.shape[0]
    kk = min(k, S)
    out = np.empty(Q)
    best = np.empty(kk)  # k smallest squared distances, ascending
    for q in range(Q):
        filled = 0
        for s in range(S):
            acc = 0.0
            for j in range(points.shape[1]):
                diff = points[q, j] - store[s, j]
                acc += diff * diff
            if filled < kk:
                pos = filled
                filled += 1
            elif acc < best[kk - 1]:
                pos = kk - 1
            else:
                continue
            while pos > 0 and best[pos - 1] > acc:
                best[pos] = best[pos - 1]
                pos -= 1
            best[pos] = acc
        tot = 0.0
        for i in range(kk):
            tot += np.sqrt(best[i])
        out[q] = tot / kk
    return out


def _knn_novelty_np(points, store, k):
    d = np.sqrt(((points[:, None, :] - store[None, :, :]) ** 2).sum(axis=2))
    kk = min(k, store.shape[0])
    ds = np.sort(d, axis=1)[:, :kk]
    tot = np.zeros(points.shape[0])
    for i in range(kk):
        tot += ds[:, i]
    return tot / kk


def knn_novelty_numba(points, store, k):
    return _knn_novelty_nb(points, store, k)


def knn_novelty_numpy(points, store, k):
    return _knn_novelty_np(points, store, k)


def knn_novelty(points, store, k):
    """Mean distance from each row of ``points`` to its ``k`` nearest rows of ``store``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    store = np.ascontiguousarray(store, dtype=np.float64)
    fn = _knn_novelty_nb if _accel.USE_NUMBA else _knn_novelty_np
    return fn(points, store, int(k))
