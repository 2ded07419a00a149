"""Shared numeric types, vector helpers and seeded random streams."""
from __future__ import annotations

import enum
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

NORM_EPS = 1e-12


class InvalidInputError(ValueError):
    """Input array has the wrong shape or non-finite entries."""


class ConfigurationError(ValueError):
    """A configuration value (or combination of values) is invalid."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class EmptyArchiveError(LookupError):
    pass


class MetricConfigurationError(ValueError):
    pass


class UnsupportedOperationError(NotImplementedError):
    pass


class GradientUnavailableError(RuntimeError):
    pass


class EvaluationError(RuntimeError):
    """Raised when an environment fails on one solution of a batch."""

    def __init__(self, index: int, cause: BaseException):
        self.index = index
        self.cause = cause
        super().__init__(f"evaluation failed for batch index {index}: {cause!r}")


def as_solution(values, dim: Optional[int] = None) -> np.ndarray:
    """Validate and copy a solution vector to a float64 array."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"solution must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"solution has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("solution contains non-finite entries")
    return arr


def normalize_to_unit(v) -> tuple[np.ndarray, bool]:
    """Scale ``v`` to unit Euclidean norm.

    Returns ``(unit_vector, is_zero)``.  Vectors with norm at or below
    ``NORM_EPS`` come back as zeros with ``is_zero=True``, so a vanishing
    gradient contributes nothing instead of producing NaNs.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("cannot normalize a vector with non-finite entries")
    norm = float(np.linalg.norm(v))
    if norm <= NORM_EPS:
        return np.zeros_like(v), True
    return v / norm, False


@dataclass(frozen=True)
class GradientBundle:
    """Objective gradient ``grad_f`` (n,) and measure gradients ``grad_m`` (k, n)."""

    grad_f: np.ndarray
    grad_m: np.ndarray

    def __post_init__(self):
        gf = np.asarray(self.grad_f, dtype=np.float64)
        gm = np.atleast_2d(np.asarray(self.grad_m, dtype=np.float64))
        if gf.ndim != 1 or gm.shape[1] != gf.shape[0]:
            raise InvalidInputError(
                f"gradient shapes disagree: grad_f {gf.shape}, grad_m {gm.shape}")
        if not (np.all(np.isfinite(gf)) and np.all(np.isfinite(gm))):
            raise InvalidInputError("gradients contain non-finite entries")
        object.__setattr__(self, "grad_f", gf)
        object.__setattr__(self, "grad_m", gm)

    @property
    def stacked(self) -> np.ndarray:
        """(k+1, n) matrix with the objective gradient in row 0."""
        return np.vstack([self.grad_f[None, :], self.grad_m])


@dataclass
class TransitionBatch:
    """Flat arrays of transitions, one row per environment step."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return self.rewards.shape[0]

    @classmethod
    def concatenate(cls, batches) -> "TransitionBatch":
        batches = [b for b in batches if b is not None and len(b)]
        if not batches:
            raise ValueError("no transitions to concatenate")
        return cls(*(np.concatenate([getattr(b, name) for b in batches])
                     for name in ("states", "actions", "rewards", "next_states", "dones")))


@dataclass
class Evaluation:
    objective: float
    measures: np.ndarray
    transitions: Optional[TransitionBatch] = None


@dataclass
class BatchEvaluation:
    """Results of evaluating a batch of solutions.

    ``transitions`` holds per-solution arrays shaped ``(B, T, ...)`` for
    episodic environments and is ``None`` for analytic ones.
    """

    objectives: np.ndarray
    measures: np.ndarray
    transitions: Optional[TransitionBatch] = None
    _episode_len: int = field(default=0, repr=False)

    def __len__(self) -> int:
        return self.objectives.shape[0]

    def __getitem__(self, i: int) -> Evaluation:
        trans = None
        if self.transitions is not None:
            T = self._episode_len
            sl = slice(i * T, (i + 1) * T)
            t = self.transitions
            trans = TransitionBatch(t.states[sl], t.actions[sl], t.rewards[sl],
                                    t.next_states[sl], t.dones[sl])
        return Evaluation(float(self.objectives[i]), self.measures[i].copy(), trans)

    def subset(self, start: int, stop: int) -> "BatchEvaluation":
        trans = None
        if self.transitions is not None:
            T = self._episode_len
            sl = slice(start * T, stop * T)
            t = self.transitions
            trans = TransitionBatch(t.states[sl], t.actions[sl], t.rewards[sl],
                                    t.next_states[sl], t.dones[sl])
        return BatchEvaluation(self.objectives[start:stop], self.measures[start:stop],
                               trans, self._episode_len)

    @classmethod
    def concatenate(cls, parts) -> "BatchEvaluation":
        parts = list(parts)
        trans = None
        if parts[0].transitions is not None:
            trans = TransitionBatch.concatenate([p.transitions for p in parts])
        return cls(np.concatenate([p.objectives for p in parts]),
                   np.concatenate([p.measures for p in parts]),
                   trans, parts[0]._episode_len)


class Stream(enum.IntEnum):
    """Purpose ids for random streams; one generator per purpose."""

    INIT = 0
    EMITTER = 1
    ES = 2
    CMA = 3
    SELECTION = 4
    TD3 = 5
    VARIATION = 6
    ENV_NOISE = 7
    ROBUSTNESS = 8
    ORACLE = 9


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Generator keyed by ``(seed, stream)``.

    PCG64 seeded through ``SeedSequence`` produces the same draws on every
    platform numpy supports, so a fixed pair reproduces bit-identically.
    """
    if not (0 <= int(seed) < 2**64 and 0 <= int(stream) < 2**64):
        raise InvalidInputError("seed and stream id must be unsigned 64-bit integers")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
