"""Small dense tanh networks over flat parameter vectors, with hand-written
reverse-mode gradients.

Flat layout, layer by layer: the weight matrix ``W`` (out x in) in row-major
order, then the bias (out,).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import InvalidInputError


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple
    output_activation: str = "tanh"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise InvalidInputError(f"need at least two positive layer sizes, got {sizes}")
        if self.output_activation not in ("tanh", "identity"):
            raise InvalidInputError(f"unknown output activation {self.output_activation!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @cached_property
    def n_params(self) -> int:
        return sum((i + 1) * o for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @cached_property
    def offsets(self) -> tuple:
        """(w_start, b_start, b_end) per layer."""
        out, pos = [], 0
        for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            out.append((pos, pos + i * o, pos + i * o + o))
            pos += i * o + o
        return tuple(out)

    @property
    def tanh_output(self) -> bool:
        return self.output_activation == "tanh"


def unflatten(spec: MlpSpec, flat: np.ndarray) -> list:
    """List of ``(W, b)`` views into ``flat``."""
    if flat.shape != (spec.n_params,):
        raise InvalidInputError(f"expected {spec.n_params} parameters, got shape {flat.shape}")
    layers = []
    for (w0, b0, b1), i, o in zip(spec.offsets, spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        layers.append((flat[w0:b0].reshape(o, i), flat[b0:b1]))
    return layers


def flatten(spec: MlpSpec, layers) -> np.ndarray:
    flat = np.concatenate([np.concatenate([np.ravel(W), np.ravel(b)]) for W, b in layers])
    if flat.shape != (spec.n_params,):
        raise InvalidInputError("layer shapes do not match the spec")
    return flat


def xavier_init(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    flat = np.zeros(spec.n_params)
    for (w0, b0, _), i, o in zip(spec.offsets, spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (i + o))
        flat[w0:b0] = rng.uniform(-bound, bound, size=i * o)
    return flat


def _as_batch(spec: MlpSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise InvalidInputError(f"input must have trailing dimension {spec.input_dim}, got {x.shape}")
    return X, single


def forward_cache(spec: MlpSpec, params: np.ndarray, X: np.ndarray) -> list:
    """Activations of every layer for a batch, input first, output last."""
    acts = [X]
    layers = unflatten(spec, params)
    last = len(layers) - 1
    h = X
    for li, (W, b) in enumerate(layers):
        h = h @ W.T + b
        if li < last or spec.tanh_output:
            h = np.tanh(h)
        acts.append(h)
    return acts


def forward(spec: MlpSpec, params: np.ndarray, x) -> np.ndarray:
    """Network output for one input (in,) or a batch (B, in)."""
    X, single = _as_batch(spec, x)
    out = forward_cache(spec, params, X)[-1]
    return out[0] if single else out


def vjp(spec: MlpSpec, params: np.ndarray, x, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Vector-Jacobian products of ``sum(upstream * forward(x))``.

    Returns ``(grad_params, grad_input)``.  For batched input the parameter
    gradient is summed over the batch and the input gradient is per row.
    """
    X, single = _as_batch(spec, x)
    U = np.asarray(upstream, dtype=np.float64)
    U = U[None, :] if U.ndim == 1 else U
    if U.shape != (X.shape[0], spec.output_dim):
        raise InvalidInputError(f"upstream shape {np.shape(upstream)} does not match output")
    acts = forward_cache(spec, params, X)
    grad, gin = backward(spec, params, acts, U)
    return grad, (gin[0] if single else gin)


def backward(spec: MlpSpec, params: np.ndarray, acts: list, upstream: np.ndarray
             ) -> tuple[np.ndarray, np.ndarray]:
    """Backward pass over cached activations (see :func:`forward_cache`)."""
    layers = unflatten(spec, params)
    grad = np.empty(spec.n_params)
    delta = upstream * (1 - acts[-1] ** 2) if spec.tanh_output else upstream
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        w0, b0, b1 = spec.offsets[li]
        grad[w0:b0] = (delta.T @ acts[li]).ravel()
        grad[b0:b1] = delta.sum(axis=0)
        delta = delta @ W
        if li > 0:
            delta = delta * (1 - acts[li] ** 2)
    return grad, delta


def grad_params(spec: MlpSpec, params: np.ndarray, x, upstream) -> np.ndarray:
    return vjp(spec, params, x, upstream)[0]


def grad_input(spec: MlpSpec, params: np.ndarray, x, upstream) -> np.ndarray:
    return vjp(spec, params, x, upstream)[1]


# -- stacked networks ------------------------------------------------------
# Same layout, several parameter vectors at once: ``params`` is (C, P) and
# inputs are (C, n, in), or (n, in) shared by every network.


def stacked_forward_cache(spec: MlpSpec, params: np.ndarray, X: np.ndarray) -> list:
    C = params.shape[0]
    acts = [X]
    last = len(spec.offsets) - 1
    h = X
    for li, ((w0, b0, b1), i, o) in enumerate(zip(spec.offsets, spec.layer_sizes[:-1],
                                                   spec.layer_sizes[1:])):
        W = params[:, w0:b0].reshape(C, o, i)
        h = h @ W.transpose(0, 2, 1) + params[:, None, b0:b1]
        if li < last or spec.tanh_output:
            h = np.tanh(h)
        acts.append(h)
    return acts


def stacked_backward(spec: MlpSpec, params: np.ndarray, acts: list, upstream: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Per-network parameter gradients (C, P), summed over rows, and input
    gradients (C, n, in)."""
    C = params.shape[0]
    grad = np.empty((C, spec.n_params))
    delta = upstream * (1 - acts[-1] ** 2) if spec.tanh_output else upstream
    for li in range(len(spec.offsets) - 1, -1, -1):
        w0, b0, b1 = spec.offsets[li]
        i, o = spec.layer_sizes[li], spec.layer_sizes[li + 1]
        W = params[:, w0:b0].reshape(C, o, i)
        grad[:, w0:b0] = (delta.transpose(0, 2, 1) @ acts[li]).reshape(C, o * i)
        grad[:, b0:b1] = delta.sum(axis=1)
        delta = delta @ W
        if li > 0:
            delta = delta * (1 - acts[li] ** 2)
    return grad, delta
