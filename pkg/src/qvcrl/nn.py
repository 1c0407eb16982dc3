"""Small dense networks in numpy: forward/backward, MSE, and ADAM."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from qvcrl.errors import ConfigError

ACTIVATIONS = ("identity", "relu")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ConfigError(f"inconsistent layer shapes {self.weights.shape} / {self.bias.shape}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def trainable_count(self) -> int:
        return self.weights.size + self.bias.size

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator, activation: str = "identity") -> "DenseLayer":
        """Uniform Glorot weights, zero bias."""
        limit = np.sqrt(6.0 / (n_in + n_out))
        return cls(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out), activation)

    def preactivation(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ConfigError(f"layer expects {self.n_in} inputs, got {x.shape[-1]}")
        return x @ self.weights.T + self.bias

    def forward(self, x: np.ndarray) -> np.ndarray:
        z = self.preactivation(x)
        return np.maximum(z, 0.0) if self.activation == "relu" else z

    def backward(self, x: np.ndarray, upstream: np.ndarray):
        """Gradients for a batch ``x`` of shape ``(B, in)`` (or a single vector).

        Returns ``(dW, db, dx)``; parameter gradients are summed over the batch.
        """
        single = np.ndim(x) == 1
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
        if self.activation == "relu":
            g = g * (self.preactivation(x) > 0)
        dx = g @ self.weights
        return g.T @ x, g.sum(axis=0), dx[0] if single else dx

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])

    def set_flat(self, flat: np.ndarray) -> None:
        k = self.weights.size
        self.weights = np.asarray(flat[:k], dtype=np.float64).reshape(self.weights.shape).copy()
        self.bias = np.asarray(flat[k:], dtype=np.float64).copy()


@dataclass
class MLP:
    """Dense stack: relu on hidden layers, identity on the output layer."""

    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("an MLP needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ConfigError(f"layer size mismatch {a.n_out} -> {b.n_in}")

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator) -> "MLP":
        if len(sizes) < 2:
            raise ConfigError("sizes must list at least input and output widths")
        last = len(sizes) - 2
        return cls([
            DenseLayer.init(a, b, rng, "identity" if i == last else "relu")
            for i, (a, b) in enumerate(zip(sizes, sizes[1:]))
        ])

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def trainable_count(self) -> int:
        return sum(layer.trainable_count for layer in self.layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, x: np.ndarray, upstream: np.ndarray):
        """Returns ``(flat parameter gradient, input gradient)``."""
        single = np.ndim(x) == 1
        inputs = [np.atleast_2d(np.asarray(x, dtype=np.float64))]
        for layer in self.layers[:-1]:
            inputs.append(layer.forward(inputs[-1]))
        grads = []
        g = upstream
        for layer, inp in zip(reversed(self.layers), reversed(inputs)):
            dw, db, g = layer.backward(inp, g)
            grads.append(np.concatenate([dw.ravel(), db]))
        return np.concatenate(grads[::-1]), g[0] if single else g

    def get_flat(self) -> np.ndarray:
        return np.concatenate([layer.get_flat() for layer in self.layers])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.trainable_count,):
            raise ConfigError(f"expected {self.trainable_count} values, got {flat.shape}")
        start = 0
        for layer in self.layers:
            layer.set_flat(flat[start:start + layer.trainable_count])
            start += layer.trainable_count


def dense_forward(net, x) -> np.ndarray:
    return net.forward(x)


def dense_backward(net, x, upstream):
    """Analytic gradients of ``sum(upstream * net(x))``.

    For a :class:`DenseLayer` returns ``(dW, db, dx)``; for an :class:`MLP`
    returns ``(flat_param_grad, dx)``.
    """
    return net.backward(x, upstream)


def mse_loss(pred, target):
    """Mean squared error and its gradient ``2 (pred - target) / N``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


@dataclass
class AdamState:
    size: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected ADAM update. Mutates ``state``; returns new parameters."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != (state.size,) or grads.shape != (state.size,):
        raise ConfigError(f"ADAM state has size {state.size}, got params {params.shape}, grads {grads.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def mlp_count(sizes: Sequence[int]) -> int:
    return sum((a + 1) * b for a, b in zip(sizes, sizes[1:]))


@lru_cache(maxsize=None)
def baseline_widths(n_in: int, n_out: int, depth: int, target: int, max_width: int = 64) -> tuple[int, ...]:
    """Hidden widths whose trainable count is closest to ``target``.

    Ties go to the most uniform widths, then the lexicographically smallest.
    """
    if depth < 1:
        raise ConfigError("depth must be >= 1")
    grids = np.meshgrid(*[np.arange(1, max_width + 1)] * depth, indexing="ij")
    hs = [g.ravel() for g in grids]
    sizes = [np.full_like(hs[0], n_in)] + hs + [np.full_like(hs[0], n_out)]
    counts = sum((a + 1) * b for a, b in zip(sizes, sizes[1:]))
    spread = np.max(hs, axis=0) - np.min(hs, axis=0)
    # lexsort: last key is primary
    order = np.lexsort(tuple(hs[::-1]) + (spread, np.abs(counts - target)))
    best = order[0]
    return tuple(int(h[best]) for h in hs)


# trainable counts of the reference baselines, by environment and hidden depth
BASELINE_TARGETS = {
    "cartpole": (4, 2, {1: 58, 2: 226, 3: 1282}),
    "blackjack": (3, 2, {1: 38, 2: 194, 3: 1250}),
}


def baseline_sizes(env: str, depth: int) -> list[int]:
    if env not in BASELINE_TARGETS:
        raise ConfigError(f"unknown environment {env!r}")
    n_in, n_out, targets = BASELINE_TARGETS[env]
    if depth not in targets:
        raise ConfigError(f"baseline depth must be 1, 2 or 3, got {depth}")
    return [n_in, *baseline_widths(n_in, n_out, depth, targets[depth]), n_out]


def baseline_mlp_for(env: str, depth: int, rng: np.random.Generator) -> MLP:
    """Baseline network for ``env``; counts: CartPole 58/225/1282, Blackjack 38/194/1250.

    CartPole depth 2 cannot hit 226 exactly with integer widths, so it uses the
    nearest achievable count (225, widths 11 and 12).
    """
    return MLP.init(baseline_sizes(env, depth), rng)
