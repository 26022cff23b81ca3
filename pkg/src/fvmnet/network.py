"""Dense feedforward regressors built directly on numpy.

A network is a list of (weights, bias) layers: hidden layers share one
nonlinearity (rectifier or logistic), the output layer is linear, and all
arithmetic is 64-bit. Forward passes run as matrix products over sample
batches; gradients come from the chain rule applied layer by layer, with the
rectifier taking subgradient 0 at the kink.

The named size cases a-h are the benchmark ladder used by the sweep command:
widths from one 64-wide layer up to three 256-wide layers, plus a logistic
variant and a tapered variant, all with 30 inputs and one output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DomainError

ACTIVATIONS = ("relu", "sigmoid")


@dataclass(frozen=True)
class NetworkSpec:
    """Layer sizing and nonlinearity; hidden may be empty (a linear map)."""

    n_inputs: int
    hidden: Tuple[int, ...]
    n_outputs: int = 1
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise DomainError("spec needs n_inputs >= 1 and n_outputs >= 1")
        if any(h < 1 for h in self.hidden):
            raise DomainError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    def layer_sizes(self) -> List[Tuple[int, int]]:
        widths = (self.n_inputs, *self.hidden, self.n_outputs)
        return list(zip(widths[:-1], widths[1:]))


def param_count(spec: NetworkSpec) -> int:
    """Total trainables: fan_in * fan_out + fan_out per layer."""
    return sum(fi * fo + fo for fi, fo in spec.layer_sizes())


# Benchmark ladder: 30 stencil inputs -> 1 output throughout.
CASES = {
    "a": NetworkSpec(30, (64,)),
    "b": NetworkSpec(30, (64, 64)),
    "c": NetworkSpec(30, (64, 64, 64)),
    "d": NetworkSpec(30, (64, 64, 64, 64)),
    "e": NetworkSpec(30, (64, 64, 64), activation="sigmoid"),
    "f": NetworkSpec(30, (128, 128, 128)),
    "g": NetworkSpec(30, (256, 256, 256)),
    "h": NetworkSpec(30, (64, 32, 16)),
}


@dataclass
class Network:
    """Parameter container; weights[l] has shape (fan_in, fan_out)."""

    spec: NetworkSpec
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def copy(self) -> "Network":
        return Network(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_network(spec: NetworkSpec, seed: int) -> Network:
    """Seeded uniform init: rectifier layers use bound sqrt(6 / fan_in),
    logistic layers sqrt(6 / (fan_in + fan_out)); biases start at zero."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_sizes():
        if spec.activation == "relu":
            bound = np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(spec=spec, weights=weights, biases=biases)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    # Numerically stable logistic for both signs.
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activation_gradient(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)  # subgradient 0 at the kink
    return a * (1.0 - a)


def forward_batch(net: Network, x: np.ndarray):
    """(outputs, caches): outputs is (n, n_outputs); caches hold every layer's
    pre-activation and activation for the backward pass."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.spec.n_inputs:
        raise DomainError(
            f"input batch must be (n, {net.spec.n_inputs}), got {x.shape}"
        )
    a = x
    pre, post = [], [x]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        a = z if l == last else _activate(z, net.spec.activation)
        pre.append(z)
        post.append(a)
    return a, (pre, post)


def predict(net: Network, x: np.ndarray) -> np.ndarray:
    """Batch outputs without caches, shape (n,) for single-output nets."""
    out, _ = forward_batch(net, x)
    return out[:, 0] if net.spec.n_outputs == 1 else out


def forward(net: Network, x: np.ndarray) -> float:
    """Single-sample scalar output (single-output nets)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError(f"forward takes one sample vector, got shape {x.shape}")
    if net.spec.n_outputs != 1:
        raise DomainError("scalar forward needs a single-output network")
    out, _ = forward_batch(net, x[None, :])
    return float(out[0, 0])


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error over a batch."""
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if predictions.shape != targets.shape:
        raise DomainError(
            f"prediction/target shapes differ: {predictions.shape} vs {targets.shape}"
        )
    diff = predictions - targets
    return float(np.mean(diff * diff))


def backward_batch(net: Network, x: np.ndarray, y: np.ndarray):
    """(loss, weight grads, bias grads) for batch MSE.

    d loss / d output = 2 (pred - target) / n, then the chain rule walks the
    layers in reverse; activation gradients use the cached pre-activations.
    """
    y = np.asarray(y, dtype=np.float64)
    out, (pre, post) = forward_batch(net, x)
    n = out.shape[0]
    yy = y.reshape(n, net.spec.n_outputs)
    diff = out - yy
    loss = float(np.mean(diff * diff))

    grad_w = [None] * len(net.weights)
    grad_b = [None] * len(net.biases)
    delta = 2.0 * diff / diff.size  # d loss / d z on the linear output layer
    for l in range(len(net.weights) - 1, -1, -1):
        grad_w[l] = post[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l].T) * _activation_gradient(
                pre[l - 1], post[l], net.spec.activation
            )
    return loss, grad_w, grad_b
