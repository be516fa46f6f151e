"""Dense feed-forward building blocks: layers, losses, backprop, Adam.

Arrays are float64 numpy matrices with samples on rows.  A layer maps
``(n, fan_in) -> (n, fan_out)`` as ``activation(x @ W + b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import Rng

ACTIVATIONS = ("relu", "sigmoid", "linear")
PROB_FLOOR = 1e-7


class ShapeError(ValueError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(z):
    return np.maximum(z, 0.0)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return relu(z)
    if name == "sigmoid":
        return sigmoid(z)
    return z


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "linear"
    _cache: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias.shape[0] != self.weights.shape[1]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != fan_out {self.weights.shape[1]}"
            )

    @classmethod
    def glorot(cls, fan_in: int, fan_out: int, activation: str, rng: Rng) -> "DenseLayer":
        return cls(glorot_init(fan_in, fan_out, rng), np.zeros(fan_out), activation)

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [self.weights, self.bias]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


def dense_forward(layer: DenseLayer, inputs, cache: bool = True) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.fan_in:
        raise ShapeError(f"expected input with {layer.fan_in} columns, got shape {x.shape}")
    z = x @ layer.weights + layer.bias
    a = _activate(layer.activation, z)
    if cache:
        layer._cache = (x, z, a)
    return a


def dense_backward(layer: DenseLayer, grad_output, preactivation: bool = False):
    """Gradients of a scalar loss through one cached layer.

    ``grad_output`` is dL/da, or dL/dz when ``preactivation`` is set (used for
    a sigmoid output feeding cross-entropy, where dL/dz = (p - y) / n is the
    stable form).  Returns ``(dW, db, dL/dx)``.
    """
    if layer._cache is None:
        raise RuntimeError("dense_backward called without a cached forward pass")
    x, z, a = layer._cache
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != z.shape:
        raise ShapeError(f"gradient shape {g.shape} != output shape {z.shape}")
    dz = g if preactivation else g * _activation_grad(layer.activation, z, a)
    return x.T @ dz, dz.sum(axis=0), dz @ layer.weights.T


def forward(layers: list[DenseLayer], inputs, cache: bool = True) -> np.ndarray:
    out = inputs
    for layer in layers:
        out = dense_forward(layer, out, cache=cache)
    return out


def backward(layers: list[DenseLayer], grad_output, preactivation: bool = False):
    """Backpropagate through a stack after ``forward`` with caching.

    Returns ``(grads, grad_input)`` where ``grads`` is a list of ``(dW, db)``
    aligned with ``layers``.  Parameters are not touched.
    """
    grads = [None] * len(layers)
    g = grad_output
    for i in range(len(layers) - 1, -1, -1):
        dW, db, g = dense_backward(layers[i], g, preactivation=preactivation and i == len(layers) - 1)
        grads[i] = (dW, db)
    return grads, g


def mse_loss(reconstruction, target) -> float:
    r = np.asarray(reconstruction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if r.shape != t.shape:
        raise ShapeError(f"shape mismatch {r.shape} vs {t.shape}")
    if r.size == 0:
        raise ShapeError("empty input")
    d = r - t
    return float(np.mean(d * d))


def mse_grad(reconstruction, target) -> np.ndarray:
    r = np.asarray(reconstruction, dtype=np.float64)
    return 2.0 * (r - target) / r.size


def _check_labels(probabilities, labels):
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"length mismatch {p.shape[0]} vs {y.shape[0]}")
    if p.size == 0:
        raise ShapeError("empty input")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return p, y


def bce_loss(probabilities, labels) -> float:
    """Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    p, y = _check_labels(probabilities, labels)
    p = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_grad_logits(probabilities, labels) -> np.ndarray:
    # d bce / d z for p = sigmoid(z); exact away from the clamp region
    p, y = _check_labels(probabilities, labels)
    return ((p - y) / p.size).reshape(-1, 1)


def glorot_init(fan_in: int, fan_out: int, rng: Rng) -> np.ndarray:
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fan_in and fan_out must be >= 1")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return (2.0 * rng.uniform((fan_in, fan_out)) - 1.0) * limit


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)
    step_count: int = 0


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: OptimizerState):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeError(f"parameter {p.shape} vs gradient {np.shape(g)}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params, state


@dataclass
class LossSpec:
    """Loss for a plain stack: ``"mse"`` against ``target`` or ``"bce"`` against labels."""

    kind: str
    target: np.ndarray


class Sequential:
    """A stack of dense layers with a loss, in the form the gradient checker needs."""

    def __init__(self, layers: list[DenseLayer]):
        self.layers = layers

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def loss(self, batch, spec: LossSpec) -> float:
        out = forward(self.layers, batch, cache=False)
        if spec.kind == "mse":
            return mse_loss(out, spec.target)
        if spec.kind == "bce":
            return bce_loss(out, spec.target)
        raise ValueError(f"unknown loss {spec.kind!r}")

    def loss_and_grads(self, batch, spec: LossSpec):
        out = forward(self.layers, batch)
        if spec.kind == "mse":
            value = mse_loss(out, spec.target)
            grads, _ = backward(self.layers, mse_grad(out, spec.target))
        elif spec.kind == "bce":
            if self.layers[-1].activation != "sigmoid" or self.layers[-1].fan_out != 1:
                raise ValueError("bce needs a single sigmoid output unit")
            value = bce_loss(out, spec.target)
            grads, _ = backward(self.layers, bce_grad_logits(out, spec.target), preactivation=True)
        else:
            raise ValueError(f"unknown loss {spec.kind!r}")
        return value, [g for pair in grads for g in pair]


def finite_diff_gradcheck(network, batch, loss_spec, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``network`` is a list of ``DenseLayer`` (paired with a ``LossSpec``) or any
    object exposing ``parameters()``, ``loss(batch, spec)`` and
    ``loss_and_grads(batch, spec)``.  Every parameter entry is perturbed by
    +/- h; the relative error uses ``max(|a|, |n|, 1e-8)`` as denominator.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if isinstance(network, (list, tuple)):
        network = Sequential(list(network))
    _, analytic = network.loss_and_grads(batch, loss_spec)
    worst = 0.0
    for param, grad in zip(network.parameters(), analytic):
        flat = param.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = network.loss(batch, loss_spec)
            flat[j] = orig - h
            down = network.loss(batch, loss_spec)
            flat[j] = orig
            numeric = (up - down) / (2.0 * h)
            a = gflat[j]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
