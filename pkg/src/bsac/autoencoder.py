"""Supervised autoencoder: a symmetric autoencoder with a sigmoid classifier
unit on its bottleneck, trained on ``gamma * L_r + (1 - gamma) * L_p``."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .nn import (
    DenseLayer,
    OptimizerState,
    ShapeError,
    adam_step,
    backward,
    bce_grad_logits,
    bce_loss,
    dense_backward,
    dense_forward,
    forward,
    mse_grad,
    mse_loss,
)
from .rng import Rng

log = logging.getLogger(__name__)

TAIWAN_ARCH = (32, 16, 8, 5, 8, 16, 32)
LENDING_CLUB_ARCH = (81, 60, 30, 15, 30, 60, 81)

# derive() keys, so the encoder and head of a model get the same initial
# weights whether or not a decoder is built alongside them
ENCODER_STREAM = 1
DECODER_STREAM = 2
HEAD_STREAM = 3
BATCH_STREAM = 4


def check_layer_sizes(layer_sizes) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 3 or len(sizes) % 2 == 0:
        raise ValueError(f"layer_sizes must have odd length >= 3, got {sizes}")
    if sizes != sizes[::-1]:
        raise ValueError(f"layer_sizes must be palindromic, got {sizes}")
    if min(sizes) < 1:
        raise ValueError("layer sizes must be positive")
    return sizes


@dataclass(frozen=True)
class SAConfig:
    layer_sizes: tuple
    gamma: float = 0.5
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", check_layer_sizes(self.layer_sizes))
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]


@dataclass
class CompositeLoss:
    labels: np.ndarray
    gamma: float


@dataclass(eq=False)
class SAModel:
    encoder: list[DenseLayer]
    decoder: list[DenseLayer]
    head: DenseLayer
    gamma: float
    history: dict = field(default_factory=lambda: {"total": [], "reconstruction": [], "prediction": []})
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.encoder[-1].fan_out != self.head.fan_in or self.decoder[0].fan_in != self.head.fan_in:
            raise ShapeError("bottleneck width must match head and decoder inputs")
        if self.decoder[-1].fan_out != self.encoder[0].fan_in:
            raise ShapeError("decoder output must match input dimension")
        if self.head.fan_out != 1:
            raise ShapeError("classifier head must have a single output unit")

    @classmethod
    def initialize(cls, layer_sizes, gamma: float, rng: Rng) -> "SAModel":
        sizes = check_layer_sizes(layer_sizes)
        mid = len(sizes) // 2
        enc_rng, dec_rng = rng.derive(ENCODER_STREAM), rng.derive(DECODER_STREAM)
        encoder = [
            DenseLayer.glorot(sizes[i], sizes[i + 1], "relu", enc_rng.derive(i)) for i in range(mid)
        ]
        decoder = []
        for i in range(mid, len(sizes) - 1):
            act = "sigmoid" if i == len(sizes) - 2 else "relu"
            decoder.append(DenseLayer.glorot(sizes[i], sizes[i + 1], act, dec_rng.derive(i)))
        head = DenseLayer.glorot(sizes[mid], 1, "sigmoid", rng.derive(HEAD_STREAM))
        return cls(encoder, decoder, head, gamma)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.encoder[0].fan_in,) + tuple(l.fan_out for l in self.encoder + self.decoder)

    @property
    def input_dim(self) -> int:
        return self.encoder[0].fan_in

    @property
    def bottleneck(self) -> int:
        return self.head.fan_in

    def layers(self) -> list[DenseLayer]:
        return self.encoder + self.decoder + [self.head]

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers() for p in layer.parameters()]

    def loss(self, batch, spec: CompositeLoss) -> float:
        recon, probs = sa_forward(self, batch, cache=False)
        return sa_loss(recon, batch, probs, spec.labels, spec.gamma)[0]

    def loss_and_grads(self, batch, spec: CompositeLoss):
        x = np.asarray(batch, dtype=np.float64)
        recon, probs = sa_forward(self, x)
        losses = sa_loss(recon, x, probs, spec.labels, spec.gamma)
        enc, dec, head = _composite_grads(self, x, recon, probs, spec.labels, spec.gamma)
        flat = [g for pair in enc + dec + [head] for g in pair]
        return losses[0], flat


def _check_input(model: SAModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"expected {model.input_dim} feature columns, got shape {x.shape}")
    return x


def encode(model: SAModel, features) -> np.ndarray:
    return forward(model.encoder, _check_input(model, features), cache=False)


def sa_forward(model: SAModel, batch, cache: bool = True):
    """Return ``(reconstruction, probabilities)`` from the shared bottleneck."""
    x = _check_input(model, batch)
    h = forward(model.encoder, x, cache=cache)
    recon = forward(model.decoder, h, cache=cache)
    probs = dense_forward(model.head, h, cache=cache).reshape(-1)
    return recon, probs


def sa_loss(reconstruction, inputs, probabilities, labels, gamma: float):
    """Return ``(total, reconstruction_loss, prediction_loss)``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    l_r = mse_loss(reconstruction, inputs)
    l_p = bce_loss(probabilities, labels)
    return gamma * l_r + (1.0 - gamma) * l_p, l_r, l_p


def _composite_grads(model, x, recon, probs, labels, gamma):
    dec_grads, g_from_decoder = backward(model.decoder, gamma * mse_grad(recon, x))
    head_dz = (1.0 - gamma) * bce_grad_logits(probs, labels)
    dW, db, g_from_head = dense_backward(model.head, head_dz, preactivation=True)
    enc_grads, _ = backward(model.encoder, g_from_decoder + g_from_head)
    return enc_grads, dec_grads, (dW, db)


def sa_train(config: SAConfig, features, labels) -> SAModel:
    """Train one supervised autoencoder for exactly ``config.epochs`` epochs.

    Mini-batches are reshuffled every epoch from a stream derived from
    ``config.seed``; the per-epoch history holds sample-weighted means of the
    batch losses.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} rows but {y.shape[0]} labels")
    if x.shape[1] != config.input_dim:
        raise ShapeError(f"architecture expects {config.input_dim} features, got {x.shape[1]}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")

    rng = Rng(config.seed)
    model = SAModel.initialize(config.layer_sizes, config.gamma, rng)
    if np.unique(y).size < 2:
        msg = "training labels contain a single class; classifier head is degenerate"
        model.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    params = model.parameters()
    state = OptimizerState(learning_rate=config.learning_rate)
    batch_rng = rng.derive(BATCH_STREAM)
    n, bs, gamma = x.shape[0], config.batch_size, config.gamma
    for _ in range(config.epochs):
        order = batch_rng.permutation(n)
        sums = np.zeros(3)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            xb, yb = x[idx], y[idx]
            recon, probs = sa_forward(model, xb)
            sums += len(idx) * np.array(sa_loss(recon, xb, probs, yb, gamma))
            enc, dec, head = _composite_grads(model, xb, recon, probs, yb, gamma)
            adam_step(params, [g for pair in enc + dec + [head] for g in pair], state)
        total, l_r, l_p = sums / n
        model.history["total"].append(float(total))
        model.history["reconstruction"].append(float(l_r))
        model.history["prediction"].append(float(l_p))
    for layer in model.layers():
        layer._cache = None
    log.debug("trained SA gamma=%.2f final loss %.5f", gamma, model.history["total"][-1])
    return model


def sa_predict(model: SAModel, features, threshold: float = 0.5):
    """Probabilities and hard labels; a probability equal to the threshold maps to 1."""
    h = encode(model, features)
    probs = dense_forward(model.head, h, cache=False).reshape(-1)
    return probs, (probs >= threshold).astype(np.int64)
