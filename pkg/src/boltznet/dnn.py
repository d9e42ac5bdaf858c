"""Deep neural network: greedy layer-wise RBM pretraining, forward pass,
backpropagation fine-tuning, and classification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ActivationKind, ClassificationReport, ConfigError, LossKind,
                   Matrix, ShapeError, activate, activation_derivative,
                   classification_report, label_indices, make_rng)
from .data import batch_part
from .optim import NO_DECAY, anneal, apply_update, momentum_coeff
from .rbm import (RbmLayer, TrainConfig, hidden_given_visible, pretrain_config,
                  train_binary)


@dataclass
class LayerStack:
    """Feed-forward stack of layers with chained dimensions."""

    layers: list

    @property
    def sizes(self):
        return [self.layers[0].n_v] + [layer.n_h for layer in self.layers]

    def validate_chain(self):
        for lower, upper in zip(self.layers, self.layers[1:]):
            if lower.n_h != upper.n_v:
                raise ShapeError(
                    f"layer {lower.index} output {lower.n_h} != "
                    f"layer {upper.index} input {upper.n_v}")
        return self


@dataclass
class ForwardTrace:
    """Pre-activations z(1..N) and activations a(0..N); a[0] is the input."""

    z: list
    a: list


def _pretrain_layers(sizes, batches, cfg: TrainConfig, train: bool = True,
                     hook=None):
    """Initialize and (optionally) greedily train an RBM for each adjacent
    size pair, feeding each layer the previous layer's hidden probabilities.

    Returns (layers, top_feature_batches, rng) so callers can keep drawing
    from the same stream. Shared by the DNN, DBN, and autoencoder builders
    so identical seeds give identical layers.
    """
    rng = make_rng(cfg.seed)
    layers = [RbmLayer.random(sizes[i - 1], sizes[i], rng, index=i - 1)
              for i in range(1, len(sizes))]
    feats = batch_part(batches, 0)
    for i, layer in enumerate(layers):
        if train:
            layer_hook = (lambda e, lr, rho, _i=i: hook(_i, e, lr, rho)) if hook else None
            train_binary(layer, feats, pretrain_config(cfg, i), hook=layer_hook)
        feats = [hidden_given_visible(layer, f) for f in feats]
    return layers, feats, rng


def pretrain_stack(sizes, batches, cfg: TrainConfig, pretrain: bool = True,
                   hook=None) -> LayerStack:
    """Build a classifier stack: hidden layers greedily pretrained as RBMs
    (or randomly initialized when pretrain is false) plus a randomly
    initialized softmax output layer, left for the classifier head trainer.
    """
    if len(sizes) < 2:
        raise ConfigError("a stack needs at least input and output sizes")
    hidden, _, rng = _pretrain_layers(sizes[:-1], batches, cfg, train=pretrain,
                                      hook=hook)
    head = RbmLayer.random(sizes[-2], sizes[-1], rng,
                           activation=ActivationKind.SOFTMAX,
                           index=len(sizes) - 2)
    return LayerStack(layers=hidden + [head]).validate_chain()


def forward(stack: LayerStack, batch: Matrix) -> ForwardTrace:
    """Full forward pass keeping every pre-activation and activation."""
    a = np.asarray(batch, dtype=np.float64)
    if a.shape[1] != stack.layers[0].n_v:
        raise ShapeError(f"input width {a.shape[1]} != {stack.layers[0].n_v}")
    zs, activations = [], [a]
    for layer in stack.layers:
        z = activations[-1] @ layer.w + layer.b_h
        zs.append(z)
        activations.append(activate(z, layer.activation))
    return ForwardTrace(z=zs, a=activations)


def _output_delta(a_out: Matrix, target: Matrix, loss: LossKind,
                  out_kind: ActivationKind) -> Matrix:
    """Per-sample delta at the output layer (the 1/m factor is applied when
    gradients are formed)."""
    if loss == LossKind.CROSS_ENTROPY:
        if out_kind != ActivationKind.SOFTMAX:
            raise ConfigError("cross entropy expects a softmax output layer")
        return a_out - target
    if loss == LossKind.MSE:
        return (a_out - target) * activation_derivative(a_out, out_kind)
    raise ConfigError(f"unsupported fine-tuning loss: {loss!r}")


def backprop_gradients(stack: LayerStack, batch: Matrix, target: Matrix,
                       loss: LossKind):
    """Per-layer (dW, db) for the row-averaged loss on one batch."""
    trace = forward(stack, batch)
    m = batch.shape[0]
    delta = _output_delta(trace.a[-1], target, loss, stack.layers[-1].activation)
    grads = [None] * len(stack.layers)
    for l in range(len(stack.layers) - 1, -1, -1):
        layer = stack.layers[l]
        dw = trace.a[l].T @ delta / m
        db = delta.mean(axis=0, keepdims=True)
        grads[l] = (dw, db)
        if l > 0:
            below = stack.layers[l - 1]
            delta = (delta @ layer.w.T) * activation_derivative(
                trace.a[l], below.activation)
    return grads


class _StackUpdater:
    """Momentum state for every layer of a stack."""

    def __init__(self, stack: LayerStack):
        self.vel = [(np.zeros_like(l.w), np.zeros_like(l.b_h)) for l in stack.layers]

    def step(self, stack: LayerStack, grads, lr: float, rho: float, decay):
        for l, (layer, (dw, db)) in enumerate(zip(stack.layers, grads)):
            vw, vb = self.vel[l]
            layer.w, vw = apply_update(layer.w, dw, vw, lr, rho, decay)
            layer.b_h, vb = apply_update(layer.b_h, db, vb, lr, rho, NO_DECAY)
            self.vel[l] = (vw, vb)


def backprop_fine_tune(stack: LayerStack, data, labels, epochs: int,
                       loss: LossKind, cfg: TrainConfig, hook=None) -> LayerStack:
    """Refine all layers by backpropagation (in place)."""
    data_batches = batch_part(data, 0)
    label_batches = batch_part(labels, 1)
    if len(data_batches) != len(label_batches):
        raise ShapeError("data/label batch counts differ")
    updater = _StackUpdater(stack)
    for epoch in range(epochs):
        lr = anneal(cfg.lr, epoch, cfg.anneal)
        rho = momentum_coeff(epoch, cfg.momentum)
        for x, t in zip(data_batches, label_batches):
            grads = backprop_gradients(stack, x, t, loss)
            updater.step(stack, grads, lr, rho, cfg.decay)
        if hook is not None:
            hook(epoch, lr, rho)
    return stack


def predict(stack: LayerStack, data: Matrix) -> np.ndarray:
    return forward(stack, data).a[-1]


def classify_dnn(stack: LayerStack, data: Matrix, labels: Matrix) -> ClassificationReport:
    """Argmax of the final softmax emission against the true classes."""
    pred = predict(stack, data).argmax(axis=1)
    return classification_report(pred, label_indices(labels),
                                 stack.layers[-1].n_h)


def hidden_features(stack: LayerStack, batches):
    """Propagate batches through every layer except the output head."""
    feats = batch_part(batches, 0)
    for layer in stack.layers[:-1]:
        feats = [hidden_given_visible(layer, f) for f in feats]
    return feats
