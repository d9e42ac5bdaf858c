"""Autoencoder and denoising autoencoder: symmetric construction from
stacked RBMs, input corruption, MSE fine-tuning, reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DomainError, LossKind, Matrix, Rng, ShapeError, make_rng
from .data import batch_part
from .dnn import LayerStack, _pretrain_layers, _StackUpdater, backprop_gradients, forward
from .optim import anneal, momentum_coeff
from .rbm import RbmLayer, TrainConfig


@dataclass
class AeModel:
    """Symmetric reconstruction stack; denoise_rate 0 is a plain autoencoder."""

    stack: LayerStack
    denoise_rate: float = 0.0

    @property
    def sizes(self):
        return self.stack.sizes


def build_symmetric(sizes_half, batches, cfg: TrainConfig,
                    denoise_rate: float = 0.0, hook=None) -> AeModel:
    """Pretrain the encoder half as RBMs and mirror it into the decoder.

    `sizes_half` lists n_0 .. n_{N/2}. Decoder layer i starts from the
    transposed weight of its mirror layer and the mirror RBM's visible bias,
    so the palindrome n_i = n_{N-i} holds by construction.
    """
    if len(sizes_half) < 2:
        raise ConfigError("need at least input size and one encoding size")
    if not 0.0 <= denoise_rate <= 1.0:
        raise ConfigError("denoise rate must lie in [0, 1]")
    encoder, _, _ = _pretrain_layers(sizes_half, batches, cfg, hook=hook)
    decoder = []
    n_half = len(encoder)
    for i, mirror in enumerate(reversed(encoder)):
        decoder.append(RbmLayer(w=mirror.w.T.copy(), b_v=mirror.b_h.copy(),
                                b_h=mirror.b_v.copy(),
                                activation=mirror.activation,
                                index=n_half + i))
    stack = LayerStack(layers=encoder + decoder).validate_chain()
    return AeModel(stack=stack, denoise_rate=denoise_rate)


def corrupt(batch: Matrix, rate: float, rng: Rng) -> Matrix:
    """Element-wise mask with keep probability 1 - rate (fresh mask)."""
    if not 0.0 <= rate <= 1.0:
        raise DomainError("corruption rate must lie in [0, 1]")
    batch = np.asarray(batch, dtype=np.float64)
    mask = (rng.random(batch.shape) > rate).astype(np.float64)
    return batch * mask


def fine_tune_mse(model: AeModel, clean, epochs: int, cfg: TrainConfig,
                  hook=None) -> AeModel:
    """Backpropagate the reconstruction MSE through the whole stack.

    When the model has a denoise rate the input of every batch is freshly
    corrupted each epoch, while the target stays the clean data.
    """
    clean_batches = batch_part(clean, 0)
    rng = make_rng(cfg.seed)
    updater = _StackUpdater(model.stack)
    for epoch in range(epochs):
        lr = anneal(cfg.lr, epoch, cfg.anneal)
        rho = momentum_coeff(epoch, cfg.momentum)
        for target in clean_batches:
            x = corrupt(target, model.denoise_rate, rng) if model.denoise_rate > 0 else target
            grads = backprop_gradients(model.stack, x, target, LossKind.MSE)
            updater.step(model.stack, grads, lr, rho, cfg.decay)
        if hook is not None:
            hook(epoch, lr, rho)
    return model


def reconstruct(model: AeModel, data: Matrix) -> Matrix:
    """Full forward pass; output has the input's shape."""
    data = np.asarray(data, dtype=np.float64)
    out = forward(model.stack, data).a[-1]
    if out.shape != data.shape:
        raise ShapeError("reconstruction shape does not match the input")
    return out


def reconstruction_error(model: AeModel, data: Matrix) -> float:
    """Mean over samples of half the summed squared reconstruction error."""
    from .core import loss

    return loss(reconstruct(model, data), np.asarray(data, dtype=np.float64),
                LossKind.MSE)
