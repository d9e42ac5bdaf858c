"""Deep Boltzmann machine: layered undirected energy model with
adjusted-weight RBM pretraining, persistent-chain stochastic approximation
guided by mean-field variational inference, and label-unit classification.

Weight bookkeeping: the stored weights are the DBM weights. The bottom-up
initialization pass doubles every weight except the top one (compensating
for the missing top-down input); mean-field sweeps and Gibbs conditionals
use the stored weights in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (ClassificationReport, ConfigError, DomainError, Matrix,
                   ShapeError, classification_report, label_indices, make_rng,
                   sample_bernoulli, sigmoid, softmax)
from .data import batch_part
from .optim import AnnealKind, AnnealSchedule, anneal
from .rbm import RbmLayer, TrainConfig, _train_rbm, pretrain_config

MEAN_FIELD_TOL = 1e-4
MEAN_FIELD_MAX_SWEEPS = 30


def _sample_one_of_k(probs: np.ndarray, rng) -> np.ndarray:
    """One one-hot row per sample, drawn from per-row probabilities.

    The label units form a one-of-K group, so the model phase samples them
    as a unit rather than as independent binary units."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random((probs.shape[0], 1)) * cum[:, -1:]
    idx = (u > cum).sum(axis=1)
    out = np.zeros_like(probs)
    out[np.arange(probs.shape[0]), idx] = 1.0
    return out


@dataclass
class DbmModel:
    """Stacked weights W1..WN with one bias row per layer.

    With labels the top weight's visible side is (h_{N-1} || y), so it has
    label_dim extra rows; label units keep their own bias row. Persistent
    fantasy chains (one state row per chain) live on the model so training
    can resume.
    """

    weights: list
    visible_bias: np.ndarray
    hidden_biases: list
    label_dim: int = 0
    label_bias: np.ndarray = None
    chain_v: np.ndarray = None
    chain_h: list = field(default_factory=list)
    chain_y: np.ndarray = None

    @property
    def sizes(self):
        first = self.weights[0].shape[0]
        return [first] + [w.shape[1] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def top_feature_rows(self) -> int:
        return self.weights[-1].shape[0] - self.label_dim


def dbm_energy(model: DbmModel, v: Matrix, h_list, y: Matrix = None) -> float:
    """Bias-free layered energy:
    -v W1 h1 - sum_i h_{i-1} W_i h_i (labels ride on the top layer's input).
    """

    def as_binary(x, name):
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        if not np.all((x == 0.0) | (x == 1.0)):
            raise DomainError(f"{name} must be a binary state")
        return x

    v = as_binary(v, "visible state")
    hs = [as_binary(h, f"hidden state {i + 1}") for i, h in enumerate(h_list)]
    if len(hs) != model.n_layers:
        raise ShapeError(f"expected {model.n_layers} hidden states, got {len(hs)}")
    if model.label_dim:
        if y is None:
            raise ShapeError("model has label units; pass their state")
        y = as_binary(y, "label state")
    below = [v] + hs[:-1]
    if model.label_dim:
        below[-1] = np.hstack([below[-1], y])
    total = 0.0
    for lower, w, upper in zip(below, model.weights, hs):
        if lower.shape[1] != w.shape[0] or upper.shape[1] != w.shape[1]:
            raise ShapeError("state widths do not match the weights")
        total -= (lower @ w @ upper.T).item()
    return total


def pretrain_dbm(sizes, data, cfg: TrainConfig, labels=None, hook=None) -> DbmModel:
    """Stacked-RBM pretraining with adjusted weights.

    The first RBM trains with a doubled upward pass (2 W up, W^T down); the
    intermediate RBMs train normally and store half their weights and
    hidden biases; the last RBM trains with a doubled downward pass (W up,
    2 W^T down) on [top features || labels]. Persistent chains start from a
    stochastic bottom-up pass of the pretrained model, one chain per batch.
    """
    if len(sizes) < 3:
        raise ConfigError("a DBM needs at least two hidden layers")
    data_batches = batch_part(data, 0)
    label_batches = batch_part(labels, 1) if labels is not None else None
    k = label_batches[0].shape[1] if label_batches else 0
    rng = make_rng(cfg.seed)
    n_hidden = len(sizes) - 1

    weights, hidden_biases = [], []
    visible_bias = None
    label_bias = None
    feats = data_batches
    for i in range(n_hidden):
        first, last = i == 0, i == n_hidden - 1
        up_scale = 2.0 if first and not last else 1.0
        down_scale = 2.0 if last and not first else 1.0
        n_v = sizes[i] + (k if last else 0)
        layer = RbmLayer.random(n_v, sizes[i + 1], rng, index=i)
        if last and label_batches:
            if len(label_batches) != len(feats):
                raise ShapeError("data/label batch counts differ")
            feed = [np.hstack([f, y]) for f, y in zip(feats, label_batches)]
        else:
            feed = feats
        layer_hook = (lambda e, lr, rho, _i=i: hook(_i, e, lr, rho)) if hook else None
        _train_rbm(layer, feed, pretrain_config(cfg, i), up_scale=up_scale,
                   down_scale=down_scale, hook=layer_hook)
        if first:
            visible_bias = layer.b_v.copy()
        if last and k:
            label_bias = layer.b_v[:, sizes[i]:].copy()
        scale = 0.5 if not (first or last) else 1.0
        weights.append(layer.w * scale)
        hidden_biases.append(layer.b_h * scale)
        # feed the next layer the trained RBM's own activation
        feats = [sigmoid(up_scale * (f @ layer.w) + layer.b_h) for f in feed]

    model = DbmModel(weights=weights, visible_bias=visible_bias,
                     hidden_biases=hidden_biases, label_dim=k,
                     label_bias=label_bias)
    _init_chains(model, data_batches, label_batches, rng)
    return model


def _init_chains(model: DbmModel, data_batches, label_batches, rng) -> None:
    """One fantasy chain per batch, seeded by a stochastic bottom-up pass."""
    v0 = np.vstack([b[:1] for b in data_batches])
    model.chain_v = sample_bernoulli(np.clip(v0, 0.0, 1.0), rng)
    if model.label_dim:
        if label_batches:
            model.chain_y = np.vstack([y[:1] for y in label_batches])
        else:
            model.chain_y = sample_bernoulli(
                np.full((v0.shape[0], model.label_dim), 0.5), rng)
    model.chain_h = []
    prev = model.chain_v
    for i, (w, b) in enumerate(zip(model.weights, model.hidden_biases)):
        scale = 2.0 if i < model.n_layers - 1 else 1.0
        if i == model.n_layers - 1 and model.label_dim:
            prev = np.hstack([prev, model.chain_y])
        state = sample_bernoulli(sigmoid(scale * (prev @ w) + b), rng)
        model.chain_h.append(state)
        prev = state


def mean_field_states(model: DbmModel, data: Matrix, y: Matrix = None,
                      clamp_labels: bool = False, tol: float = MEAN_FIELD_TOL,
                      max_sweeps: int = MEAN_FIELD_MAX_SWEEPS,
                      return_history: bool = False):
    """Mean-field posterior means for every hidden layer (and the label
    units when they are free).

    Starts from a bottom-up pass with doubled weights (top layer undoubled),
    then iterates the fixed-point updates with the stored weights in both
    directions until the largest change drops below `tol` or the sweep
    budget runs out. Returns (mu_list, label_mu), plus the per-sweep
    max-change sequence when `return_history` is set.
    """
    v = np.asarray(data, dtype=np.float64)
    n = model.n_layers
    if model.label_dim and clamp_labels and y is None:
        raise ShapeError("clamping labels requires their values")
    y_mu = (np.asarray(y, dtype=np.float64) if (model.label_dim and y is not None)
            else np.zeros((v.shape[0], model.label_dim)))

    mus = []
    prev = v
    for i, (w, b) in enumerate(zip(model.weights, model.hidden_biases)):
        scale = 2.0 if i < n - 1 else 1.0
        inp = np.hstack([prev, y_mu]) if (i == n - 1 and model.label_dim) else prev
        mu = sigmoid(scale * (inp @ w) + b)
        mus.append(mu)
        prev = mu

    n_top_feat = model.top_feature_rows()
    history = []
    for _ in range(max_sweeps):
        max_change = 0.0
        for l in range(n):
            below = v if l == 0 else mus[l - 1]
            if l == n - 1 and model.label_dim:
                below = np.hstack([below, y_mu])
            z = below @ model.weights[l] + model.hidden_biases[l]
            if l < n - 1:
                w_up = model.weights[l + 1]
                rows = w_up.shape[0] - (model.label_dim if l + 1 == n - 1 else 0)
                z = z + mus[l + 1] @ w_up[:rows].T
            new_mu = sigmoid(z)
            max_change = max(max_change, float(np.abs(new_mu - mus[l]).max()))
            mus[l] = new_mu
        if model.label_dim and not clamp_labels:
            new_y = softmax(mus[-1] @ model.weights[-1][n_top_feat:].T
                            + model.label_bias)
            max_change = max(max_change, float(np.abs(new_y - y_mu).max()))
            y_mu = new_y
        history.append(max_change)
        if max_change < tol:
            break
    if return_history:
        return mus, y_mu, history
    return mus, y_mu


def _gibbs_sweep(model: DbmModel, rng) -> None:
    """One sequential Gibbs sweep over every persistent chain."""
    n = model.n_layers
    n_top_feat = model.top_feature_rows()
    model.chain_v = sample_bernoulli(
        sigmoid(model.chain_h[0] @ model.weights[0].T + model.visible_bias), rng)
    for l in range(n):
        below = model.chain_v if l == 0 else model.chain_h[l - 1]
        if l == n - 1 and model.label_dim:
            below = np.hstack([below, model.chain_y])
        z = below @ model.weights[l] + model.hidden_biases[l]
        if l < n - 1:
            w_up = model.weights[l + 1]
            rows = w_up.shape[0] - (model.label_dim if l + 1 == n - 1 else 0)
            z = z + model.chain_h[l + 1] @ w_up[:rows].T
        model.chain_h[l] = sample_bernoulli(sigmoid(z), rng)
    if model.label_dim:
        zy = model.chain_h[-1] @ model.weights[-1][n_top_feat:].T + model.label_bias
        model.chain_y = _sample_one_of_k(softmax(zy), rng)


def mean_field_train(model: DbmModel, batches, iterations: int, lr: float,
                     cfg: TrainConfig, anneal_sched: AnnealSchedule = None,
                     hook=None) -> DbmModel:
    """Stochastic approximation with variational data statistics.

    Each iteration settles the mean field for every data batch (labels
    clamped), advances every persistent chain one Gibbs sweep, and applies
    one update: W_l += alpha_t (data outer products / D - chain outer
    products / M). Biases move with the corresponding mean differences.
    """
    if model.chain_v is None:
        raise ConfigError("model must be pretrained before mean-field training")
    data_batches = batch_part(batches, 0)
    label_batches = batch_part(batches, 1) if model.label_dim else [None] * len(data_batches)
    if anneal_sched is None:
        anneal_sched = AnnealSchedule(AnnealKind.STEP)
    rng = make_rng(cfg.seed)
    n = model.n_layers
    d_total = sum(b.shape[0] for b in data_batches)
    m_chains = model.chain_v.shape[0]

    for t in range(iterations):
        alpha = anneal(lr, t, anneal_sched)
        acc_w = [np.zeros_like(w) for w in model.weights]
        acc_b = [np.zeros_like(b) for b in model.hidden_biases]
        acc_bv = np.zeros_like(model.visible_bias)
        acc_by = np.zeros_like(model.label_bias) if model.label_dim else None
        for x, yb in zip(data_batches, label_batches):
            mus, _ = mean_field_states(model, x, y=yb, clamp_labels=True)
            below = [x] + mus[:-1]
            if model.label_dim:
                below[-1] = np.hstack([below[-1], yb])
            for l in range(n):
                acc_w[l] += below[l].T @ mus[l]
                acc_b[l] += mus[l].sum(axis=0, keepdims=True)
            acc_bv += x.sum(axis=0, keepdims=True)
            if model.label_dim:
                acc_by += yb.sum(axis=0, keepdims=True)
        _gibbs_sweep(model, rng)
        chain_below = [model.chain_v] + model.chain_h[:-1]
        if model.label_dim:
            chain_below[-1] = np.hstack([chain_below[-1], model.chain_y])
        for l in range(n):
            model.weights[l] += alpha * (acc_w[l] / d_total
                                         - chain_below[l].T @ model.chain_h[l] / m_chains)
            model.hidden_biases[l] += alpha * (
                acc_b[l] / d_total
                - model.chain_h[l].mean(axis=0, keepdims=True))
        model.visible_bias += alpha * (acc_bv / d_total
                                       - model.chain_v.mean(axis=0, keepdims=True))
        if model.label_dim:
            model.label_bias += alpha * (acc_by / d_total
                                         - model.chain_y.mean(axis=0, keepdims=True))
        if hook is not None:
            hook(t, alpha, 0.0)
    return model


def predict_dbm(model: DbmModel, data: Matrix) -> Matrix:
    """Label-unit means after a mean-field settle with labels free and
    initialized to zero."""
    if model.label_dim == 0:
        raise ConfigError("model was pretrained without labels")
    _, y_mu = mean_field_states(model, data, y=None, clamp_labels=False)
    return y_mu


def classify_dbm(model: DbmModel, data: Matrix, labels: Matrix) -> ClassificationReport:
    pred = predict_dbm(model, data).argmax(axis=1)
    return classification_report(pred, label_indices(labels), model.label_dim)
