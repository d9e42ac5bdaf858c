"""Experiment harness: configure, train, evaluate, persist models, and emit
metrics plus PGM visualizations.

One subcommand per model: run-rbm, run-dnn, run-dbn, run-dae, run-dbm,
run-bimodal. Every run writes the echoed config, a metrics file (one
key=value record per epoch plus a summary), the trained model container,
and a PGM visualization into the output directory. Runs are reproducible:
the same config and seed give byte-identical metrics apart from the
wall-clock fields.

Exit codes: 0 success, 1 invalid configuration or usage, 2 missing dataset
files, 3 training divergence (non-finite values).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import dbm as dbm_mod
from . import dbn as dbn_mod
from . import dnn as dnn_mod
from . import multimodal as mm
from . import rbm as rbm_mod
from .core import ActivationKind, ConfigError, LossKind, loss as loss_fn, make_rng
from .data import (FormatError, make_batches, one_of_k, read_mnist_images,
                   read_mnist_labels, shuffle_paired)
from .model_io import save_model
from .optim import AnnealKind, AnnealSchedule, DecayKind, MomentumSchedule, WeightDecaySpec

MODELS = ("rbm", "dnn", "dbn", "dae", "dbm", "bimodal")
DEFAULT_LAYERS = {
    "rbm": [784, 500],
    "dnn": [784, 500, 300, 200, 10],
    "dbn": [784, 500, 300],
    "dae": [784, 500, 300],
    "dbm": [784, 500, 500],
    "bimodal": [784, 500, 300],
}


class UsageError(Exception):
    pass


class DivergenceError(Exception):
    pass


@dataclass
class ExperimentConfig:
    model: str
    layers: list
    epochs: int = 6
    num_batches: int = 100
    lr: float = 0.1
    anneal: str = "none"
    anneal_k: float = 0.0
    momentum_early: float = 0.5
    momentum_late: float = 0.9
    momentum_threshold: int = 5
    decay: str = "none"
    decay_k: float = 0.0
    dropout: float = 0.0
    denoise: float = 0.0
    gibbs: int = 1
    seed: int = 0
    fine_tune: bool = True
    data_dir: str = ""
    out_dir: str = "out"
    subset: int = 0  # 0 means the full dataset

    def validate(self) -> "ExperimentConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if len(self.layers) < 2 or any(n < 1 for n in self.layers):
            raise ConfigError("layers must list at least two positive sizes")
        if self.epochs < 0 or self.num_batches < 1 or self.gibbs < 1:
            raise ConfigError("epochs >= 0, batches >= 1, gibbs >= 1 required")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0.0 <= self.dropout <= 1.0 or not 0.0 <= self.denoise <= 1.0:
            raise ConfigError("dropout and denoise rates must lie in [0, 1]")
        if self.anneal not in ("none", "exp", "div", "step"):
            raise ConfigError(f"unknown anneal kind {self.anneal!r}")
        if self.decay not in ("none", "l1", "l2"):
            raise ConfigError(f"unknown decay kind {self.decay!r}")
        if self.subset < 0:
            raise ConfigError("subset must be >= 0")
        return self

    def train_config(self, epochs: int = None) -> rbm_mod.TrainConfig:
        kind = {"none": AnnealKind.NONE, "exp": AnnealKind.EXPONENTIAL,
                "div": AnnealKind.DIVIDE, "step": AnnealKind.STEP}[self.anneal]
        decay = {"none": DecayKind.NONE, "l1": DecayKind.L1,
                 "l2": DecayKind.L2}[self.decay]
        return rbm_mod.TrainConfig(
            epochs=self.epochs if epochs is None else epochs,
            num_batches=self.num_batches,
            lr=self.lr,
            anneal=AnnealSchedule(kind, self.anneal_k),
            momentum=MomentumSchedule(self.momentum_early, self.momentum_late,
                                      self.momentum_threshold),
            decay=WeightDecaySpec(decay, self.decay_k),
            dropout_rate=self.dropout,
            gibbs_steps=self.gibbs,
            seed=self.seed,
        )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_metrics(records, path) -> None:
    """Write line-delimited key=value records; one line per record."""
    lines = []
    for rec in records:
        lines.append(" ".join(f"{k}={_format_value(v)}" for k, v in rec.items()))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_metrics(path):
    """Read records back with int/float recovery."""
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = {}
        for token in line.split():
            k, _, v = token.partition("=")
            try:
                rec[k] = int(v)
            except ValueError:
                try:
                    rec[k] = float(v)
                except ValueError:
                    rec[k] = v
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# PGM export
# ---------------------------------------------------------------------------

def export_pgm(matrix, rows: int, cols: int, path) -> None:
    """Write matrix rows as a binary PGM (P5) image.

    A single row becomes one rows x cols image; several rows are tiled into
    a near-square grid. Values are mapped linearly from [min, max] of the
    whole matrix onto [0, 255]; a constant matrix becomes mid-gray.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if m.shape[1] != rows * cols:
        raise ConfigError(f"rows {m.shape[1]} values do not reshape to {rows}x{cols}")
    lo, hi = m.min(), m.max()
    if hi > lo:
        scaled = (m - lo) / (hi - lo) * 255.0
    else:
        scaled = np.full_like(m, 128.0)
    tiles = scaled.reshape(-1, rows, cols)
    n = tiles.shape[0]
    grid_cols = int(math.ceil(math.sqrt(n)))
    grid_rows = int(math.ceil(n / grid_cols))
    canvas = np.zeros((grid_rows * rows, grid_cols * cols))
    for i in range(n):
        r, c = divmod(i, grid_cols)
        canvas[r * rows:(r + 1) * rows, c * cols:(c + 1) * cols] = tiles[i]
    height, width = canvas.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.rint(canvas).astype(np.uint8).tobytes())


# ---------------------------------------------------------------------------
# data plumbing
# ---------------------------------------------------------------------------

def _find_file(data_dir: Path, names):
    for name in names:
        p = data_dir / name
        if p.exists():
            return p
    raise FileNotFoundError(f"none of {names} found in {data_dir}")


def load_mnist(data_dir, subset: int = 0):
    d = Path(data_dir)
    train_x = read_mnist_images(_find_file(d, ["train-images-idx3-ubyte",
                                               "train-images.idx3-ubyte"]))
    train_y = read_mnist_labels(_find_file(d, ["train-labels-idx1-ubyte",
                                               "train-labels.idx1-ubyte"]))
    test_x = read_mnist_images(_find_file(d, ["t10k-images-idx3-ubyte",
                                              "t10k-images.idx3-ubyte"]))
    test_y = read_mnist_labels(_find_file(d, ["t10k-labels-idx1-ubyte",
                                              "t10k-labels.idx1-ubyte"]))
    if subset:
        n_test = max(1, subset // 5)
        train_x, train_y = train_x[:subset], train_y[:subset]
        test_x, test_y = test_x[:n_test], test_y[:n_test]
    return train_x, train_y, test_x, test_y


def _check_finite_model(arrays, context: str):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DivergenceError(f"non-finite values after {context}")


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

class _Recorder:
    """Collects per-epoch records; the runner supplies the probes."""

    def __init__(self, probe):
        self.records = []
        self.probe = probe
        self.t0 = time.monotonic()

    def hook(self, epoch, lr, rho):
        rec = {"record": "epoch", "epoch": epoch, "lr": lr, "momentum": rho}
        rec.update(self.probe())
        rec["wall_ms"] = int((time.monotonic() - self.t0) * 1000)
        self.records.append(rec)


def _class_probe(predict_probs, probe_x, probe_y, test_x, test_y, classify):
    def probe():
        probs = np.maximum(predict_probs(probe_x), 1e-12)
        ce = loss_fn(probs, probe_y, LossKind.CROSS_ENTROPY)
        report = classify(test_x, test_y)
        return {"loss": ce, "error": report.error_rate}
    return probe


def run_experiment(cfg: ExperimentConfig):
    """Train per config, write artifacts, return the summary record."""
    cfg.validate()
    data_dir = cfg.data_dir or os.environ.get("MDL_DATA_DIR", "")
    if not data_dir:
        raise FileNotFoundError("no data directory: pass --data-dir or set MDL_DATA_DIR")
    train_x, train_y, test_x, test_y = load_mnist(data_dir, cfg.subset)
    n_classes = 10
    train_onehot = one_of_k(train_y, n_classes)
    train_x, train_onehot = shuffle_paired(train_x, train_onehot, make_rng(cfg.seed))
    num_batches = min(cfg.num_batches, train_x.shape[0])
    batches = make_batches(train_x, train_onehot, num_batches)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n")

    runner = {"rbm": _run_rbm, "dnn": _run_dnn, "dbn": _run_dbn,
              "dae": _run_dae, "dbm": _run_dbm, "bimodal": _run_bimodal}[cfg.model]
    t0 = time.monotonic()
    model, recorder, summary = runner(cfg, batches, train_x, train_onehot,
                                      test_x, test_y, out_dir)
    summary = {"record": "summary", **summary,
               "wall_ms": int((time.monotonic() - t0) * 1000)}
    save_model(out_dir / "model.mdlr", model)
    emit_metrics(recorder.records + [summary], out_dir / "metrics.txt")
    if "error" in summary:
        print(f"final error rate: {summary['error']}")
    elif "recon_error" in summary:
        print(f"final reconstruction error: {summary['recon_error']}")
    return summary


def _filters_pgm(w, out_dir):
    side = int(round(math.sqrt(w.shape[0])))
    if side * side == w.shape[0]:
        export_pgm(w[:, :min(100, w.shape[1])].T, side, side, out_dir / "filters.pgm")


def _run_rbm(cfg, batches, train_x, train_onehot, test_x, test_y, out_dir):
    tc = cfg.train_config()
    rng = make_rng(cfg.seed)
    layer = rbm_mod.RbmLayer.random(cfg.layers[0], cfg.layers[1], rng)
    rbm_mod.train_binary(layer, batches, tc)
    _check_finite_model([layer.w, layer.b_v, layer.b_h], "RBM training")
    head = rbm_mod.RbmLayer.random(cfg.layers[1], 10, rng,
                                   activation=ActivationKind.SOFTMAX)
    feats = [rbm_mod.hidden_given_visible(layer, b[0]) for b in batches]
    labels = [b[1] for b in batches]
    recorder = _Recorder(_class_probe(
        lambda x: dnn_mod.predict(dnn_mod.LayerStack([layer, head]), x),
        batches[0][0], batches[0][1], test_x, test_y,
        lambda x, y: rbm_mod.classify_rbm(layer, head, x, y)))
    rbm_mod.train_classifier_head(head, feats, labels, tc, hook=recorder.hook)
    _check_finite_model([head.w, head.b_h], "classifier training")
    report = rbm_mod.classify_rbm(layer, head, test_x, test_y)
    _filters_pgm(layer.w, out_dir)
    stack = dnn_mod.LayerStack([layer, head])
    return stack, recorder, {"error": report.error_rate, "n": report.n_samples}


def _run_dnn(cfg, batches, train_x, train_onehot, test_x, test_y, out_dir):
    tc = cfg.train_config()
    stack = dnn_mod.pretrain_stack(cfg.layers, batches, tc, pretrain=True)
    feats = dnn_mod.hidden_features(stack, batches)
    labels = [b[1] for b in batches]
    recorder = _Recorder(_class_probe(
        lambda x: dnn_mod.predict(stack, x), batches[0][0], batches[0][1],
        test_x, test_y, lambda x, y: dnn_mod.classify_dnn(stack, x, y)))
    if cfg.fine_tune:
        rbm_mod.train_classifier_head(stack.layers[-1], feats, labels, tc)
        dnn_mod.backprop_fine_tune(stack, batches, batches, cfg.epochs,
                                   LossKind.CROSS_ENTROPY, tc, hook=recorder.hook)
    else:
        rbm_mod.train_classifier_head(stack.layers[-1], feats, labels, tc,
                                      hook=recorder.hook)
    _check_finite_model([l.w for l in stack.layers], "DNN training")
    report = dnn_mod.classify_dnn(stack, test_x, test_y)
    _filters_pgm(stack.layers[0].w, out_dir)
    return stack, recorder, {"error": report.error_rate, "n": report.n_samples}


def _run_dbn(cfg, batches, train_x, train_onehot, test_x, test_y, out_dir):
    tc = cfg.train_config()
    model = dbn_mod.pretrain_dbn(cfg.layers, batches, batches, tc)
    recorder = _Recorder(_class_probe(
        lambda x: dbn_mod.predict_dbn(model, x), batches[0][0], batches[0][1],
        test_x, test_y, lambda x, y: dbn_mod.classify_dbn(model, x, y)))
    if cfg.fine_tune:
        dbn_mod.up_down_fine_tune(model, batches, batches, cfg.epochs, tc,
                                  hook=recorder.hook)
    else:
        for epoch in range(cfg.epochs):
            recorder.hook(epoch, tc.lr, 0.0)
    _check_finite_model([l.w for l in model.recognition] + [model.top.w],
                        "DBN training")
    report = dbn_mod.classify_dbn(model, test_x, test_y)
    _filters_pgm(model.recognition[0].w if model.recognition else model.top.w,
                 out_dir)
    return model, recorder, {"error": report.error_rate, "n": report.n_samples}


def _run_dae(cfg, batches, train_x, train_onehot, test_x, test_y, out_dir):
    tc = cfg.train_config()
    model = ae.build_symmetric(cfg.layers, batches, tc, denoise_rate=cfg.denoise)
    probe_x = batches[0][0]

    def probe():
        return {"loss": ae.reconstruction_error(model, probe_x)}

    recorder = _Recorder(probe)
    if cfg.fine_tune:
        ae.fine_tune_mse(model, batches, cfg.epochs, tc, hook=recorder.hook)
    _check_finite_model([l.w for l in model.stack.layers], "autoencoder training")
    recon_error = ae.reconstruction_error(model, test_x)
    side = int(round(math.sqrt(test_x.shape[1])))
    if side * side == test_x.shape[1]:
        export_pgm(ae.reconstruct(model, test_x[:36]), side, side,
                   out_dir / "recon.pgm")
    return model, recorder, {"recon_error": recon_error, "n": test_x.shape[0]}


def _run_dbm(cfg, batches, train_x, train_onehot, test_x, test_y, out_dir):
    tc = cfg.train_config()
    model = dbm_mod.pretrain_dbm(cfg.layers, batches, tc, labels=batches)
    probe_n = min(500, test_x.shape[0])

    def label_probs(x):
        p = np.maximum(dbm_mod.predict_dbm(model, x), 1e-12)
        return p / p.sum(axis=1, keepdims=True)

    recorder = _Recorder(_class_probe(
        label_probs, batches[0][0], batches[0][1],
        test_x[:probe_n], test_y[:probe_n],
        lambda x, y: dbm_mod.classify_dbm(model, x, y)))
    if cfg.fine_tune:
        dbm_mod.mean_field_train(model, batches, cfg.epochs, cfg.lr, tc,
                                 hook=recorder.hook)
    _check_finite_model(model.weights, "DBM training")
    report = dbm_mod.classify_dbm(model, test_x, test_y)
    _filters_pgm(model.weights[0], out_dir)
    return model, recorder, {"error": report.error_rate, "n": report.n_samples}


def _run_bimodal(cfg, batches, train_x, train_onehot, test_x, test_y, out_dir):
    tc = cfg.train_config()
    half = train_x.shape[1] // 2
    data_a, data_b = train_x[:, :half], train_x[:, half:]
    denoise = cfg.denoise if cfg.denoise > 0 else 0.3
    # pretrain only, then fine-tune here so each epoch can be probed
    model = mm.train_bimodal(data_a, data_b, cfg.layers, tc,
                             denoise_rate=denoise, fine_tune_epochs=0)
    joined = np.hstack([model.scale_a.forward(data_a), model.scale_b.forward(data_b)])
    joined, _ = shuffle_paired(joined, joined, make_rng(cfg.seed))
    joined_batches = make_batches(joined, None, min(cfg.num_batches, joined.shape[0]))
    probe_x = joined[:50]

    def probe():
        return {"loss": ae.reconstruction_error(model.ae, probe_x)}

    recorder = _Recorder(probe)
    ae.fine_tune_mse(model.ae, joined_batches, cfg.epochs, tc, hook=recorder.hook)
    _check_finite_model([l.w for l in model.ae.stack.layers], "bimodal training")
    pred_b = mm.predict_modal(model, test_x[:, :half])
    rate = mm.modal_error_rate(pred_b, test_x[:, half:])
    return model, recorder, {"modal_error_pct": rate, "n": test_x.shape[0]}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common_flags(p: argparse.ArgumentParser, model: str):
    p.add_argument("--layers", type=str, default=None,
                   help="comma-separated layer sizes")
    if model == "rbm":
        p.add_argument("--hidden", type=int, default=None,
                       help="hidden units (shorthand for --layers 784,N)")
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--batches", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--anneal", choices=["none", "exp", "div", "step"], default="none")
    p.add_argument("--anneal-k", type=float, default=0.0)
    p.add_argument("--momentum-early", type=float, default=0.5)
    p.add_argument("--momentum-late", type=float, default=0.9)
    p.add_argument("--momentum-threshold", type=int, default=5)
    p.add_argument("--decay", choices=["none", "l1", "l2"], default="none")
    p.add_argument("--decay-k", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--denoise", type=float, default=0.0)
    p.add_argument("--gibbs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fine-tune", type=int, choices=[0, 1], default=1)
    p.add_argument("--data-dir", type=str, default="")
    p.add_argument("--out-dir", type=str, default="out")
    p.add_argument("--subset", type=int, default=0,
                   help="truncate to N training rows (test gets N/5)")
    p.add_argument("--config", type=str, default=None,
                   help="load a previously echoed config.json (other flags ignored)")


def build_parser() -> _Parser:
    parser = _Parser(prog="boltznet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for model in MODELS:
        p = sub.add_parser(f"run-{model}")
        _add_common_flags(p, model)
    return parser


def config_from_args(args) -> ExperimentConfig:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        return ExperimentConfig(**raw)
    model = args.command.removeprefix("run-")
    if args.layers:
        layers = [int(s) for s in args.layers.split(",") if s]
    elif model == "rbm" and getattr(args, "hidden", None):
        layers = [784, args.hidden]
    else:
        layers = list(DEFAULT_LAYERS[model])
    return ExperimentConfig(
        model=model, layers=layers, epochs=args.epochs, num_batches=args.batches,
        lr=args.lr, anneal=args.anneal, anneal_k=args.anneal_k,
        momentum_early=args.momentum_early, momentum_late=args.momentum_late,
        momentum_threshold=args.momentum_threshold, decay=args.decay,
        decay_k=args.decay_k, dropout=args.dropout, denoise=args.denoise,
        gibbs=args.gibbs, seed=args.seed, fine_tune=bool(args.fine_tune),
        data_dir=args.data_dir, out_dir=args.out_dir, subset=args.subset)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = config_from_args(args)
        run_experiment(cfg)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (FileNotFoundError, FormatError) as exc:
        print(f"missing or unreadable data: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:  # argparse -h
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
