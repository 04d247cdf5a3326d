"""Losses, gradients, learning-rate schedule, Adam and the training loop."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .family import MatrixFamily
from .graph import Dataset, Graph
from .model import ModelConfig, backward as model_backward, build_families, collate, forward, init_params

LOSSES = ("mae", "cross_entropy")
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    initial_lr: float = 1e-3
    lr_decay_steps: int = 35
    lr_decay_rate: float = 0.6
    warmup_steps: int = 5
    weight_decay: float = 0.0
    max_epochs: int = 100
    seed: int = 0
    loss: Optional[str] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.initial_lr < 0 or self.weight_decay < 0 or self.warmup_steps < 0 or self.max_epochs < 0:
            raise ValueError("rates, warmup and epoch counts must be nonnegative")
        if not 0.0 < self.lr_decay_rate <= 1.0:
            raise ValueError("lr_decay_rate must lie in (0, 1]")
        if self.lr_decay_steps < 1:
            raise ValueError("lr_decay_steps must be >= 1")
        if self.loss is not None and self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    train_metric: float
    val_metric: float
    test_metric: float


CSV_FIELDS = ("epoch", "lr", "train_loss", "train_metric", "val_metric", "test_metric")


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    metric: str = "mae"
    model_config: Optional[ModelConfig] = None

    def __len__(self):
        return len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in self.records:
            writer.writerow([r.epoch] + [f"{getattr(r, k):.6g}" for k in CSV_FIELDS[1:]])
        return buf.getvalue()

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def default_loss(task: str) -> str:
    return "mae" if task == "regression" else "cross_entropy"


def loss_and_grad(out: np.ndarray, targets, kind: str) -> tuple[float, np.ndarray]:
    """Batch-mean loss of model outputs ``(B, C)`` and its gradient w.r.t. ``out``."""
    out = np.asarray(out, dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    b = out.shape[0]
    if kind == "mae":
        diff = out[:, 0] - np.asarray(targets, dtype=np.float64)
        grad = np.zeros_like(out)
        # subgradient 0 at the kink
        grad[:, 0] = np.sign(diff) / b
        return float(np.mean(np.abs(diff))), grad
    if kind == "cross_entropy":
        t = np.asarray(targets, dtype=np.int64)
        if np.any(t < 0) or np.any(t >= out.shape[1]):
            raise ValueError(f"class id out of range [0, {out.shape[1]})")
        shifted = out - out.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        logp = shifted - logz[:, None]
        grad = np.exp(logp)
        grad[np.arange(b), t] -= 1.0
        return float(-np.mean(logp[np.arange(b), t])), grad / b
    raise ValueError(f"unknown loss {kind!r}")


def loss(pred, target, kind: str) -> float:
    """Mean loss. ``pred`` is a scalar/vector of predictions (mae) or logits (cross_entropy)."""
    pred = np.asarray(pred, dtype=np.float64)
    if kind == "mae":
        pred = pred.reshape(-1, 1)
        target = np.asarray(target, dtype=np.float64).reshape(-1)
    else:
        pred = np.atleast_2d(pred)
        target = np.asarray(target).reshape(-1)
    return loss_and_grad(pred, target, kind)[0]


def backward(g: Graph, fam: MatrixFamily, cfg: ModelConfig, params: dict, target,
             loss_kind: Optional[str] = None) -> tuple[float, dict]:
    """Loss and parameter gradients for one graph in eval mode."""
    kind = loss_kind or default_loss(cfg.task)
    batch = collate([g], [fam], cfg)
    out, cache = forward(batch, cfg, params)
    value, dout = loss_and_grad(out, [target], kind)
    return value, model_backward(batch, cfg, params, cache, dout)


def lr_at(epoch: int, tc: TrainConfig) -> float:
    """Linear per-epoch warmup, then step decay every ``lr_decay_steps`` epochs."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if epoch < tc.warmup_steps:
        return tc.initial_lr * (epoch + 1) / tc.warmup_steps
    return tc.initial_lr * tc.lr_decay_rate ** ((epoch - tc.warmup_steps) // tc.lr_decay_steps)


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros(cls, params: dict) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float, weight_decay: float = 0.0) -> None:
    """In-place Adam update with decoupled weight decay applied first."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {k}")
    state.t += 1
    c1 = 1.0 - ADAM_BETA1 ** state.t
    c2 = 1.0 - ADAM_BETA2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if weight_decay:
            p -= lr * weight_decay * p
        m = state.m[k]
        v = state.v[k]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def predict_outputs(graphs: Sequence[Graph], families: Sequence[MatrixFamily], cfg: ModelConfig,
                    params: dict, chunk: int = 256) -> np.ndarray:
    outs = []
    for start in range(0, len(graphs), chunk):
        batch = collate(graphs[start:start + chunk], families[start:start + chunk], cfg)
        outs.append(forward(batch, cfg, params)[0])
    if not outs:
        return np.zeros((0, cfg.out_dim))
    return np.concatenate(outs, axis=0)


def metric_value(out: np.ndarray, targets, task: str) -> float:
    if len(out) == 0:
        return float("nan")
    if task == "regression":
        return float(np.mean(np.abs(out[:, 0] - np.asarray(targets, dtype=np.float64))))
    return float(np.mean(np.argmax(out, axis=1) == np.asarray(targets)))


def evaluate(ds: Dataset, idx: Sequence[int], families: Sequence[MatrixFamily], cfg: ModelConfig,
             params: dict) -> float:
    idx = list(idx)
    out = predict_outputs([ds.graphs[i] for i in idx], [families[i] for i in idx], cfg, params)
    return metric_value(out, ds.targets[idx], cfg.task)


def batch_gradients(ds: Dataset, idx: Sequence[int], families: Sequence[MatrixFamily], cfg: ModelConfig,
                    params: dict, kind: str, train: bool = False,
                    rng: Optional[np.random.Generator] = None) -> tuple[float, dict]:
    idx = list(idx)
    batch = collate([ds.graphs[i] for i in idx], [families[i] for i in idx], cfg)
    out, cache = forward(batch, cfg, params, train=train, rng=rng)
    value, dout = loss_and_grad(out, ds.targets[idx], kind)
    return value, model_backward(batch, cfg, params, cache, dout)


def train_epoch(ds: Dataset, order: Sequence[int], families: Sequence[MatrixFamily], cfg: ModelConfig,
                params: dict, state: AdamState, lr: float, tc: TrainConfig, kind: str,
                rng: np.random.Generator) -> float:
    """One pass of minibatch updates over ``order``; returns the mean training loss."""
    total = 0.0
    for start in range(0, len(order), tc.batch_size):
        chunk = order[start:start + tc.batch_size]
        value, grads = batch_gradients(ds, chunk, families, cfg, params, kind, train=True, rng=rng)
        adam_step(params, grads, state, lr, tc.weight_decay)
        total += value * len(chunk)
    return total / len(order)


def train(ds: Dataset, cfg: ModelConfig, tc: TrainConfig,
          callback: Optional[Callable[[EpochRecord, dict], None]] = None,
          families: Optional[Sequence[MatrixFamily]] = None) -> tuple[dict, TrainHistory]:
    """Train a PDF model on ``ds.splits['train']``.

    Deterministic for a fixed ``tc.seed``: initialization, shuffling and dropout
    draw from separate seeded streams. ``callback(record, params)`` runs after
    every epoch.
    """
    cfg = cfg.bind(ds)
    train_idx = ds.subset("train")
    if not train_idx:
        raise ValueError("the training split is empty")
    kind = tc.loss or default_loss(cfg.task)
    if (kind == "mae") != (cfg.task == "regression"):
        raise ValueError(f"loss {kind!r} does not match task {cfg.task!r}")
    if families is None:
        families = build_families(ds.graphs, cfg.family)
    params = init_params(cfg, np.random.default_rng([tc.seed, 0]))
    shuffle_rng = np.random.default_rng([tc.seed, 1])
    dropout_rng = np.random.default_rng([tc.seed, 2])
    state = AdamState.zeros(params)
    history = TrainHistory(metric="mae" if cfg.task == "regression" else "accuracy", model_config=cfg)
    for epoch in range(tc.max_epochs):
        lr = lr_at(epoch, tc)
        order = shuffle_rng.permutation(train_idx)
        train_loss = train_epoch(ds, order, families, cfg, params, state, lr, tc, kind, dropout_rng)
        record = EpochRecord(
            epoch=epoch, lr=lr, train_loss=train_loss,
            train_metric=evaluate(ds, train_idx, families, cfg, params),
            val_metric=evaluate(ds, ds.subset("val"), families, cfg, params),
            test_metric=evaluate(ds, ds.subset("test"), families, cfg, params),
        )
        history.records.append(record)
        if callback is not None:
            callback(record, params)
    return params, history
