"""Model factory, loss, mini-batch training and evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..autograd import Tape
from ..errors import ContractError, DivergenceError
from ..gcnn.model import build_gcnn_classifier
from ..layers.lenet import lenet5_build
from ..layers.module import Module
from ..optim import apply, make_optimizer
from .checkpoint import checkpoint_save
from .data import Dataset, make_batches

LOSSES = ("nll", "l2")


def build_model(config: dict, rng: np.random.Generator) -> Module:
    """Build from a JSON-able config: {"model": "lenet5" | "gcnn", "init": ..., gcnn: K, widths, ...}."""
    kind = config.get("model", "lenet5")
    init = config.get("init", "xavier" if kind == "lenet5" else "he")
    if kind == "lenet5":
        return lenet5_build(rng, init=init)
    if kind == "gcnn":
        return build_gcnn_classifier(rng, K=config.get("K", 8), widths=tuple(config.get("widths", (8, 16, 16))),
                                     lift_m=config.get("lift_m", 7), group_m=config.get("group_m", 5),
                                     n_classes=config.get("n_classes", 10), ring=config.get("ring", "max"),
                                     hidden=config.get("hidden", 64), init=init)
    raise ContractError(f"unknown model {kind!r}")


def record_loss(tape: Tape, logits, labels: np.ndarray, loss: str = "nll", num_classes: int = 10):
    """Mean batch loss node: softmax cross-entropy, or half squared error to one-hot targets."""
    if loss == "nll":
        return tape.record("nll-loss", [logits], labels=labels)
    if loss == "l2":
        target = np.zeros((labels.shape[0], num_classes))
        target[np.arange(labels.shape[0]), labels] = 1.0
        total = tape.record("l2-loss", [logits, tape.leaf(target)])
        return tape.record("scalar-mul", [total], c=1.0 / labels.shape[0])
    raise ContractError(f"unknown loss {loss!r}; choose from {', '.join(LOSSES)}")


def loss_and_grads(model: Module, images: np.ndarray, labels: np.ndarray, loss: str = "nll",
                   num_classes: int = 10) -> tuple[float, list[np.ndarray]]:
    """Mean loss over the given samples and its gradient for every parameter."""
    tape = Tape()
    out = record_loss(tape, model(tape, tape.leaf(images)), labels, loss, num_classes)
    grads = tape.backward(out)
    params = model.parameters()
    ids = [tape.param(p) for p in params]
    return float(tape.value(out).item()), [grads[i].numpy() if i in grads else np.zeros(p.shape)
                                           for i, p in zip(ids, params)]


def predict_logits(model: Module, images: np.ndarray, chunk: int = 500) -> np.ndarray:
    return np.concatenate([model.predict(images[i : i + chunk]) for i in range(0, len(images), chunk)])


def evaluate(model: Module, data: Dataset, loss: str = "nll") -> tuple[float, float]:
    """(mean loss, accuracy) over the whole dataset."""
    logits = predict_logits(model, data.images)
    tape = Tape()
    value = tape.value(record_loss(tape, tape.leaf(logits), data.labels, loss, data.num_classes)).item()
    acc = float(np.mean(np.argmax(logits, axis=1) == data.labels))
    return float(value), acc


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 5
    optimizer: str = "adam"
    hyper: dict = field(default_factory=dict)
    loss: str = "nll"
    seed: int = 0
    checkpoint: str | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractError("batch size and epochs must be >= 1")
        if self.loss not in LOSSES:
            raise ContractError(f"unknown loss {self.loss!r}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_loss: float
    test_accuracy: float
    batch_losses: list[float] = field(repr=False, default_factory=list)


def train(model: Module, train_data: Dataset, test_data: Dataset, cfg: TrainConfig,
          meta: dict | None = None, log: Callable[[str], None] | None = None) -> list[EpochRecord]:
    """Mini-batch training; returns one record per epoch.

    The train loss of an epoch is the mean of its batch losses (each taken
    before that batch's update). The test loss is computed on the full test set
    after the epoch; a checkpoint is written whenever it reaches a new best.
    """
    state = make_optimizer(cfg.optimizer, **cfg.hyper)
    params = model.parameters()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.epochs)
    history: list[EpochRecord] = []
    best = math.inf
    for epoch in range(1, cfg.epochs + 1):
        batch_losses = []
        for idx in make_batches(len(train_data), cfg.batch_size, seeds[epoch - 1]):
            value, grads = loss_and_grads(model, train_data.images[idx], train_data.labels[idx], cfg.loss,
                                          train_data.num_classes)
            if not math.isfinite(value):
                raise DivergenceError(f"epoch {epoch}, batch {len(batch_losses) + 1}: loss is {value}")
            batch_losses.append(value)
            apply(state, params, grads)
        test_loss, test_acc = evaluate(model, test_data, cfg.loss)
        rec = EpochRecord(epoch, float(np.mean(batch_losses)), test_loss, test_acc, batch_losses)
        history.append(rec)
        if log:
            log(f"epoch {epoch}: train {rec.train_loss:.4f}  test {test_loss:.4f}  acc {test_acc:.4f}")
        if not math.isfinite(test_loss):
            raise DivergenceError(f"epoch {epoch}: test loss is {test_loss}")
        if cfg.checkpoint and test_loss < best:
            best = test_loss
            checkpoint_save(model, cfg.checkpoint, {**(meta or {}), "epoch": epoch, "test_loss": test_loss})
    return history
