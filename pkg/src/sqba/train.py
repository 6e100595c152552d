from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError, TrainingError
from .nn import Network
from .optim import SGD, Adam

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-2
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr < 0:
            raise InputError("epochs and batch_size must be positive, lr non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise InputError(f"unknown optimizer {self.optimizer!r}")


def train(net: Network, images, labels, cfg: TrainConfig, eval_set=None) -> Network:
    """Minibatch training on cross-entropy. Mutates and returns ``net``.

    Per-epoch loss and accuracy land in ``net.meta["train_log"]``; the final
    training accuracy (and test accuracy when ``eval_set`` is given) are kept
    in ``net.meta`` as well.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise InputError("empty training set")
    if labels.min() < 0 or labels.max() >= net.num_classes:
        raise InputError("labels outside [0, num_classes)")

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(cfg.lr) if cfg.optimizer == "adam" else SGD(cfg.lr)
    params = net.get_params()
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(labels))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            net.set_params(params)
            loss, grads = net.loss_and_param_grads(images[idx], labels[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss in epoch {epoch}")
            opt.step(params, grads)
            total += loss * len(idx)
        net.set_params(params)
        params = net.get_params()  # re-read the float32-rounded values
        acc = net.accuracy(images, labels)
        history.append({"epoch": epoch, "loss": total / len(labels), "train_acc": acc})
        log.info("epoch %d loss %.4f train acc %.4f", epoch, total / len(labels), acc)

    net.meta["train_log"] = history
    net.meta["train_acc"] = history[-1]["train_acc"]
    if eval_set is not None:
        net.meta["test_acc"] = net.accuracy(*eval_set)
    return net
