"""Mini-batch Adam training with best-on-validation snapshotting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..evaluation import weighted_f1
from ..patching import normalize
from .config import ModelConfig, TrainConfig
from .model import ModelParams, NonFiniteLossError, init_params, loss_and_gradient, predict_proba

log = logging.getLogger(__name__)


class Adam:
    def __init__(self, tensors, lr=1e-5, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(t) for t in tensors]
        self.v = [np.zeros_like(t) for t in tensors]
        self.t = 0

    def step(self, tensors, grads):
        """Update ``tensors`` in place."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(tensors, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_f1: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    diverged: bool = False


def dataset_stats(raw: np.ndarray) -> tuple[float, float]:
    """Mean and std of the [0, 1]-scaled training pixels."""
    scaled = np.asarray(raw, dtype=np.float64) / 255.0
    return float(scaled.mean()), float(scaled.std())


def train(config: ModelConfig, tcfg: TrainConfig, train_x, train_y, val_x, val_y, backend=None) -> TrainResult:
    """Train on raw uint8 patches ``(N, C, H, W)``; normalization constants come from ``train_x``.

    After each epoch the patch-level weighted F1 on the validation set is
    measured; the best epoch's snapshot (earliest on ties) is returned.
    """
    train_x = np.asarray(train_x)
    train_y = np.asarray(train_y, dtype=np.intp)
    if len(train_x) == 0 or len(val_x) == 0:
        raise ValueError("training and validation sets must be non-empty")
    mean, std = dataset_stats(train_x)
    params = init_params(config, mean, std)
    opt = Adam(params.tensors, tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.eps)
    rng = np.random.default_rng(tcfg.seed)
    result = TrainResult(params.copy())
    best_f1 = -1.0
    n = len(train_x)
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for b, start in enumerate(range(0, n, tcfg.batch_size)):
            idx = order[start:start + tcfg.batch_size]
            xb = normalize(train_x[idx], params.mean, params.std)
            try:
                loss, grads = loss_and_gradient(params, xb, train_y[idx], backend)
            except NonFiniteLossError as exc:
                exc.batch_index = b
                log.error("epoch %d: %s (batch rows %s)", epoch, exc, idx.tolist())
                result.diverged = True
                return result
            opt.step(params.tensors, grads)
            losses.append(loss)
        pred = predict_proba(params, val_x, backend=backend).argmax(axis=1)
        f1 = weighted_f1(val_y, pred, config.num_classes)
        rec = EpochRecord(epoch, float(np.mean(losses)), f1)
        result.history.append(rec)
        log.info("epoch %d loss %.4f val_f1 %.4f", epoch, rec.train_loss, f1)
        if f1 > best_f1:
            best_f1 = f1
            result.params = params.copy()
            result.best_epoch = epoch
    return result
