"""Mini-batch training with validation monitoring, plateau LR reduction,
early stopping and best-checkpoint tracking; the per-model training stages."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError
from .nn import SGD, Optimizer, RMSprop, Rng, backward, bce, copy_params, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: SGD | RMSprop
    max_epochs: int
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


class EarlyStopping:
    """Stop once ``patience`` epochs pass without val_acc > best + min_delta."""

    def __init__(self, min_delta=0.01, patience=50):
        self.min_delta = min_delta
        self.patience = patience
        self.best = -math.inf
        self.wait = 0

    def update(self, val_acc) -> bool:
        if val_acc > self.best + self.min_delta:
            self.best = val_acc
            self.wait = 0
        else:
            self.wait += 1
        return self.wait >= self.patience


class ReduceLROnPlateau:
    """Multiply the learning rate by ``factor`` once ``patience`` epochs pass
    without improvement; the wait counter resets on improvement and on every
    reduction. No floor, no cooldown."""

    def __init__(self, factor=0.1, patience=25, min_delta=0.0, learning_rate=None):
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.best = -math.inf
        self.wait = 0
        self.current_lr = learning_rate

    def update(self, val_acc):
        if val_acc > self.best + self.min_delta:
            self.best = val_acc
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.current_lr = self.current_lr * self.factor
                self.wait = 0
        return self.current_lr


def early_stopping_update(state: EarlyStopping, val_acc) -> bool:
    return state.update(val_acc)


def reduce_lr_update(state: ReduceLROnPlateau, val_acc):
    return state.update(val_acc)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    lr: float


class History(list):
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "train_acc", "val_acc", "lr"])
        for r in self:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.train_acc), repr(r.val_acc), repr(r.lr)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str):
        rows = list(csv.reader(io.StringIO(text)))
        return cls(EpochRecord(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4])) for r in rows[1:] if r)


@dataclass
class LabeledData:
    """Inputs (array, or dict of arrays for multi-input nets) and targets of
    shape (N,) or (N, K)."""

    inputs: object
    targets: np.ndarray

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float32)
        if self.targets.ndim == 1:
            self.targets = self.targets[:, None]
        n = len(self.targets)
        for x in self._arrays().values():
            if len(x) != n:
                raise DataError("inputs and targets differ in length")

    def _arrays(self):
        return self.inputs if isinstance(self.inputs, dict) else {"_": self.inputs}

    def __len__(self):
        return len(self.targets)

    def take(self, idx):
        if isinstance(self.inputs, dict):
            inputs = {k: v[idx] for k, v in self.inputs.items()}
        else:
            inputs = self.inputs[idx]
        return LabeledData(inputs, self.targets[idx])


@dataclass
class TrainResult:
    params: dict
    history: History
    best_epoch: int | None
    best_val_acc: float
    final_params: dict = field(repr=False, default=None)
    final_lr: float | None = None


def batch_accuracy(out, targets):
    out = out.reshape(len(out), -1)
    if out.shape[1] == 1:
        return float(np.mean((out[:, 0] >= 0.5) == (targets[:, 0] >= 0.5)))
    return float(np.mean(out.argmax(axis=1) == targets.argmax(axis=1)))


class _FrozenCache:
    """Outputs of the frozen, dropout-free prefix for a whole dataset,
    computed once and sliced per batch."""

    def __init__(self, net, params, data, chunk=256):
        fixed = net.deterministic_frozen_prefix()
        consumers = set()
        for i, b in enumerate(net.blocks):
            if b.name not in fixed:
                consumers.update(s for s in net.sources(i) if s in fixed)
        if net.blocks[-1].name in fixed:
            consumers.add(net.blocks[-1].name)
        self.fixed = fixed
        self.values = {}
        if not fixed:
            return
        parts = {name: [] for name in consumers}
        n = len(data)
        prefix_blocks = [b for b in net.blocks if b.name in fixed]
        from .nn import NetworkSpec

        sub = NetworkSpec(net.input_shapes, prefix_blocks, "prefix") if prefix_blocks else None
        for start in range(0, n, chunk):
            batch = data.take(np.arange(start, min(n, start + chunk)))
            _, cache = forward(sub, params, _inputs_for(sub, batch.inputs), train=False)
            for name in consumers:
                parts[name].append(cache.values[name])
        self.values = {k: np.concatenate(v) for k, v in parts.items()}

    def slice(self, idx):
        if not self.fixed:
            return None
        out = {name: None for name in self.fixed}
        out.update({k: v[idx] for k, v in self.values.items()})
        return out


def _inputs_for(net, inputs):
    if isinstance(inputs, dict):
        return {k: inputs[k] for k in net.input_shapes}
    return inputs


def _predict(net, params, data, frozen, chunk=256):
    out = []
    n = len(data)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        y, _ = forward(net, params, data.take(idx).inputs, train=False, precomputed=frozen.slice(idx),
                       keep_cache=False)
        out.append(y.reshape(len(y), -1))
    return np.concatenate(out)


def fit(net, params, train_data: LabeledData, val_data: LabeledData, config: TrainConfig, callbacks=()):
    """Train ``params`` (copied) on ``train_data``; return the best checkpoint.

    Each epoch shuffles the (already oversampled) training list with a
    stream forked from (seed, epoch), steps once per batch, then measures
    validation accuracy at threshold 0.5. Callbacks see that accuracy in the
    order given (plateau before early stopping); the learning rate recorded
    for an epoch is the one in effect while it trained.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise DataError("training and validation data must be non-empty")
    params = copy_params(params)
    opt = Optimizer(config.optimizer)
    plateau = [c for c in callbacks if isinstance(c, ReduceLROnPlateau)]
    for c in plateau:
        if c.current_lr is None:
            c.current_lr = opt.learning_rate
    rng = Rng(config.seed)
    train_frozen = _FrozenCache(net, params, train_data)
    val_frozen = _FrozenCache(net, params, val_data)
    history = History()
    best_params, best_epoch, best_acc = None, None, -math.inf
    n = len(train_data)
    for epoch in range(1, config.max_epochs + 1):
        lr_in_effect = opt.learning_rate
        order = rng.fork("epoch", epoch).permutation(n)
        loss_sum, correct = 0.0, 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            batch = train_data.take(idx)
            out, cache = forward(net, params, batch.inputs, train=True, rng=rng.fork("dropout", epoch, b),
                                 precomputed=train_frozen.slice(idx))
            loss, dout = bce(out, batch.targets.reshape(out.shape))
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            grads = backward(net, params, cache, dout)
            opt.step(params, grads)
            loss_sum += loss * len(idx)
            correct += batch_accuracy(out, batch.targets) * len(idx)
        val_out = _predict(net, params, val_data, val_frozen)
        val_acc = batch_accuracy(val_out, val_data.targets)
        history.append(EpochRecord(epoch, loss_sum / n, correct / n, val_acc, lr_in_effect))
        log.debug("epoch %d loss %.4f acc %.4f val_acc %.4f lr %.2e", epoch, loss_sum / n, correct / n,
                  val_acc, lr_in_effect)
        if val_acc > best_acc:
            best_params, best_epoch, best_acc = copy_params(params), epoch, val_acc
        stop = False
        for c in callbacks:
            if isinstance(c, ReduceLROnPlateau):
                opt.learning_rate = c.update(val_acc)
            elif isinstance(c, EarlyStopping):
                stop = c.update(val_acc) or stop
        if stop:
            break
    return TrainResult(best_params, history, best_epoch, best_acc, params, opt.learning_rate)


# stages --------------------------------------------------------------------

SCRATCH_SGD = SGD(learning_rate=0.001, decay=1e-6, momentum=0.9, nesterov=True)
FINETUNE_SGD = SGD(learning_rate=1e-4, decay=0.0, momentum=0.9, nesterov=False)


def run_scratch_stage(net, params, train_data, val_data, seed, max_epochs=50, batch_size=32):
    config = TrainConfig(SCRATCH_SGD, max_epochs, batch_size, seed)
    return fit(net, params, train_data, val_data, config)


def run_feature_extractor_stage(net, params, train_data, val_data, seed, max_epochs=20, batch_size=32):
    config = TrainConfig(RMSprop(), max_epochs, batch_size, seed)
    return fit(net, params, train_data, val_data, config, [ReduceLROnPlateau(factor=0.1, patience=5)])


def finetune_callbacks():
    return [ReduceLROnPlateau(factor=0.1, patience=25), EarlyStopping(min_delta=0.01, patience=50)]


def run_finetune_stage(net, stage1: TrainResult, train_data, val_data, seed, max_epochs=200, batch_size=32):
    """Returns ``(finetune_net, result)``."""
    from .models import build_finetune

    ft_net, params = build_finetune(net, stage1)
    config = TrainConfig(FINETUNE_SGD, max_epochs, batch_size, seed)
    return ft_net, fit(ft_net, params, train_data, val_data, config, finetune_callbacks())


def run_hybrid_stage(net, params, train_data, val_data, seed, max_epochs=200, batch_size=32):
    config = TrainConfig(FINETUNE_SGD, max_epochs, batch_size, seed)
    return fit(net, params, train_data, val_data, config, finetune_callbacks())
