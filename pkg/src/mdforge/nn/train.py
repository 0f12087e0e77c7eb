"""Mini-batch training loop, optimizers and image batching."""

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from ..imaging import check_gray, resize_bilinear
from ..seeding import make_rng
from .network import Network


class Optimizer(enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: Optimizer = Optimizer.ADAM
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    canonical_input: int = 64

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float = float("nan")
    val_acc: float = float("nan")


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for r in self.records:
                writer.writerow(
                    [r.epoch] + [f"{v:.6f}" for v in (r.train_loss, r.train_acc, r.val_loss, r.val_acc)]
                )

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]:
            raise ValueError(f"{path}: bad history header")
        records = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                records.append(EpochRecord(int(row[0]), *(float(v) for v in row[1:])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
        return cls(records)


def images_to_batch(images, size, dtype=np.float32):
    """Resize grayscale images to ``size`` x ``size`` and scale to [0, 1], shape (N, 1, H, W)."""
    out = np.empty((len(images), 1, size, size), dtype=dtype)
    for i, img in enumerate(images):
        img = check_gray(img)
        if img.shape != (size, size):
            img = resize_bilinear(img, size, size)
        out[i, 0] = img / 255.0
    return out


class _Adam:
    def __init__(self, cfg):
        self.cfg = cfg
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, net, grads):
        c = self.cfg
        self.t += 1
        corr1 = 1.0 - c.beta1**self.t
        corr2 = 1.0 - c.beta2**self.t
        for i, g in enumerate(grads):
            for key, grad in g.items():
                m = self.m.setdefault((i, key), np.zeros_like(grad))
                v = self.v.setdefault((i, key), np.zeros_like(grad))
                m *= c.beta1
                m += (1 - c.beta1) * grad
                v *= c.beta2
                v += (1 - c.beta2) * grad * grad
                update = c.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + c.epsilon)
                net.params[i][key] -= update.astype(net.dtype)


class _SGD:
    def __init__(self, cfg):
        self.cfg = cfg

    def step(self, net, grads):
        for i, g in enumerate(grads):
            for key, grad in g.items():
                net.params[i][key] -= (self.cfg.learning_rate * grad).astype(net.dtype)


def evaluate(net, x, y, batch_size=64):
    """Inference-mode ``(loss, accuracy)``."""
    probs = net.predict_proba(x, batch_size)
    acc = float(np.mean(np.argmax(probs, axis=1) == y))
    return net.loss(probs, y), acc


def train(model_spec, train_data, cfg=TrainConfig(), val_data=None, net=None, callback=None):
    """Train on ``(x, y)`` arrays; ``x`` has shape (N, 1, S, S) or (N, S, S).

    Returns ``(network, history)``. Initialization, shuffling and dropout masks
    all derive from ``cfg.seed``.
    """
    x, y = train_data
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("training split is empty")
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y lengths differ")
    if val_data is not None and len(val_data[1]) == 0:
        raise ValueError("validation split is empty")
    if net is None:
        net = Network(model_spec, seed=cfg.seed)
    opt = _Adam(cfg) if cfg.optimizer is Optimizer.ADAM else _SGD(cfg)
    history = TrainHistory()
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.seed, "shuffle", epoch).permutation(n)
        loss_sum = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            probs, cache = net.forward(xb, training=True, rng=make_rng(cfg.seed, "dropout", epoch, b))
            loss_sum += net.loss(probs, yb) * idx.size
            correct += int(np.sum(np.argmax(probs, axis=1) == yb))
            opt.step(net, net.backward(cache, yb))
        record = EpochRecord(epoch + 1, loss_sum / n, correct / n)
        if val_data is not None:
            record.val_loss, record.val_acc = evaluate(net, np.asarray(val_data[0]), np.asarray(val_data[1]))
        history.records.append(record)
        if callback is not None:
            callback(record)
    return net, history


def predict(net, image):
    """Classify one grayscale image (any size); returns ``(class_index, probabilities)``.

    Ties go to the lowest class index.
    """
    batch = images_to_batch([image], net.spec.input_size, net.dtype)
    probs = net.predict_proba(batch)[0]
    return int(np.argmax(probs)), probs
