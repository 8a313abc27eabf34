"""Linear softmax predictor over concatenated real/imaginary features.

Node rows are ``[real_u | imag_u]``; link rows for an ordered pair ``(u, v)``
are ``[real_u | imag_u | real_v | imag_v]``. Training is plain mini-batch
gradient descent on mean cross-entropy plus ``weight_decay/2 * ||W||^2``
(bias not decayed), starting from zero weights. The decay term is applied as
its exact proximal step, ``W <- (W - lr * grad_CE) / (1 + lr * weight_decay)``,
which has the same minimiser as the plain gradient step and stays stable for
any decay strength.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError, TrainingError, ValidationError
from .metrics import accuracy, auc, macro_f1
from .propagation import AggregatedFeatures
from .splits import SUBSETS, TaskKind, TaskSplit


@dataclass
class LinearModel:
    W: np.ndarray
    bias: np.ndarray | None = None

    @classmethod
    def zeros(cls, d_in: int, num_classes: int, use_bias: bool = True) -> "LinearModel":
        b = np.zeros(num_classes) if use_bias else None
        return cls(np.zeros((d_in, num_classes)), b)

    @property
    def d_in(self) -> int:
        return self.W.shape[0]

    @property
    def num_classes(self) -> int:
        return self.W.shape[1]

    def logits(self, X) -> np.ndarray:
        Z = np.asarray(X, dtype=np.float64) @ self.W
        return Z + self.bias if self.bias is not None else Z


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 5000
    epochs: int = 200
    weight_decay: float = 0.0
    seed: int = 0
    patience: int = 50
    use_bias: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if self.epochs < 0 or self.weight_decay < 0:
            raise InputError("epochs and weight_decay must be nonnegative")


@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    auc: float | None = None
    per_epoch_loss: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def softmax(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


def forward(model: LinearModel, X) -> np.ndarray:
    """Class probabilities, one row per input row."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d_in:
        raise ValidationError(f"design width {X.shape[-1]} does not match model input {model.d_in}")
    return softmax(model.logits(X))


def loss_and_grad(W, bias, X, y, weight_decay: float = 0.0):
    """Mean cross-entropy (+ L2 on W) and its gradient; returns ``(loss, dW, dbias)``."""
    Z = X @ W
    if bias is not None:
        Z = Z + bias
    Z = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(Z).sum(axis=1))
    N = X.shape[0]
    rows = np.arange(N)
    loss = float(np.mean(logsum - Z[rows, y])) + 0.5 * weight_decay * float(np.sum(W * W))
    G = np.exp(Z - logsum[:, None])
    G[rows, y] -= 1.0
    G /= N
    dW = X.T @ G + weight_decay * W
    db = G.sum(axis=0) if bias is not None else None
    return loss, dW, db


def _check_labels(y, num_classes):
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ValidationError(f"labels must lie in [0, {num_classes})")
    return y


def train(model: LinearModel, X, y, cfg: TrainConfig, val=None):
    """Fit ``model`` (a copy is returned) and the mean loss of every epoch run.

    ``val``, if given as ``(X_val, y_val)``, enables early stopping on
    validation accuracy: training halts after ``cfg.patience`` epochs without
    improvement and the best weights seen are restored.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_labels(y, model.num_classes)
    if X.shape != (y.size, model.d_in):
        raise ValidationError(f"design shape {X.shape} does not fit {y.size} labels / width {model.d_in}")
    model = copy.deepcopy(model)
    rng = np.random.default_rng(cfg.seed)
    losses = []
    best_acc, best_state, since_best = -1.0, None, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(y.size)
        total = 0.0
        for start in range(0, y.size, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, dW, db = loss_and_grad(model.W, model.bias, X[idx], y[idx])
            loss += 0.5 * cfg.weight_decay * float(np.sum(model.W * model.W))
            if not np.isfinite(loss):
                raise TrainingError("loss is not finite", epoch=epoch)
            model.W -= cfg.learning_rate * dW
            if cfg.weight_decay:
                model.W /= 1.0 + cfg.learning_rate * cfg.weight_decay
            if model.bias is not None:
                model.bias -= cfg.learning_rate * db
            total += loss * idx.size
        if not (np.isfinite(model.W).all() and (model.bias is None or np.isfinite(model.bias).all())):
            raise TrainingError("weights diverged", epoch=epoch)
        losses.append(total / max(y.size, 1))
        if val is not None:
            acc = accuracy(val[1], predict(model, val[0]))
            if acc > best_acc:
                best_acc, since_best = acc, 0
                best_state = copy.deepcopy(model)
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break
    if best_state is not None:
        model = best_state
    return model, losses


def predict(model: LinearModel, X) -> np.ndarray:
    return forward(model, X).argmax(axis=1)


def evaluate(model: LinearModel, X, y, task_kind=None) -> MetricsReport:
    """Accuracy, macro-F1, and (two-class problems only) AUC of the class-1 score."""
    y = _check_labels(y, model.num_classes)
    if y.size == 0:
        raise ValidationError("empty evaluation set")
    P = forward(model, X)
    pred = P.argmax(axis=1)
    score_auc = None
    if model.num_classes == 2 and task_kind is not TaskKind.THREE_CLASS:
        score_auc = auc(y == 1, P[:, 1])
    return MetricsReport(accuracy(y, pred), macro_f1(y, pred, model.num_classes), score_auc)


def design_width(agg_width: int, kind: TaskKind) -> int:
    return (4 if kind.is_link else 2) * agg_width


def assemble_inputs(agg: AggregatedFeatures, split: TaskSplit) -> dict:
    """Design matrices and labels for each subset: ``{name: (X, y)}``."""
    out = {}
    for name in SUBSETS:
        idx, labels = split.subset(name)
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= agg.n):
            raise ValidationError(f"{name} indices out of range for {agg.n} nodes")
        if split.task_kind.is_link:
            u, v = idx[:, 0], idx[:, 1]
            X = np.hstack([agg.real[u], agg.imag[u], agg.real[v], agg.imag[v]])
        else:
            X = np.hstack([agg.real[idx], agg.imag[idx]])
        out[name] = (X, np.asarray(labels, dtype=np.int64))
    return out
