"""Mini-batch Adam training with early stopping."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DomainError, TrainingError
from .model import EncoderDecoderModel, backward, copy_params, forward
from .optim import Adam, clip_by_global_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 10
    min_delta: float = 1e-4
    seed: int = 0
    precision: str = "single"
    clip_norm: float | None = None
    standardize_target: bool = True
    log1p_target: bool = False

    def __post_init__(self):
        for name in ("max_epochs", "batch_size", "patience"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be at least 1")
        if not self.learning_rate > 0 or not self.epsilon > 0:
            raise DomainError("learning_rate and epsilon must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise DomainError("Adam betas must lie in [0, 1)")
        if self.min_delta < 0:
            raise DomainError("min_delta must be non-negative")
        if self.precision not in ("single", "double"):
            raise DomainError(f"precision must be 'single' or 'double', got {self.precision!r}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise DomainError("clip_norm must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_seq_rmse: float
    val_rmse: float  # final-step, RUL days
    val_seq_rmse: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_val_rmse: float = math.inf

    @property
    def train_rmse(self):
        return [e.train_seq_rmse for e in self.epochs]

    @property
    def val_rmse(self):
        return [e.val_rmse for e in self.epochs]

    def to_dict(self):
        return {
            "epochs": [asdict(e) for e in self.epochs],
            "stopped_epoch": self.stopped_epoch,
            "best_epoch": self.best_epoch,
            "best_val_rmse": self.best_val_rmse,
        }

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _to_model_space(model, Y):
    Y = np.asarray(Y, dtype=np.float64)
    return np.log1p(Y) if model.target_transform == "log1p" else Y


def _from_model_space(model, Yhat):
    return np.expm1(Yhat) if model.target_transform == "log1p" else Yhat


def predict_sequences(model: EncoderDecoderModel, X, batch_size=1024):
    """RUL trajectories (B, T) in days for every window of ``X``."""
    X = np.asarray(X)
    if X.ndim != 3:
        raise DomainError(f"expected a (B, T, F) batch, got shape {X.shape}")
    out = []
    for s in range(0, X.shape[0], batch_size):
        yhat, _ = forward(model, X[s : s + batch_size])
        out.append(yhat)
    if not out:
        return np.zeros((0, model.config.timesteps))
    return _from_model_space(model, np.concatenate(out).astype(np.float64))


def predict_rul(model: EncoderDecoderModel, X, batch_size=1024):
    """Most recent day's RUL estimate for each window, shape (B,)."""
    return predict_sequences(model, X, batch_size)[:, -1]


def train(model: EncoderDecoderModel, train_set, val_set, tcfg: TrainConfig | None = None,
          callback=None):
    """Fit ``model`` on ``train_set`` with early stopping on ``val_set``.

    Both datasets expose ``X`` (B, T, F) and ``Y`` (B, T). Returns a new
    model holding the best-validation-epoch parameters (the argument is not
    modified) and the :class:`TrainReport`. The Adam state of the best epoch
    is kept on ``model.optimizer_state`` for checkpointing.
    """
    tcfg = tcfg or TrainConfig()
    if len(train_set.X) == 0 or len(val_set.X) == 0:
        raise DomainError("training and validation sets must be non-empty")
    model = model.copy(tcfg.precision)
    if tcfg.log1p_target:
        model.target_transform = "log1p"
    Ytr = _to_model_space(model, train_set.Y)
    if tcfg.standardize_target:
        model.output_shift = float(Ytr.mean())
        std = float(Ytr.std())
        model.output_scale = std if std > 0 else 1.0
    dtype = model.dtype
    Xtr = np.asarray(train_set.X, dtype=dtype)
    Xval = np.asarray(val_set.X, dtype=dtype)
    yval_last = np.asarray(val_set.Y, dtype=np.float64)[:, -1]
    yval = np.asarray(val_set.Y, dtype=np.float64)

    opt = Adam(model.params, tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.epsilon)
    rng = np.random.default_rng(tcfg.seed)
    report = TrainReport()
    best_params = copy_params(model.params)
    best_opt = opt.state()
    wait = 0
    n = Xtr.shape[0]
    for epoch in range(1, tcfg.max_epochs + 1):
        order = rng.permutation(n)
        sse = 0.0
        for s in range(0, n, tcfg.batch_size):
            idx = order[s : s + tcfg.batch_size]
            _, cache = forward(model, Xtr[idx])
            loss, grads = backward(model, cache, Ytr[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss in epoch {epoch}", epoch=epoch)
            if tcfg.clip_norm is not None:
                clip_by_global_norm(grads, tcfg.clip_norm)
            opt.step(grads)
            model.touch()
            sse += loss * idx.size
        # in log space when training on log1p targets
        train_seq = math.sqrt(sse / n)
        pred = predict_sequences(model, Xval)
        if not np.isfinite(pred).all():
            raise TrainingError(f"non-finite validation predictions in epoch {epoch}", epoch=epoch)
        val_rmse = float(np.sqrt(np.mean((pred[:, -1] - yval_last) ** 2)))
        val_seq = float(np.sqrt(np.mean((pred - yval) ** 2)))
        report.epochs.append(EpochRecord(epoch, train_seq, val_rmse, val_seq))
        log.debug("epoch %d train %.4f val %.4f", epoch, train_seq, val_rmse)
        if callback is not None:
            callback(report.epochs[-1])
        if val_rmse < report.best_val_rmse - tcfg.min_delta:
            report.best_val_rmse = val_rmse
            report.best_epoch = epoch
            best_params = copy_params(model.params)
            best_opt = opt.state()
            wait = 0
        else:
            wait += 1
        report.stopped_epoch = epoch
        if wait >= tcfg.patience:
            break
    for k, v in best_params.items():
        model.params[k][...] = v
    model.touch()
    model.optimizer_state = {**best_opt, "lr": tcfg.learning_rate, "beta1": tcfg.beta1,
                             "beta2": tcfg.beta2, "epsilon": tcfg.epsilon}
    model.epoch = report.best_epoch
    return model, report
