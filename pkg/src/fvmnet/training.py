"""Mini-batch training with momentum-free or adaptive-moment updates.

Each epoch reshuffles the training rows with a seeded generator, walks them
in batches (final short batch included), and then scores the validation rows.
Early stopping watches validation MSE with a minimum-improvement threshold and
a patience window; the returned network carries the parameters of the best
validation epoch, not the last one.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import DomainError, TrainingDivergedError
from .network import Network, backward_batch, mse_loss, predict

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 2000
    patience: int = 50
    min_delta: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise DomainError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.learning_rate <= 0.0:
            raise DomainError("learning_rate must be positive")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise DomainError("max_epochs must be >= 1")
        if self.patience < 1:
            raise DomainError("patience must be >= 1")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise DomainError("betas must lie in [0, 1)")


@dataclass
class TrainReport:
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1
    best_val_loss: float = float("inf")
    param_snapshot_id: str = ""

    @property
    def epochs_run(self) -> int:
        return len(self.val_losses)


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def update(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Adam:
    """Adaptive moments with bias correction; one shared step counter."""

    def __init__(self, lr: float, beta1: float, beta2: float, eps: float,
                 shapes: List[tuple]):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def update(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * (g * g)
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _snapshot_id(net: Network) -> str:
    h = hashlib.sha256()
    for w, b in zip(net.weights, net.biases):
        h.update(w.tobytes())
        h.update(b.tobytes())
    return h.hexdigest()[:12]


def train(
    net: Network,
    train_inputs: np.ndarray,
    train_targets: np.ndarray,
    val_inputs: np.ndarray,
    val_targets: np.ndarray,
    config: TrainConfig,
) -> Tuple[Network, TrainReport]:
    """Fit `net` in place on the given rows; returns (best network, report).

    The input network provides the starting parameters, so passing a freshly
    initialized network trains from scratch and passing a previously trained
    one warm-starts. Optimizer moments always start at zero for the call.
    """
    x = np.asarray(train_inputs, dtype=np.float64)
    y = np.asarray(train_targets, dtype=np.float64).reshape(-1)
    vx = np.asarray(val_inputs, dtype=np.float64)
    vy = np.asarray(val_targets, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.shape[0] or vx.shape[0] != vy.shape[0]:
        raise DomainError("inputs and targets must pair up row for row")
    if x.shape[0] == 0 or vx.shape[0] == 0:
        raise DomainError("training and validation sets must be non-empty")

    params = net.weights + net.biases
    if config.optimizer == "adam":
        opt = _Adam(config.learning_rate, config.beta1, config.beta2, config.eps,
                    [p.shape for p in params])
    else:
        opt = _Sgd(config.learning_rate)

    rng = np.random.default_rng(config.seed)
    n = x.shape[0]
    report = TrainReport()
    best: Optional[Network] = None
    stall = 0

    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        seen = 0
        loss_sum = 0.0
        for lo in range(0, n, config.batch_size):
            rows = perm[lo : lo + config.batch_size]
            loss, gw, gb = backward_batch(net, x[rows], y[rows])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"training loss became non-finite at epoch {epoch}", epoch=epoch
                )
            opt.update(params, gw + gb)
            loss_sum += loss * rows.size
            seen += rows.size
        report.train_losses.append(loss_sum / seen)

        val_loss = mse_loss(predict(net, vx), vy)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(
                f"validation loss became non-finite at epoch {epoch}", epoch=epoch
            )
        report.val_losses.append(val_loss)

        if val_loss < report.best_val_loss - config.min_delta:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best = net.copy()
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break

    report.stopped_epoch = report.epochs_run - 1
    if best is None:
        # No epoch improved on +inf minus min_delta is impossible for finite
        # losses, but keep a safe fallback: the final parameters.
        best = net.copy()
        report.best_epoch = report.stopped_epoch
        report.best_val_loss = report.val_losses[-1]
    net.weights = [w.copy() for w in best.weights]
    net.biases = [b.copy() for b in best.biases]
    report.param_snapshot_id = _snapshot_id(net)
    return net, report


def derived_seed(base: int, *parts) -> int:
    """Stable per-role seed: hash the base seed with string/int parts."""
    h = hashlib.sha256(repr((int(base), tuple(str(p) for p in parts))).encode())
    return int.from_bytes(h.digest()[:8], "big") % (2**63)


def config_digest(config: TrainConfig) -> str:
    """Short stable digest of the hyperparameters, for checkpoint headers."""
    return hashlib.sha256(repr(replace(config)).encode()).hexdigest()[:12]
