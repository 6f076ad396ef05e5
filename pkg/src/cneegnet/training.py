"""Mini-batch training loop with early stopping, evaluation, and
per-condition aggregation of test accuracies.

Early stopping semantics: an epoch "improves" when its validation loss is
below the running best by more than min_delta; training stops once `patience`
consecutive epochs fail to improve. The weights (including batch-norm running
statistics) from the last improving epoch are restored when training ends.
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import SplitSpec, balance_undersample, split
from .errors import ConfigError, DataError, ShapeError, UsageError
from .models import build_model
from .nn.layers import cross_entropy
from .optim import Optimizer, OptimizerHyper


@dataclass
class TrainConfig:
    max_epochs: int = 750
    batch_size: int = 64
    early_stop: bool = True
    min_delta: float = 0.0001
    patience: int = 200
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.min_delta < 0:
            raise ConfigError(f"min_delta must be >= 0, got {self.min_delta}")


@dataclass
class TrainReport:
    config: dict
    seed: int
    history: dict
    stopped_at_epoch: int
    best_val_epoch: int
    test_accuracy: float = None
    confusion: list = None
    wall_seconds: float = 0.0
    condition: str = None

    def to_dict(self):
        return {
            "config": self.config,
            "seed": self.seed,
            "history": self.history,
            "stopped_at_epoch": self.stopped_at_epoch,
            "best_val_epoch": self.best_val_epoch,
            "test_accuracy": self.test_accuracy,
            "confusion": self.confusion,
            "wall_seconds": self.wall_seconds,
            "condition": self.condition,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d.get(k) for k in (
            "config", "seed", "history", "stopped_at_epoch", "best_val_epoch",
            "test_accuracy", "confusion", "wall_seconds", "condition")})


def early_stop_check(val_history, min_delta, patience):
    """True iff the last `patience` epochs each failed to improve the running
    best validation loss by more than min_delta."""
    if len(val_history) == 0:
        raise UsageError("early_stop_check needs a non-empty history")
    best = np.inf
    since = 0
    for v in val_history:
        if v < best - min_delta:
            since = 0
        else:
            since += 1
        # best tracks the true minimum: losses creeping down by exactly
        # min_delta per epoch must count as stalled, not compound into an
        # improvement against a stale best
        best = min(best, v)
    return since >= patience


def _check_datasets(model, *datasets):
    c, t = model.config.channels, model.config.samples
    for ds in datasets:
        if ds.n_epochs == 0:
            raise DataError("dataset is empty")
        if ds.n_channels != c or ds.n_samples != t:
            raise ShapeError(
                f"dataset epochs are ({ds.n_channels}, {ds.n_samples}), model "
                f"expects ({c}, {t})"
            )
        if ds.labels.max() >= model.config.n_classes:
            raise DataError(
                f"label {ds.labels.max()} out of range for {model.config.n_classes} classes"
            )


def train(model, train_ds, val_ds, cfg, optimizer):
    """Run the loop; returns a TrainReport with test fields left unset."""
    _check_datasets(model, train_ds, val_ds)
    if isinstance(optimizer, OptimizerHyper):
        optimizer = Optimizer(optimizer)
    started = time.perf_counter()

    x_train = train_ds.epochs
    y_train = train_ds.labels.astype(np.int64)
    x_val = val_ds.epochs
    y_val = val_ds.labels.astype(np.int64)
    n = x_train.shape[0]

    model.reseed_dropout(cfg.seed)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0x5EED]))

    history = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}
    best = np.inf
    best_epoch = 0
    best_weights = model.get_weights()
    stopped_at = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n) if cfg.shuffle_each_epoch else np.arange(n)
        loss_sum = 0.0
        hit_sum = 0
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            probs = model.forward(x_train[idx], train=True)
            loss_sum += cross_entropy(probs, y_train[idx]) * idx.size
            hit_sum += int((probs.argmax(axis=1) == y_train[idx]).sum())
            model.backward(y_train[idx])
            optimizer.step(model.params())
            model.apply_constraints()
        val_probs = model.forward(x_val, train=False)
        val_loss = cross_entropy(val_probs, y_val)
        history["train_loss"].append(loss_sum / n)
        history["train_acc"].append(hit_sum / n)
        history["val_loss"].append(val_loss)
        history["val_acc"].append(float((val_probs.argmax(axis=1) == y_val).mean()))

        if val_loss < best:
            best = val_loss
            best_epoch = epoch
            best_weights = model.get_weights()
        stopped_at = epoch
        if cfg.early_stop and early_stop_check(history["val_loss"], cfg.min_delta,
                                               cfg.patience):
            break

    model.set_weights(best_weights)
    return TrainReport(
        config={
            "model": model.config.to_dict(),
            "train": asdict(cfg),
            "optimizer": asdict(optimizer.hyper),
        },
        seed=cfg.seed,
        history=history,
        stopped_at_epoch=stopped_at,
        best_val_epoch=best_epoch,
        wall_seconds=time.perf_counter() - started,
    )


def evaluate(model, test_ds):
    """Argmax classification accuracy plus the confusion matrix
    (rows = true label, columns = prediction); side-effect free."""
    if test_ds.n_epochs == 0:
        raise DataError("test set is empty")
    _check_datasets(model, test_ds)
    y = test_ds.labels.astype(np.int64)
    preds = model.forward(test_ds.epochs, train=False).argmax(axis=1)
    k = model.config.n_classes
    confusion = np.bincount(y * k + preds, minlength=k * k).reshape(k, k)
    return float((preds == y).mean()), confusion


def run_experiment(ds, model_cfg, train_cfg, opt_hyper, split_spec=None):
    """Full pipeline: balance -> split -> build -> train -> evaluate.

    A single seed (train_cfg.seed) drives balancing, splitting, weight
    initialization, shuffling, and dropout, so runs are reproducible end to
    end. Returns (model, completed TrainReport).
    """
    balanced = balance_undersample(ds, seed=train_cfg.seed)
    spec = split_spec or SplitSpec(seed=train_cfg.seed)
    train_ds, val_ds, test_ds = split(balanced, spec)
    model = build_model(model_cfg, seed=train_cfg.seed)
    report = train(model, train_ds, val_ds, train_cfg, Optimizer(opt_hyper))
    accuracy, confusion = evaluate(model, test_ds)
    report.test_accuracy = accuracy
    report.confusion = confusion.tolist()
    report.condition = ds.majority_condition_name()
    return model, report


def aggregate_report(reports):
    """Per-condition mean and sample SD (n-1 denominator) of test accuracy,
    plus an overall row. Reports must carry test_accuracy."""
    if not reports:
        raise DataError("no reports to aggregate")
    groups = {}
    for r in reports:
        if r.test_accuracy is None:
            raise DataError("report has no test_accuracy; evaluate before aggregating")
        groups.setdefault(r.condition or "unknown", []).append(r.test_accuracy)

    def stats(values):
        arr = np.asarray(values, dtype=np.float64)
        sd = float(arr.std(ddof=1)) if arr.size >= 2 else None
        return {"n": int(arr.size), "mean": float(arr.mean()), "sd": sd}

    summary = {name: stats(vals) for name, vals in sorted(groups.items())}
    summary["overall"] = stats([r.test_accuracy for r in reports])
    return summary
