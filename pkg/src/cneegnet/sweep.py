"""Seeded random search over the model/training hyperparameter space.

Every trial derives its own seed from (master_seed, trial_index), so a sweep
is reproducible end to end and each trial's outcome is independent of which
other trials run or how many workers execute them. Failures are recorded in
the trial's result rather than aborting the sweep. Rankings sort by
validation accuracy with trial index as the tiebreak; wall-clock time is
reported but never used for ordering, so the ranked CSV is identical across
worker counts.
"""

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import optim
from .errors import ConfigError
from .models import ModelConfig, build_model
from .optim import Optimizer, OptimizerHyper
from .training import TrainConfig, evaluate, train

_BATCH_CHOICES = (32, 64, 128, 256, 512, 1024, 2048)


@dataclass
class SweepSpace:
    f1: tuple = (8, 16, 32)
    f2: tuple = (8, 16, 32)
    d: tuple = (2, 4, 8)
    dropout: tuple = (0.1, 0.5)
    kernel_length: tuple = (32, 64, 128)
    norm_rate: tuple = (0.1, 0.5)
    optimizer: tuple = optim.KINDS
    batch_size: tuple = _BATCH_CHOICES

    def __post_init__(self):
        for name in ("f1", "f2", "d", "kernel_length", "optimizer", "batch_size"):
            values = tuple(getattr(self, name))
            if not values:
                raise ConfigError(f"sweep space field {name} is empty")
            setattr(self, name, values)
        for kind in self.optimizer:
            if kind not in optim.KINDS:
                raise ConfigError(f"unknown optimizer in sweep space: {kind!r}")
        for name in ("dropout", "norm_rate"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise ConfigError(
                    f"sweep space range {name} needs 0 <= lo <= hi, got ({lo}, {hi})")
            setattr(self, name, (float(lo), float(hi)))

    def to_dict(self):
        return {k: list(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown sweep space field {sorted(unknown)[0]!r}")
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass
class TrialResult:
    trial_index: int
    config: dict
    seed: int
    val_accuracy: float = None
    test_accuracy: float = None
    wall_seconds: float = 0.0
    error: str = None


def _draw_values(space, rng):
    """Raw hyperparameter draws: discrete fields uniform over their choice
    sets, continuous uniform over [lo, hi]. The draw order is fixed so a given
    rng state always maps to the same values."""

    def pick(choices):
        return choices[int(rng.integers(len(choices)))]

    def span(bounds):
        lo, hi = bounds
        return lo + (hi - lo) * float(rng.random())

    return {
        "f1": pick(space.f1),
        "f2": pick(space.f2),
        "d": pick(space.d),
        "dropout_rate": span(space.dropout),
        "kernel_length": pick(space.kernel_length),
        "norm_rate": span(space.norm_rate),
        "optimizer": pick(space.optimizer),
        "batch_size": pick(space.batch_size),
    }


def sample_config(space, rng, channels=16, samples=128, arch="cn-eegnet",
                  base_train=None):
    """Draw one (ModelConfig, TrainConfig, OptimizerHyper)."""
    v = _draw_values(space, rng)
    model_cfg = ModelConfig(arch=arch, f1=v["f1"], f2=v["f2"], d=v["d"],
                            kernel_length=v["kernel_length"],
                            dropout_rate=v["dropout_rate"],
                            norm_rate=v["norm_rate"],
                            channels=channels, samples=samples)
    base = base_train or TrainConfig()
    return (model_cfg, replace(base, batch_size=v["batch_size"]),
            OptimizerHyper(kind=v["optimizer"]))


def trial_seed(master_seed, trial_index):
    seq = np.random.SeedSequence([int(master_seed), int(trial_index)])
    return int(seq.generate_state(1)[0])


def resolve_workers(requested=None):
    """env ERPNET_THREADS caps parallelism; absent/0 means no cap."""
    cap = int(os.environ.get("ERPNET_THREADS", "0") or "0")
    workers = requested if requested and requested >= 1 else 1
    if cap >= 1:
        workers = min(workers, cap)
    return workers


_WORKER_DATA = {}


def _init_worker(train_ds, val_ds, test_ds):
    _WORKER_DATA["datasets"] = (train_ds, val_ds, test_ds)


def _run_trial(task):
    index, space, arch, base_train, master_seed = task
    train_ds, val_ds, test_ds = _WORKER_DATA["datasets"]
    rng = np.random.default_rng(np.random.SeedSequence([int(master_seed), index, 17]))
    seed = trial_seed(master_seed, index)
    started = time.perf_counter()
    draws = _draw_values(space, rng)
    # record the raw draws up front so a rejected config still shows what was tried
    config = {
        "model": {k: draws[k] for k in ("f1", "f2", "d", "kernel_length",
                                        "dropout_rate", "norm_rate")},
        "train": {"batch_size": draws["batch_size"]},
        "optimizer": {"kind": draws["optimizer"]},
    }
    try:
        model_cfg = ModelConfig(arch=arch, channels=train_ds.n_channels,
                                samples=train_ds.n_samples, **config["model"])
        train_cfg = replace(base_train or TrainConfig(),
                            batch_size=draws["batch_size"], seed=seed)
        opt_hyper = OptimizerHyper(kind=draws["optimizer"])
        config = {"model": model_cfg.to_dict(),
                  "train": asdict(train_cfg),
                  "optimizer": asdict(opt_hyper)}
        model = build_model(model_cfg, seed=seed)
        report = train(model, train_ds, val_ds, train_cfg, Optimizer(opt_hyper))
        val_acc = float(report.history["val_acc"][report.best_val_epoch - 1])
        test_acc, _ = evaluate(model, test_ds)
        return TrialResult(index, config, seed, val_acc, test_acc,
                           time.perf_counter() - started, None)
    except Exception as e:  # a bad draw must not sink the other trials
        return TrialResult(index, config, seed, None, None,
                           time.perf_counter() - started,
                           f"{type(e).__name__}: {e}")


def run_sweep(space, budget, datasets, base_train_cfg=None, master_seed=0,
              workers=1, arch="cn-eegnet"):
    """datasets is a (train, val, test) EpochDataset triple shared read-only
    by all trials. Returns TrialResults ranked best-first."""
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    train_ds, val_ds, test_ds = datasets
    tasks = [(i, space, arch, base_train_cfg, master_seed) for i in range(budget)]
    workers = resolve_workers(workers)
    if workers == 1:
        _init_worker(train_ds, val_ds, test_ds)
        results = [_run_trial(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(train_ds, val_ds, test_ds)) as pool:
            results = list(pool.map(_run_trial, tasks))
    return rank_trials(results)


def rank_trials(results):
    def key(r):
        failed = r.val_accuracy is None
        return (1 if failed else 0,
                0.0 if failed else -r.val_accuracy,
                r.trial_index)

    return sorted(results, key=key)


_CSV_FIELDS = ("rank", "trial_index", "f1", "f2", "d", "kernel_length",
               "dropout_rate", "norm_rate", "optimizer", "batch_size", "seed",
               "val_accuracy", "test_accuracy", "error")


def sweep_csv(ranked):
    """One row per trial, rank order. Timings are deliberately omitted so the
    file is identical across reruns and worker counts."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(_CSV_FIELDS)
    for rank, r in enumerate(ranked, start=1):
        model = r.config.get("model", {})
        row = [rank, r.trial_index,
               model.get("f1", ""), model.get("f2", ""), model.get("d", ""),
               model.get("kernel_length", ""),
               "" if "dropout_rate" not in model else repr(model["dropout_rate"]),
               "" if "norm_rate" not in model else repr(model["norm_rate"]),
               r.config.get("optimizer", {}).get("kind", ""),
               r.config.get("train", {}).get("batch_size", ""),
               r.seed,
               "" if r.val_accuracy is None else repr(r.val_accuracy),
               "" if r.test_accuracy is None else repr(r.test_accuracy),
               r.error or ""]
        w.writerow(row)
    return out.getvalue()


def sweep_json(ranked):
    return json.dumps([asdict(r) for r in ranked], indent=2, sort_keys=True)
