"""scikit-learn style estimators wrapping the training engine.

These follow the standard conventions (constructor stores hyperparameters
verbatim, fit/predict/predict_proba, trailing-underscore fitted attributes),
so they compose with clone, cross-validation, and pipelines. The underlying
task is binary, matching the rest of the package.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .data import EpochDataset, SplitSpec, split
from .errors import DataError, ShapeError
from .models import ModelConfig, build_model
from .optim import Optimizer, OptimizerHyper
from .training import TrainConfig, train


def check_epoch_array(x):
    """Validate a (n_epochs, n_channels, n_samples) array of finite values
    and return it as contiguous float32."""
    arr = np.asarray(x)
    if arr.ndim != 3:
        raise ShapeError(f"expected a 3-d (epochs, channels, samples) array, "
                         f"got {arr.ndim}-d")
    if arr.shape[0] == 0:
        raise DataError("no epochs in input")
    if not np.issubdtype(arr.dtype, np.number):
        raise DataError(f"non-numeric dtype {arr.dtype}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise DataError("input contains NaN or infinity")
    return arr


def check_labels(y, n_epochs):
    """Validate a label vector against the epoch count; returns the sorted
    class values and the labels encoded as class indices."""
    labels = np.asarray(y).ravel()
    if labels.shape[0] != n_epochs:
        raise ShapeError(f"{labels.shape[0]} labels for {n_epochs} epochs")
    classes = np.unique(labels)
    if classes.size != 2:
        raise DataError(f"binary classification needs exactly 2 classes, "
                        f"got {classes.size}")
    encoded = np.searchsorted(classes, labels).astype(np.uint8)
    return classes, encoded


class _EpochClassifier(BaseEstimator, ClassifierMixin):
    _arch = None

    def __init__(self, f1, f2, d, kernel_length, dropout_rate, norm_rate,
                 activation, optimizer, lr, max_epochs, batch_size, early_stop,
                 min_delta, patience, validation_fraction, random_state):
        self.f1 = f1
        self.f2 = f2
        self.d = d
        self.kernel_length = kernel_length
        self.dropout_rate = dropout_rate
        self.norm_rate = norm_rate
        self.activation = activation
        self.optimizer = optimizer
        self.lr = lr
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.early_stop = early_stop
        self.min_delta = min_delta
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, y):
        X = check_epoch_array(X)
        classes, encoded = check_labels(y, X.shape[0])
        if not 0.0 < self.validation_fraction < 1.0:
            raise DataError(f"validation_fraction must lie in (0, 1), "
                            f"got {self.validation_fraction}")
        seed = int(self.random_state or 0)
        ds = EpochDataset(epochs=X, labels=encoded,
                          conditions=np.zeros(X.shape[0], dtype=np.uint8))
        spec = SplitSpec(train_frac=1.0 - self.validation_fraction,
                         val_frac=self.validation_fraction,
                         test_frac=0.0, seed=seed)
        train_ds, val_ds, _ = split(ds, spec)
        config = ModelConfig(arch=self._arch, f1=self.f1, f2=self.f2, d=self.d,
                             kernel_length=self.kernel_length,
                             dropout_rate=self.dropout_rate,
                             norm_rate=self.norm_rate,
                             activation=self.activation,
                             channels=X.shape[1], samples=X.shape[2])
        cfg = TrainConfig(max_epochs=self.max_epochs, batch_size=self.batch_size,
                          early_stop=self.early_stop, min_delta=self.min_delta,
                          patience=self.patience, seed=seed)
        optimizer = Optimizer(OptimizerHyper(kind=self.optimizer, lr=self.lr))
        model = build_model(config, seed=seed)
        report = train(model, train_ds, val_ds, cfg, optimizer)
        self.classes_ = classes
        self.model_ = model
        self.report_ = report
        self.n_epochs_fit_ = X.shape[0]
        return self

    def _check_ready(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                f"{type(self).__name__} must be fitted before predicting")
        X = check_epoch_array(X)
        cfg = self.model_.config
        if X.shape[1:] != (cfg.channels, cfg.samples):
            raise ShapeError(f"epochs are {X.shape[1:]}, the fitted model "
                             f"expects ({cfg.channels}, {cfg.samples})")
        return X

    def predict_proba(self, X):
        X = self._check_ready(X)
        return self.model_.predict_proba(X)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[proba.argmax(axis=1)]


class CNEEGNetClassifier(_EpochClassifier):
    _arch = "cn-eegnet"

    def __init__(self, f1=16, f2=16, d=2, kernel_length=64, dropout_rate=0.15,
                 norm_rate=0.17, activation=None, optimizer="adam", lr=0.0009,
                 max_epochs=750, batch_size=64, early_stop=True, min_delta=0.0001,
                 patience=200, validation_fraction=0.15, random_state=0):
        super().__init__(f1, f2, d, kernel_length, dropout_rate, norm_rate,
                         activation, optimizer, lr, max_epochs, batch_size,
                         early_stop, min_delta, patience, validation_fraction,
                         random_state)


class EEGNetClassifier(_EpochClassifier):
    _arch = "eegnet"

    def __init__(self, f1=8, f2=16, d=2, kernel_length=64, dropout_rate=0.25,
                 norm_rate=0.25, activation=None, optimizer="adam", lr=0.0009,
                 max_epochs=750, batch_size=64, early_stop=True, min_delta=0.0001,
                 patience=200, validation_fraction=0.15, random_state=0):
        super().__init__(f1, f2, d, kernel_length, dropout_rate, norm_rate,
                         activation, optimizer, lr, max_epochs, batch_size,
                         early_stop, min_delta, patience, validation_fraction,
                         random_state)
